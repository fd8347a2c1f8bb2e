"""Seeded patient-fluency simulator, LinUCB medication selection and rater calibration."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
