"""Simulated patient: three severity chains, baseline fluency and a dose history."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .hmm import GaussianHmm
from .pharmacology import ActiveDose, concentration, NEGLIGIBLE_CONCENTRATION

#: Fluency weights for depression, anxiety, insomnia and baseline.
FLUENCY_WEIGHTS = (0.1, 0.2, 0.3, 0.4)

DEFAULT_NOISE_STD = 0.025  # detector precision 0.15 on a 6-point scale
PESSIMISTIC_NOISE_STD = 0.1


@dataclass(frozen=True)
class PatientState:
    depression: int
    anxiety: int
    insomnia: int
    baseline: float
    active_doses: tuple[ActiveDose, ...] = field(default=())
    day: int = 0

    def __post_init__(self):
        for name in ("depression", "anxiety", "insomnia"):
            v = getattr(self, name)
            if v not in (1, 2, 3, 4, 5):
                raise ValueError(f"{name} severity {v!r} outside 1..5")
        if not 0.0 <= self.baseline <= 1.0:
            raise ValueError(f"baseline fluency {self.baseline} outside [0, 1]")
        if self.day < 0:
            raise ValueError(f"day must be >= 0, got {self.day}")
        object.__setattr__(self, "active_doses", tuple(self.active_doses))

    @property
    def severities(self) -> tuple[int, int, int]:
        return (self.depression, self.anxiety, self.insomnia)

    def with_dose(self, dose: ActiveDose) -> "PatientState":
        return replace(self, active_doses=self.active_doses + (dose,))

    def to_dict(self, measured_fluency: float | None = None) -> dict:
        return {
            "day": self.day,
            "severities": {
                "depression": self.depression,
                "anxiety": self.anxiety,
                "insomnia": self.insomnia,
            },
            "baseline": self.baseline,
            "true_fluency": true_fluency(self),
            "measured_fluency": measured_fluency,
        }


def _relief(severity) -> float:
    # 1 (no symptoms) -> 1.0, 5 (most severe) -> 0.0
    return (5 - severity) / 4


def fluency_from(depression, anxiety, insomnia, baseline):
    """Vectorised fluency; accepts scalars or numpy arrays."""
    wd, wa, wi, wr = FLUENCY_WEIGHTS
    return (wd * _relief(depression) + wa * _relief(anxiety)
            + wi * _relief(insomnia) + wr * baseline)


def true_fluency(state: PatientState) -> float:
    return float(fluency_from(state.depression, state.anxiety, state.insomnia, state.baseline))


def measure_fluency(state: PatientState, noise_std: float, rng: np.random.Generator) -> float:
    """Noisy fluency reading, clamped to [0, 1]."""
    if not noise_std >= 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    s = true_fluency(state)
    if noise_std == 0:
        rng.standard_normal()  # keep stream position independent of noise level
        return s
    return min(1.0, max(0.0, s + noise_std * rng.standard_normal()))


def _live_doses(doses, day):
    return [d for d in doses if concentration(d, day) >= NEGLIGIBLE_CONCENTRATION]


def _dose_arrays(doses):
    k = len(doses)
    start = np.empty(k)
    amount = np.empty(k)
    onset = np.empty(k)
    half = np.empty(k)
    mean = np.empty((k, 3))
    std = np.empty((k, 3))
    for j, d in enumerate(doses):
        med = d.medication
        start[j] = d.start_day
        amount[j] = d.dosage
        onset[j] = med.time_to_effect
        half[j] = med.half_life
        mean[j] = med.effect_mean
        std[j] = med.effect_std
    return start, amount, onset, half, mean, std


def advance_days(patient: PatientState, hmms, n_days: int, rng: np.random.Generator,
                 simulate_span=None):
    """Advance ``n_days`` days; return the new state and the daily severities.

    Random draws for the whole span are taken up front: per-dose effect
    normals ``(n_days, k, 3)`` then transition uniforms ``(n_days, 3)``, where
    ``k`` counts doses still above the negligible-concentration floor.
    """
    if n_days < 0:
        raise ValueError(f"n_days must be >= 0, got {n_days}")
    hmms = tuple(hmms)
    if len(hmms) != 3:
        raise ValueError("need one chain per condition (depression, anxiety, insomnia)")
    if n_days == 0:
        return patient, np.empty((0, 3), dtype=np.int64)
    live = _live_doses(patient.active_doses, patient.day)
    start, amount, onset, half, mean, std = _dose_arrays(live)
    z = rng.standard_normal((n_days, len(live), 3))
    u = rng.random((n_days, 3))
    transitions = np.ascontiguousarray(np.stack([h.transition for h in hmms]))
    kernel = simulate_span or kernels.simulate_span
    sev = kernel(np.array(patient.severities, dtype=np.int64), patient.day, transitions,
                 start, amount, onset, half, mean, std, z, u)
    last = sev[-1]
    new = replace(patient, depression=int(last[0]), anxiety=int(last[1]),
                  insomnia=int(last[2]), day=patient.day + n_days)
    return new, sev


def advance_day(patient: PatientState, hmms, rng: np.random.Generator) -> PatientState:
    """One day of medication-adjusted dynamics.

    Each condition's pressure comes from the patient's dose list; the pressure
    reshapes that condition's transition row and the chain takes one step.
    """
    return advance_days(patient, hmms, 1, rng)[0]


def default_hmms() -> tuple[GaussianHmm, GaussianHmm, GaussianHmm]:
    h = GaussianHmm.default()
    return (h, h, h)
