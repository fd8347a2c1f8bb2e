"""Backend selection for the day-span kernel.

The compiled extension is used when it imports; otherwise the pure-Python
twin.  ``FLUENTRX_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

if os.environ.get("FLUENTRX_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
simulate_span = _compiled.simulate_span if _compiled is not None else _fallback.simulate_span
python_simulate_span = _fallback.simulate_span
compiled_simulate_span = _compiled.simulate_span if _compiled is not None else None
