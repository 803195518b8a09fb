"""Numeric hot loops, compiled when available.

The Cython build is picked at import time; if it is missing (no compiler at
install time) the identical pure-Python versions are used. ``BACKEND`` says
which one is active.
"""
from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # pragma: no cover - depends on the build environment
    compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

neumaier_sum = _active.neumaier_sum
weighted_mean = _active.weighted_mean
load_imbalance = _active.load_imbalance
split_even = _active.split_even
max_load_index = _active.max_load_index

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "neumaier_sum",
    "weighted_mean",
    "load_imbalance",
    "split_even",
    "max_load_index",
]
