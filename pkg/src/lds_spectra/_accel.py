"""JIT switch for the numeric kernels.

Set ``LDS_SPECTRA_DISABLE_JIT=1`` to run every kernel through its pure-numpy
path. The flag is read once at import time.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    from numba import njit as _numba_njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    NUMBA_AVAILABLE = False

USE_JIT = NUMBA_AVAILABLE and (
    os.environ.get("LDS_SPECTRA_DISABLE_JIT", "").strip().lower() in _FALSY
)

# No fastmath: NaN handling and reproducibility across both paths matter more
# than a few percent of speed.
JIT_OPTIONS = dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as is.

    The undecorated function stays reachable as ``func.py_func`` in both cases
    so tests and benchmarks can call the interpreted version explicitly.
    """
    if _numba_njit is None:
        func.py_func = func
        return func
    return _numba_njit(**JIT_OPTIONS)(func)
