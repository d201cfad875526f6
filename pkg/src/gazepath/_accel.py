"""Numba switch.

Set ``GAZEPATH_NUMBA=0`` to run the vectorized numpy kernels instead of the
JIT-compiled loops. The flag is read once at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_FLAG = os.environ.get("GAZEPATH_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in {"0", "false", "no", "off"}


def jit(fn):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
