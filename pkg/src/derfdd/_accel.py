"""Backend selection for the hot kernels.

Set ``DERFDD_NUMBA=0`` before import to run every kernel through its
pure Python / numpy path.  Numba is used otherwise when it imports.
"""
import os

_flag = os.environ.get("DERFDD_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def jit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
