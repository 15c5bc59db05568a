"""Backend selection for the compiled kernels.

Set ``FDRSTREAM_DISABLE_NUMBA=1`` to force the pure-numpy path. The flag is
read once at import time.
"""
import os

_FALSY = ("", "0", "false", "no", "off")

USE_NUMBA = os.environ.get("FDRSTREAM_DISABLE_NUMBA", "").strip().lower() in _FALSY

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is an optional speedup
        USE_NUMBA = False


def njit(fn):
    """Compile ``fn`` with numba when available; the original stays at ``fn.py_func``."""
    if not USE_NUMBA:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
