"""Numba switch for the hot kernels.

Set ``GLIDELAB_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. The flag is read once, at import time.
"""
import os

_FLAG = os.environ.get("GLIDELAB_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import warnings

    import numba
    from numba import njit, prange

    warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")

    HAVE_NUMBA = True
except ImportError:  # numba missing or switched off
    numba = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


USE_NUMBA = HAVE_NUMBA


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
