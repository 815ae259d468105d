"""numba shim.

Set ``GSP_UNROLL_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is missing the flag is implied.
"""
import os

_FLAG = "GSP_UNROLL_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when available, else an identity decorator.

    Compilation is lazy, so decorating a kernel costs nothing if the numpy
    path is selected.
    """
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
