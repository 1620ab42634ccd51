"""Optional numba acceleration.

Kernels are written once as plain Python loops and compiled with
``numba.njit`` when available. Set ``CLOSENESS_NUMBA=0`` to force the
pure-numpy code paths (useful for debugging and for the benchmark).
"""
import os

_flag = os.environ.get("CLOSENESS_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _requested and _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
