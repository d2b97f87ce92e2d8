"""Numba switch.

Set ``LINEFIB_DISABLE_JIT=1`` to force the pure-numpy kernels even when numba
is importable.
"""
import os

_FLAG = os.environ.get("LINEFIB_DISABLE_JIT", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_AVAILABLE = numba is not None
JIT_ENABLED = JIT_AVAILABLE and _FLAG not in {"1", "true", "yes", "on"}


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or an identity decorator without numba."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
