"""Hot numeric kernels with a numba path and a pure-numpy path.

The active backend is chosen once at import time from ``LINEFIB_DISABLE_JIT``
(see :mod:`linefib._jit`).  :func:`get_backend` returns either module so tests
and the benchmark can drive both explicitly.
"""
import numpy as np

from .._jit import JIT_AVAILABLE, JIT_ENABLED
from . import codes, vec

if JIT_AVAILABLE:
    from . import jit as _jit_mod
else:  # pragma: no cover
    _jit_mod = None

BACKEND = "numba" if JIT_ENABLED else "numpy"


def get_backend(name=None):
    name = name or BACKEND
    if name == "numba":
        if _jit_mod is None:  # pragma: no cover
            raise RuntimeError("numba backend requested but numba is not importable")
        return _jit_mod
    if name == "numpy":
        return vec
    raise ValueError(f"unknown backend {name!r}")


def _pts(a, dim):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, dim))


def _par(p):
    return np.ascontiguousarray(np.asarray(p, dtype=np.float64).ravel())


def eval_B(kind, params, q, backend=None):
    return get_backend(backend).eval_B(int(kind), _par(params), _pts(q, 2))


def eval_f(kind, params, p, backend=None):
    return get_backend(backend).eval_f(int(kind), _par(params), _pts(p, 2))


def jac_B(kind, params, q, fd_step=1e-7, backend=None):
    return get_backend(backend).jac_B(int(kind), _par(params), _pts(q, 2), float(fd_step))


def in_domain(kind, params, q, backend=None):
    return get_backend(backend).in_domain(int(kind), _par(params), _pts(q, 2))


def invert(kind, params, X, tol, maxit, steps, fd_step=1e-7, backend=None):
    return get_backend(backend).invert(
        int(kind), _par(params), _pts(X, 3), float(tol), int(maxit), int(steps),
        float(fd_step))


def exotic_solve(c, t, backend=None):
    c = np.ascontiguousarray(np.asarray(c, dtype=np.float64).ravel())
    t = np.ascontiguousarray(np.asarray(t, dtype=np.float64).ravel())
    return get_backend(backend).exotic_solve(c, t)


def exotic_invert(X, backend=None):
    return get_backend(backend).exotic_invert(_pts(X, 3))


def line_pairs(bases, dirs, tol, backend=None):
    return get_backend(backend).line_pairs(_pts(bases, 3), _pts(dirs, 3), float(tol))


__all__ = [
    "BACKEND", "codes", "get_backend", "eval_B", "eval_f", "jac_B", "in_domain",
    "invert", "exotic_solve", "exotic_invert", "line_pairs",
]
