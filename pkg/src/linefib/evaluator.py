"""Evaluate the unit vector field of a generator-built fibration.

The field at ``x`` is the direction of the fiber through ``x``.  Finding that
fiber means solving ``q + x3 B(q) = (x1, x2)`` for the base point ``q``; the
map is a homeomorphism of the domain for every height, so the solution is
unique when it exists.

``FibrationModel.scale`` implements the contraction ``V_c(x) = V(c x)``;
``scale == 1`` is the original field and ``scale == 0`` the constant field
``V(0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import CapExceeded, NoConvergence, OnBoundaryFiber, OutsideDomain
from .generators import GeneratorMap, OneParam, _points, _unwrap, as_generator
from .geom import OrientedLine, unit
from .kernels import codes

CAP_RADIUS = 1e6


@dataclass(frozen=True)
class SolverSettings:
    newton_tol: float = 1e-12
    max_newton_iters: int = 50
    continuation_steps: int = 8
    fd_step: float = 1e-6

    def __post_init__(self):
        for name in ("newton_tol", "max_newton_iters", "continuation_steps", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.newton_tol < 1e-6:
            raise ValueError("newton_tol must be below 1e-6")

    def to_dict(self):
        return {"newton_tol": self.newton_tol, "max_newton_iters": self.max_newton_iters,
                "continuation_steps": self.continuation_steps, "fd_step": self.fd_step}


@dataclass(frozen=True, eq=False)
class FibrationModel:
    generator: GeneratorMap
    settings: SolverSettings = field(default_factory=SolverSettings)
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "generator", as_generator(self.generator))
        if not 0.0 <= self.scale <= 1.0:
            raise ValueError("scale must lie in [0, 1]")

    @property
    def name(self):
        return self.generator.name

    @property
    def spec(self):
        return self.generator.spec

    @property
    def is_one_param(self):
        return isinstance(self.generator.spec, OneParam)

    def _to_gen(self, pts):
        # +0.0 folds -0.0 into +0.0 so scale 0 gives one exact evaluation point
        return self.scale * pts + 0.0

    def in_domain(self, q):
        q, single = _points(q)
        ok = kernels.in_domain(self.generator.kind, self.generator.params, self._to_gen(q))
        return _unwrap(ok, single)

    def B(self, q):
        """Generator of this (possibly scaled) model, ``B(scale * q)``."""
        q, single = _points(q)
        qs = self._to_gen(q)
        ok = kernels.in_domain(self.generator.kind, self.generator.params, qs)
        if not np.all(ok):
            raise OutsideDomain(f"{self.name}: base point outside the domain")
        return _unwrap(kernels.eval_B(self.generator.kind, self.generator.params, qs), single)

    def jac_B(self, q):
        """Kernel Jacobian of :meth:`B` (analytic where available)."""
        q, single = _points(q)
        J = kernels.jac_B(self.generator.kind, self.generator.params, self._to_gen(q),
                          self.settings.fd_step)
        return _unwrap(J * self.scale, single)

    def seam_distance(self, q):
        q, single = _points(q)
        if self.scale == 0.0:
            return _unwrap(np.full(q.shape[0], np.inf), single)
        d = np.asarray(self.generator.seam_distance(self._to_gen(q))).reshape(-1)
        return _unwrap(d / self.scale, single)

    def boundary_directions(self):
        """Directions of the boundary-line families (unaffected by scaling)."""
        return [fam.dir for fam in self.generator.boundary]

    def boundary_lines(self, n, width, rng):
        """Sample ``n`` lines from each boundary family, in model coordinates."""
        out = []
        for fam in self.generator.boundary:
            bases, dirs = fam.sample_lines(n, width, rng)
            if self.scale > 0:
                bases = bases / self.scale
            out.append((bases, dirs))
        return out

    def to_dict(self):
        return {"generator": self.generator.to_dict(), "settings": self.settings.to_dict(),
                "scale": self.scale}


def _line_dir(B):
    d = np.column_stack([B, np.ones(B.shape[0])])
    return d / np.linalg.norm(d, axis=1)[:, None]


def fiber_through_base(model: FibrationModel, q) -> OrientedLine:
    """The fiber ``(q, 0) + t (B(q), 1)``."""
    B = np.asarray(model.B(q), dtype=float).reshape(2)
    q = np.asarray(q, dtype=float).reshape(2)
    return OrientedLine((q[0], q[1], 0.0), _line_dir(B[None, :])[0])


def fiber_lines(model: FibrationModel, Q):
    """Bases and unit directions of the fibers over the rows of ``Q``."""
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    B = model.B(Q).reshape(-1, 2)
    return np.column_stack([Q, np.zeros(Q.shape[0])]), _line_dir(B)


def _boundary_mask(model, Xs):
    """Family index covering each generator-frame point, or -1."""
    idx = np.full(Xs.shape[0], -1)
    for k, fam in enumerate(model.generator.boundary):
        hit = np.asarray(fam.covers(Xs)).reshape(-1) & (idx < 0)
        idx[hit] = k
    return idx


def _solve(model, X, method):
    """Inversion core: ``(Q, status, Bgen)`` where ``Bgen`` is the generator
    value on each solved fiber (NaN elsewhere)."""
    if method not in ("auto", "newton"):
        raise ValueError("method must be 'auto' or 'newton'")
    gen = model.generator
    n = X.shape[0]
    Q = np.full((n, 2), np.nan)
    Bg = np.full((n, 2), np.nan)
    status = np.full(n, codes.NO_CONVERGENCE, dtype=np.int8)
    finite = np.all(np.isfinite(X), axis=1)
    capped = finite & (np.linalg.norm(X, axis=1) > CAP_RADIUS)
    status[capped] = codes.CAP
    status[~finite] = codes.OUTSIDE
    Xs = model._to_gen(X)
    fam = _boundary_mask(model, Xs)
    status[(fam >= 0) & finite & ~capped] = codes.BOUNDARY
    todo = np.flatnonzero(finite & ~capped & (fam < 0))
    if todo.size == 0:
        return Q, status, Bg
    s = model.settings
    if model.scale == 0.0:
        # constant field: every fiber is parallel to V(0)
        b0 = model.B(np.zeros(2))
        Q[todo] = X[todo, :2] - X[todo, 2:3] * b0[None, :]
        Bg[todo] = b0
        status[todo] = codes.OK
        return Q, status, Bg
    if gen.kind == codes.EXOTIC_TAN and method == "auto":
        Qg, tq, st = kernels.exotic_invert(Xs[todo])
        # keep tan(q1) from the solve; recomputing it loses digits near the pole
        Bt = np.column_stack([-Qg[:, 1], tq])
    else:
        Qg, st = kernels.invert(gen.kind, gen.params, Xs[todo], s.newton_tol,
                                s.max_newton_iters, s.continuation_steps, s.fd_step)
        # a failed solve from outside the domain is reported as such; for the
        # plane-by-plane generator q2 = x2, so x2 alone decides
        same = (Xs[todo, 2] == 0.0) | model.is_one_param
        flat = same & ~kernels.in_domain(gen.kind, gen.params, Xs[todo, :2])
        st = np.where(flat, codes.OUTSIDE, st).astype(np.int8)
        Bt = kernels.eval_B(gen.kind, gen.params, Qg)
    good = st == codes.OK
    Q[todo[good]] = Qg[good] / model.scale
    Bg[todo[good]] = Bt[good]
    status[todo] = st
    return Q, status, Bg


def base_points(model: FibrationModel, X, method="auto"):
    """Batch inversion.  Returns ``(Q, status)`` with status codes from
    :mod:`linefib.kernels.codes`; ``Q`` is NaN where status is not OK.

    ``method="auto"`` uses the one-dimensional monotone solve for the exotic
    strip generator and Newton otherwise; ``"newton"`` forces Newton.
    """
    X, _ = _points(X, 3)
    Q, status, _ = _solve(model, X, method)
    return Q, status


def fiber_slopes(model: FibrationModel, X, method="auto"):
    """Unnormalised fiber direction ``(B1, B2, 1)`` at each row of ``X``.

    Returns ``(B, status)`` with ``B`` the generator value on the fiber through
    the point, in the generator frame.  For the strip generator ``B2`` is the
    ``tan`` value from the monotone solve itself, so it stays accurate close to
    the strip edge.
    """
    X, _ = _points(X, 3)
    _, status, Bg = _solve(model, X, method)
    return Bg, status


def _raise_for(status, x):
    if status == codes.CAP:
        raise CapExceeded(f"|x| > {CAP_RADIUS:g} at {list(x)}")
    if status == codes.BOUNDARY:
        raise OnBoundaryFiber(f"{list(x)} lies on a boundary-line fiber")
    if status == codes.OUTSIDE:
        raise OutsideDomain(f"{list(x)} is not reached by any evaluable fiber")
    raise NoConvergence(f"base point solve failed at {list(x)}")


def base_point_at(model: FibrationModel, x, method="auto"):
    """Base point ``q`` of the fiber through ``x``.

    The residual ``|q + x3 B(q) - (x1, x2)|`` is below
    ``max(newton_tol, 16 eps |scale of the equation|)``.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    Q, st = base_points(model, x, method)
    if st[0] != codes.OK:
        _raise_for(st[0], x)
    return Q[0]


def field_valid(status):
    """Points where :func:`field_at_many` produced a direction."""
    status = np.asarray(status)
    return (status == codes.OK) | (status == codes.BOUNDARY)


def field_at_many(model: FibrationModel, X, method="auto"):
    """Unit field at each row of ``X``; returns ``(V, status)``.

    Rows on boundary-line fibers get the family direction and status
    ``BOUNDARY``; rows that could not be evaluated are NaN.
    """
    X, _ = _points(X, 3)
    n = X.shape[0]
    V = np.full((n, 3), np.nan)
    gen = model.generator
    if model.is_one_param:
        # closed form: the direction depends only on the plane y = const
        status = np.full(n, codes.OK, dtype=np.int8)
        finite = np.all(np.isfinite(X), axis=1)
        status[~finite] = codes.OUTSIDE
        status[finite & (np.linalg.norm(X, axis=1) > CAP_RADIUS)] = codes.CAP
        ok = status == codes.OK
        th = gen.spec.angle(model._to_gen(X[ok, 1]))
        V[ok] = np.column_stack([np.sin(th), np.zeros(th.size), np.cos(th)])
        return V, status
    _, status, Bg = _solve(model, X, method)
    ok = status == codes.OK
    if ok.any():
        V[ok] = _line_dir(Bg[ok])
    fam = _boundary_mask(model, model._to_gen(X))
    for k, f in enumerate(gen.boundary):
        V[(fam == k) & (status == codes.BOUNDARY)] = f.dir
    return V, status


def field_at(model: FibrationModel, x, method="auto"):
    x = np.asarray(x, dtype=float).reshape(3)
    V, st = field_at_many(model, x, method)
    if not field_valid(st)[0]:
        _raise_for(st[0], x)
    return V[0]


def fiber_through_point(model: FibrationModel, x) -> OrientedLine:
    x = np.asarray(x, dtype=float).reshape(3)
    return OrientedLine(x, unit(field_at(model, x)))


def inversion_residual(model: FibrationModel, X, Q):
    """``|q + x3 B(q) - (x1, x2)|`` row by row, in the generator frame."""
    X, _ = _points(X, 3)
    Q, _ = _points(Q, 2)
    c = model.scale
    Bq = model.B(Q).reshape(-1, 2)
    F = c * Q + c * X[:, 2:3] * Bq - c * X[:, :2]
    return np.hypot(F[:, 0], F[:, 1])


def scale_homotopy(model: FibrationModel, s: float) -> FibrationModel:
    """The model whose field is ``V((1 - s) x)``."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return replace(model, scale=model.scale * (1.0 - s))


__all__ = [
    "SolverSettings", "FibrationModel", "CAP_RADIUS", "fiber_through_base", "fiber_lines",
    "base_points", "base_point_at", "fiber_slopes", "field_at", "field_at_many", "field_valid",
    "fiber_through_point", "inversion_residual", "scale_homotopy",
]
