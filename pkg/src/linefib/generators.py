"""Planar generator maps and the fibrations they induce.

A generator is a map ``B`` on an open set ``E`` of the base plane ``z = 0``.
Its fibers are the lines ``(q, 0) + t (B(q), 1)``.  Points of the base plane
outside ``E`` may be covered by families of parallel horizontal lines
(:class:`BoundaryLineFamily`).

Every generator is evaluated through the compiled kernels as a
``(kind, params)`` pair; the classes here only validate and encode.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import OutsideDomain
from .geom import as_unit, as_vec
from .kernels import codes

# relative tolerance for deciding that p - q is a multiple of B(p) - B(q)
COLLINEAR_TOL = 1e-12
# polygon corners are rounded by this radius so the boundary is C^1
DEFAULT_ROUNDING = 1e-3


def _points(q, dim=2):
    a = np.asarray(q, dtype=float)
    single = a.ndim == 1
    a = a.reshape(-1, dim)
    return a, single


def _unwrap(a, single):
    return a[0] if single else a


# --- domains ---------------------------------------------------------------


class DomainKind(str, Enum):
    FULL_PLANE = "FullPlane"
    STRIP = "Strip"
    HALF_PLANE = "HalfPlane"


@dataclass(frozen=True)
class PlanarDomain:
    """An open subset of the base plane.

    ``Strip(a, b)`` is ``a < p1 < b``.  ``HalfPlane(normal, offset)`` is
    ``<p, normal> > offset`` with ``normal`` a unit 2-vector.
    """

    kind: DomainKind = DomainKind.FULL_PLANE
    a: float = 0.0
    b: float = 0.0
    normal: tuple = (1.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == DomainKind.STRIP and not self.a < self.b:
            raise ValueError("strip requires a < b")
        if self.kind == DomainKind.HALF_PLANE:
            n = np.asarray(self.normal, dtype=float)
            if abs(np.hypot(*n) - 1.0) > 1e-12:
                raise ValueError("half-plane normal must be a unit 2-vector")

    @classmethod
    def full_plane(cls):
        return cls(DomainKind.FULL_PLANE)

    @classmethod
    def strip(cls, a, b):
        return cls(DomainKind.STRIP, a=float(a), b=float(b))

    @classmethod
    def half_plane(cls, normal, offset=0.0):
        return cls(DomainKind.HALF_PLANE, normal=tuple(float(v) for v in normal),
                   offset=float(offset))

    def boundary_distance(self, q):
        """Signed distance to the boundary; positive inside, ``inf`` for the plane."""
        q, single = _points(q)
        if self.kind == DomainKind.FULL_PLANE:
            d = np.full(q.shape[0], np.inf)
        elif self.kind == DomainKind.STRIP:
            d = np.minimum(q[:, 0] - self.a, self.b - q[:, 0])
        else:
            d = q @ np.asarray(self.normal) - self.offset
        return _unwrap(d, single)

    def contains(self, q, margin=0.0):
        return np.asarray(self.boundary_distance(q)) > margin


@dataclass(frozen=True)
class BoundaryLineFamily:
    """Parallel lines in the base plane filling the closed half-plane
    ``<p, normal> >= offset``, all pointing along ``direction``."""

    normal: tuple
    offset: float
    direction: tuple

    def __post_init__(self):
        d = as_unit(self.direction)
        if abs(d[2]) > 1e-12:
            raise ValueError("boundary lines must lie in the base plane")
        n = np.asarray(self.normal, dtype=float)
        if abs(np.dot(n, d[:2])) > 1e-12:
            raise ValueError("lines must be parallel to the region's edge")

    @property
    def dir(self):
        return np.asarray(self.direction, dtype=float)

    def covers(self, x):
        """True where the 3-D point lies on one of the family's lines."""
        x, single = _points(x, 3)
        hit = (x[:, 2] == 0.0) & (x[:, :2] @ np.asarray(self.normal) >= self.offset)
        return _unwrap(hit, single)

    def sample_lines(self, n, width, rng):
        """``n`` random lines of the family whose offsets lie within ``width``."""
        nrm = np.asarray(self.normal)
        along = self.dir[:2]
        depth = self.offset + width * rng.random(n)
        slide = width * (2.0 * rng.random(n) - 1.0)
        base2 = depth[:, None] * nrm[None, :] + slide[:, None] * along[None, :]
        bases = np.column_stack([base2, np.zeros(n)])
        return bases, np.tile(self.dir, (n, 1))


# --- f maps for composed generators ---------------------------------------


class FSpec:
    """Continuous map ``f`` of the plane; composed generators use ``B = i f``."""

    kind: int
    name: str

    def params(self) -> np.ndarray:
        return np.zeros(0)

    def seam_distance(self, p) -> np.ndarray:
        """Distance to the set where ``f`` fails to be smooth."""
        p, single = _points(p)
        return _unwrap(np.full(p.shape[0], np.inf), single)

    def preimage(self, v):
        """Points ``p`` with ``f(p) = v``, row by row; returns ``(P, ok)``
        with ``ok`` false where ``v`` is not a value of ``f``."""
        raise NotImplementedError

    def to_dict(self):
        return {"name": self.name}

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.params(), other.params())

    def __hash__(self):
        return hash((type(self).__name__, self.params().tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}()"


class DiskCollapse(FSpec):
    """Collapse the closed unit disk, shrink every outer circle by one."""

    kind = codes.DISK
    name = "DiskCollapse"

    def seam_distance(self, p):
        p, single = _points(p)
        return _unwrap(np.abs(np.hypot(p[:, 0], p[:, 1]) - 1.0), single)

    def preimage(self, v):
        v, _ = _points(v)
        r = np.hypot(v[:, 0], v[:, 1])
        return v * ((r + 1.0) / np.where(r > 0, r, 1.0))[:, None], np.ones(len(v), bool)


class SmoothDiskCollapse(FSpec):
    """Like :class:`DiskCollapse` with radial profile ``exp(-1/(r-1)^2)``; smooth."""

    kind = codes.SMOOTH_DISK
    name = "SmoothDiskCollapse"

    def preimage(self, v):
        # the profile takes every value in [0, 1) exactly once outside the disk
        v, _ = _points(v)
        g = np.hypot(v[:, 0], v[:, 1])
        ok = g < 1.0
        gs = np.where(ok & (g > 0), g, 0.5)
        r = 1.0 + 1.0 / np.sqrt(-np.log(gs))
        P = v * (r / gs)[:, None]
        return np.where((g > 0)[:, None], P, 0.0), ok


class HalfHalf(FSpec):
    """Identity on ``p1 <= 0``, projection to the ``p2`` axis on ``p1 >= 0``."""

    kind = codes.HALF_HALF
    name = "HalfHalf"

    def seam_distance(self, p):
        p, single = _points(p)
        return _unwrap(np.abs(p[:, 0]), single)

    def preimage(self, v):
        v, _ = _points(v)
        return v.copy(), v[:, 0] <= 0.0


class FatHelicoid(FSpec):
    """Collapse the band ``|p1| <= 1`` onto the ``p2`` axis."""

    kind = codes.FAT_HELICOID
    name = "FatHelicoid"

    def seam_distance(self, p):
        p, single = _points(p)
        return _unwrap(np.minimum(np.abs(p[:, 0] - 1.0), np.abs(p[:, 0] + 1.0)), single)

    def preimage(self, v):
        v, _ = _points(v)
        return np.column_stack([v[:, 0] + np.sign(v[:, 0]), v[:, 1]]), np.ones(len(v), bool)


class ConvexCollapse(FSpec):
    """``f(p) = p - proj_C(p)`` for a convex body ``C`` with C^1 boundary.

    Outside ``C`` this is ``t n(c)`` where ``c`` is the nearest boundary point
    and ``n`` the outward normal; inside it vanishes.  Use :meth:`ellipse` or
    :meth:`polygon` to construct.
    """

    name = "ConvexCollapse"

    def __init__(self, kind, params, body):
        self.kind = kind
        self._params = np.asarray(params, dtype=float)
        self.body = body

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), semi_axes=(1.0, 1.0), angle=0.0):
        a, b = (float(v) for v in semi_axes)
        if not (a > 0 and b > 0):
            raise ValueError("semi-axes must be positive")
        cx, cy = (float(v) for v in center)
        body = {"shape": "ellipse", "center": [cx, cy], "semi_axes": [a, b],
                "angle": float(angle)}
        return cls(codes.ELLIPSE, [cx, cy, a, b, float(angle)], body)

    @classmethod
    def polygon(cls, vertices, rounding=DEFAULT_ROUNDING):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least three 2-D vertices")
        if not rounding > 0:
            raise ValueError("rounding radius must be positive")
        e = np.roll(v, -1, axis=0) - v
        turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.all(turn < 0):
            v = v[::-1]
        elif not np.all(turn > 0):
            raise ValueError("polygon must be strictly convex")
        body = {"shape": "polygon", "vertices": v.tolist(), "rounding": float(rounding)}
        params = np.concatenate([[rounding, v.shape[0]], v[:, 0], v[:, 1]])
        return cls(codes.POLYGON, params, body)

    def params(self):
        return self._params

    def to_dict(self):
        return {"name": self.name, "body": self.body}

    def _vertices(self):
        n = int(self._params[1])
        return np.column_stack([self._params[2:2 + n], self._params[2 + n:2 + 2 * n]])

    def seam_distance(self, p):
        """Distance to ``dC`` (and, for polygons, to the corner normal rays)."""
        p, single = _points(p)
        if self.kind == codes.ELLIPSE:
            cx, cy, a, b, phi = self._params
            c, s = np.cos(phi), np.sin(phi)
            dx, dy = p[:, 0] - cx, p[:, 1] - cy
            u = (c * dx + s * dy) / a
            w = (-s * dx + c * dy) / b
            rad = np.hypot(u, w)
            gap = np.hypot(*(p - kernels.vec._project_ellipse(self._params, p)).T)
            # inside: the affine image of the unit disk gives a lower bound
            d = np.where(rad > 1.0, gap, min(a, b) * (1.0 - rad))
            return _unwrap(d, single)
        rho = self._params[0]
        gap = kernels.vec._polygon_gap(self._params, p)
        dist = np.hypot(gap[:, 0], gap[:, 1])
        v = self._vertices()
        e = np.roll(v, -1, axis=0) - v
        el = np.hypot(e[:, 0], e[:, 1])
        # inward depth for points inside the polygon
        depth = np.min(((p[:, None, 0] - v[None, :, 0]) * e[None, :, 1]
                        - (p[:, None, 1] - v[None, :, 1]) * e[None, :, 0]) / -el[None, :], axis=1)
        d = np.where(dist > 0, np.abs(dist - rho), rho + np.abs(depth))
        # outward normals of the edges adjacent to each corner
        nrm = np.column_stack([e[:, 1], -e[:, 0]]) / el[:, None]
        for k in range(v.shape[0]):
            for nk in (nrm[k], nrm[k - 1]):
                w = p - v[k]
                s = np.maximum(w @ nk, 0.0)
                ray = np.hypot(*(w - s[:, None] * nk[None, :]).T)
                d = np.minimum(d, np.where(dist > 0, ray, np.inf))
        return _unwrap(d, single)

    def preimage(self, v):
        """Support point of ``C`` with outward normal ``v/|v|``, moved out by ``|v|``."""
        v, _ = _points(v)
        r = np.hypot(v[:, 0], v[:, 1])
        n = v / np.where(r > 0, r, 1.0)[:, None]
        if self.kind == codes.ELLIPSE:
            cx, cy, a, b, phi = self._params
            c, s = np.cos(phi), np.sin(phi)
            n0 = c * n[:, 0] + s * n[:, 1]
            n1 = -s * n[:, 0] + c * n[:, 1]
            den = np.sqrt(a * a * n0 * n0 + b * b * n1 * n1)
            den = np.where(den > 0, den, 1.0)
            l0, l1 = a * a * n0 / den, b * b * n1 / den
            sup = np.column_stack([cx + c * l0 - s * l1, cy + s * l0 + c * l1])
            rho = 0.0
        else:
            vert = self._vertices()
            sup = vert[np.argmax(n @ vert.T, axis=1)]
            rho = self._params[0]
        P = sup + (r + rho)[:, None] * n
        center = np.array([self._params[0], self._params[1]]) if self.kind == codes.ELLIPSE \
            else self._vertices().mean(0)
        return np.where((r > 0)[:, None], P, center), np.ones(len(v), bool)

    def __repr__(self):
        return f"ConvexCollapse({self.body})"


def eval_f(f: FSpec, p):
    """Evaluate ``f`` at one point ``(2,)`` or many ``(N, 2)``."""
    p, single = _points(p)
    return _unwrap(kernels.eval_f(f.kind, f.params(), p), single)


# --- generator specs --------------------------------------------------------


class GeneratorSpec:
    """One entry of the built-in catalogue."""

    kind: int
    name: str
    analytic_jacobian = True

    def params(self) -> np.ndarray:
        return np.zeros(0)

    def domain(self) -> PlanarDomain:
        return PlanarDomain.full_plane()

    def boundary(self) -> list:
        return []

    def seam_distance(self, q):
        q, single = _points(q)
        return _unwrap(np.full(q.shape[0], np.inf), single)

    def to_dict(self):
        return {"name": self.name}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Constant(GeneratorSpec):
    """All fibers parallel to ``u``; requires ``u3 > 0``."""

    kind = codes.CONSTANT
    name = "Constant"

    def __init__(self, u=(0.0, 0.0, 1.0)):
        u = as_unit(u)
        if u[2] <= 0:
            raise ValueError("constant direction must point upward (u3 > 0)")
        self.u = u

    def params(self):
        return np.array([self.u[0] / self.u[2], self.u[1] / self.u[2]])

    def to_dict(self):
        return {"name": self.name, "u": self.u.tolist()}


class Hopf(GeneratorSpec):
    """``B(p) = sign * i p``."""

    kind = codes.HOPF
    name = "Hopf"

    def __init__(self, sign=1):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = int(sign)

    def params(self):
        return np.array([float(self.sign)])

    def to_dict(self):
        return {"name": self.name, "sign": self.sign}


class ExoticTan(GeneratorSpec):
    """``B(x, y) = (-y, tan x)`` on the strip ``|x| < pi/2``.

    The half-planes ``x >= pi/2`` and ``x <= -pi/2`` are filled by horizontal
    lines pointing along ``+y`` and ``-y``.  Evaluation stops ``1e-12`` short
    of the strip edge where ``tan`` is no longer meaningful.
    """

    kind = codes.EXOTIC_TAN
    name = "ExoticTan"

    def domain(self):
        return PlanarDomain.strip(-np.pi / 2, np.pi / 2)

    def boundary(self):
        return [
            BoundaryLineFamily((1.0, 0.0), np.pi / 2, (0.0, 1.0, 0.0)),
            BoundaryLineFamily((-1.0, 0.0), np.pi / 2, (0.0, -1.0, 0.0)),
        ]


class OneParam(GeneratorSpec):
    """Planes ``y = const`` each filled by parallel lines.

    The line direction in the plane ``y = c`` is ``(sin a(c), 0, cos a(c))``
    with a piecewise linear angle ``a``: either ``slope * y + offset`` or the
    linear interpolant of ``(breakpoints, angles)``, held constant outside.
    As a generator ``B(q) = (tan a(q2), 0)``, defined where ``cos a > 0``.
    """

    kind = codes.ONE_PARAM
    name = "OneParam"

    def __init__(self, slope=1.0, offset=0.0, breakpoints=None, angles=None):
        if breakpoints is None:
            self.slope = float(slope)
            self.offset = float(offset)
            self.breakpoints = None
            self.angles = None
        else:
            xs = np.asarray(breakpoints, dtype=float).ravel()
            th = np.asarray(angles, dtype=float).ravel()
            if xs.size < 2 or xs.size != th.size:
                raise ValueError("need matching breakpoints and angles, at least two")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("breakpoints must be strictly increasing")
            self.slope, self.offset = 0.0, 0.0
            self.breakpoints, self.angles = xs, th

    def params(self):
        if self.breakpoints is None:
            return np.array([self.slope, self.offset, 0.0])
        n = self.breakpoints.size
        return np.concatenate([[0.0, 0.0, float(n)], self.breakpoints, self.angles])

    def angle(self, y):
        y = np.asarray(y, dtype=float)
        th, _ = kernels.vec._theta(self.params(), y.ravel())
        return th.reshape(y.shape)

    def angle_slope(self, y):
        y = np.asarray(y, dtype=float)
        _, dth = kernels.vec._theta(self.params(), y.ravel())
        return dth.reshape(y.shape)

    def is_constant(self):
        if self.breakpoints is None:
            return self.slope == 0.0
        return bool(np.all(self.angles == self.angles[0]))

    def seam_distance(self, q):
        q, single = _points(q)
        if self.breakpoints is None:
            d = np.full(q.shape[0], np.inf)
        else:
            d = np.min(np.abs(q[:, 1:2] - self.breakpoints[None, :]), axis=1)
        return _unwrap(d, single)

    def to_dict(self):
        if self.breakpoints is None:
            return {"name": self.name, "slope": self.slope, "offset": self.offset}
        return {"name": self.name, "breakpoints": self.breakpoints.tolist(),
                "angles": self.angles.tolist()}


class Composed(GeneratorSpec):
    """``B = i f`` for one of the :class:`FSpec` maps."""

    name = "Composed"

    def __init__(self, f: FSpec):
        if not isinstance(f, FSpec):
            raise TypeError("Composed needs an FSpec")
        self.f = f
        self.kind = f.kind
        self.analytic_jacobian = f.kind != codes.ELLIPSE

    def params(self):
        return self.f.params()

    def seam_distance(self, q):
        return self.f.seam_distance(q)

    def to_dict(self):
        return {"name": self.name, "f": self.f.to_dict()}


class Identity(GeneratorSpec):
    """``B(p) = p``.  Not a fibration: every pair of fibers meets.  For negative tests."""

    kind = codes.IDENTITY
    name = "Identity"


# --- generator map ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneratorMap:
    spec: GeneratorSpec
    domain: PlanarDomain = None
    boundary: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", self.spec.domain())
        if not self.boundary:
            object.__setattr__(self, "boundary", tuple(self.spec.boundary()))
        if self.domain != self.spec.domain():
            raise ValueError(f"{self.spec.name} requires domain {self.spec.domain()}")

    @property
    def kind(self):
        return self.spec.kind

    @property
    def params(self):
        return self.spec.params()

    @property
    def name(self):
        return self.spec.name

    def in_domain(self, q):
        """Strict-interior membership used by every evaluation."""
        q, single = _points(q)
        return _unwrap(kernels.in_domain(self.kind, self.params, q), single)

    def seam_distance(self, q):
        return self.spec.seam_distance(q)

    def to_dict(self):
        return self.spec.to_dict()


def as_generator(g) -> GeneratorMap:
    return g if isinstance(g, GeneratorMap) else GeneratorMap(g)


def _checked(gen, q):
    q, single = _points(q)
    if not np.all(np.isfinite(q)):
        raise ValueError("non-finite base point")
    ok = kernels.in_domain(gen.kind, gen.params, q)
    if not np.all(ok):
        bad = q[np.flatnonzero(~ok)[0]]
        raise OutsideDomain(f"{gen.name}: base point {bad.tolist()} is outside the domain")
    return q, single


def eval_B(gen, q):
    """``B(q)`` for one point or an ``(N, 2)`` array; raises OutsideDomain."""
    gen = as_generator(gen)
    q, single = _checked(gen, q)
    return _unwrap(kernels.eval_B(gen.kind, gen.params, q), single)


def skew_defect(gen, p, q):
    """``det[p - q, B(p) - B(q)]``; nonzero means the two fibers are skew."""
    gen = as_generator(gen)
    p, single = _checked(gen, p)
    q, _ = _checked(gen, q)
    dq = p - q
    dB = kernels.eval_B(gen.kind, gen.params, p) - kernels.eval_B(gen.kind, gen.params, q)
    det = dq[:, 0] * dB[:, 1] - dq[:, 1] * dB[:, 0]
    return _unwrap(det, single)


def intersection_multiplier(gen, p, q):
    """The ``lam`` with ``p - q = lam (B(p) - B(q))``, or None if there is none.

    The fibers over ``p`` and ``q`` then meet at height ``-lam``.  Parallel
    fibers (``B(p) = B(q)``) never meet.
    """
    gen = as_generator(gen)
    p = as_vec(p, 2)
    q = as_vec(q, 2)
    if np.array_equal(p, q):
        raise ValueError("p and q must be distinct")
    Bp, Bq = (kernels.eval_B(gen.kind, gen.params, _checked(gen, v)[0])[0] for v in (p, q))
    dq = p - q
    dB = Bp - Bq
    nb = np.hypot(*dB)
    scale = 1.0 + np.hypot(*Bp) + np.hypot(*Bq)
    if nb <= COLLINEAR_TOL * scale:
        return None
    det = dq[0] * dB[1] - dq[1] * dB[0]
    if abs(det) > COLLINEAR_TOL * np.hypot(*dq) * nb:
        return None
    return float(np.dot(dq, dB) / (nb * nb))


def fibers_intersect(gen, p, q) -> bool:
    """True iff the fibers over distinct ``p`` and ``q`` meet."""
    return intersection_multiplier(gen, p, q) is not None


def fibers_intersect_many(gen, P, Q):
    """Vectorised :func:`fibers_intersect` over row pairs."""
    gen = as_generator(gen)
    P, _ = _checked(gen, P)
    Q, _ = _checked(gen, Q)
    Bp = kernels.eval_B(gen.kind, gen.params, P)
    Bq = kernels.eval_B(gen.kind, gen.params, Q)
    dq = P - Q
    dB = Bp - Bq
    nb = np.hypot(dB[:, 0], dB[:, 1])
    scale = 1.0 + np.hypot(Bp[:, 0], Bp[:, 1]) + np.hypot(Bq[:, 0], Bq[:, 1])
    det = dq[:, 0] * dB[:, 1] - dq[:, 1] * dB[:, 0]
    moving = nb > COLLINEAR_TOL * scale
    return moving & (np.abs(det) <= COLLINEAR_TOL * np.hypot(dq[:, 0], dq[:, 1]) * nb)


F_CATALOGUE = {
    "DiskCollapse": DiskCollapse,
    "SmoothDiskCollapse": SmoothDiskCollapse,
    "HalfHalf": HalfHalf,
    "FatHelicoid": FatHelicoid,
}


def composed(name: str, **kwargs) -> Composed:
    """Shortcut: ``composed("DiskCollapse")`` or ``composed("ConvexCollapse", body=...)``."""
    if name in F_CATALOGUE:
        return Composed(F_CATALOGUE[name]())
    if name == "ConvexCollapse":
        body = dict(kwargs["body"])
        shape = body.pop("shape")
        if shape == "ellipse":
            return Composed(ConvexCollapse.ellipse(**body))
        if shape == "polygon":
            return Composed(ConvexCollapse.polygon(**body))
        raise ValueError(f"unknown convex body shape {shape!r}")
    raise ValueError(f"unknown f map {name!r}")


__all__ = [
    "PlanarDomain", "DomainKind", "BoundaryLineFamily", "FSpec", "DiskCollapse",
    "SmoothDiskCollapse", "ConvexCollapse", "HalfHalf", "FatHelicoid",
    "GeneratorSpec", "Constant", "Hopf", "ExoticTan", "OneParam", "Composed", "Identity",
    "GeneratorMap", "as_generator", "eval_B", "eval_f", "skew_defect",
    "fibers_intersect", "fibers_intersect_many", "intersection_multiplier", "composed",
]
