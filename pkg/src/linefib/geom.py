"""Vectors, oriented lines, planes and a little spherical geometry.

Points and vectors are plain float64 numpy arrays of shape ``(2,)`` or ``(3,)``.
Every predicate uses the absolute incidence tolerance ``EPS_GEO``.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AntipodalInput, LineFibError, NotInPlane

EPS_GEO = 1e-9
PARALLEL_TOL = 1e-12
UNIT_TOL = 1e-12


def as_vec(v, dim):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (dim,):
        raise ValueError(f"expected a {dim}-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite component")
    return a


def unit(v):
    """Normalise a 3-vector; refuses the zero vector."""
    a = as_vec(v, 3)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("cannot normalise the zero vector")
    out = a / n
    assert abs(np.linalg.norm(out) - 1.0) <= UNIT_TOL
    return out


def as_unit(v):
    """Accept ``v`` only if it is already unit to within ``UNIT_TOL``."""
    a = as_vec(v, 3)
    if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
        raise ValueError("not a unit vector")
    return a


class Relation(str, Enum):
    IDENTICAL = "Identical"
    PARALLEL = "Parallel"
    INTERSECTING = "Intersecting"
    SKEW = "Skew"


@dataclass(frozen=True, eq=False)
class OrientedLine:
    base: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_vec(self.base, 3))
        object.__setattr__(self, "dir", as_unit(self.dir))

    @classmethod
    def through(cls, base, direction):
        return cls(base, unit(direction))

    def point(self, s):
        return self.base + s * self.dir

    def __eq__(self, other):
        if not isinstance(other, OrientedLine):
            return NotImplemented
        if np.linalg.norm(self.dir - other.dir) > EPS_GEO:
            return False
        w = other.base - self.base
        return np.linalg.norm(w - np.dot(w, self.dir) * self.dir) <= EPS_GEO

    def __hash__(self):  # pragma: no cover - tolerance equality is not hashable
        raise TypeError("OrientedLine is not hashable")

    def __repr__(self):
        return f"OrientedLine(base={self.base.tolist()}, dir={self.dir.tolist()})"


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """The plane ``{x : <x, normal> = offset}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "normal", as_unit(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def spanned_by(cls, a, b, offset=0.0):
        return cls(unit(np.cross(as_vec(a, 3), as_vec(b, 3))), offset)

    def translate(self, t):
        """The parallel translate at signed distance ``t`` from the origin."""
        return AffinePlane(self.normal, t)

    def signed_distance(self, x):
        return float(np.dot(as_vec(x, 3), self.normal) - self.offset)

    def contains_direction(self, v, tol=EPS_GEO):
        return abs(float(np.dot(as_vec(v, 3), self.normal))) <= tol


def line_line_distance(l1, l2, tol=EPS_GEO):
    """Distance between two oriented lines and their relative position.

    The closest parameters solve the normal equations of
    ``|b1 + s d1 - b2 - t d2|^2`` in cross-product form. The distance itself
    is the projection on the common normal, which keeps tiny distances
    accurate.
    Parallel lines (``|d1 x d2| < 1e-12``) fall back to point-line distance.
    """
    d1, d2 = l1.dir, l2.dir
    w = l1.base - l2.base
    n = np.cross(d1, d2)
    nn = np.linalg.norm(n)
    if nn < PARALLEL_TOL:
        perp = w - np.dot(w, d2) * d2
        dist = float(np.linalg.norm(perp))
        rel = Relation.IDENTICAL if dist <= tol and np.dot(d1, d2) > 0 else Relation.PARALLEL
        return dist, rel
    # cross-product form of the normal equations; 1 - (d1.d2)^2 cancels for
    # nearly parallel lines
    den = nn * nn
    s = -float(np.dot(np.cross(w, d2), n)) / den
    t = -float(np.dot(np.cross(w, d1), n)) / den
    gap = w + s * d1 - t * d2
    dist = abs(float(np.dot(w, n))) / nn
    # the two evaluations must agree; the projection is the accurate one and
    # the gap loses about eps * (|s| + |t|)
    slack = 1e-6 * (1.0 + np.linalg.norm(w)) + 64 * np.finfo(float).eps * (abs(s) + abs(t))
    assert abs(dist - np.linalg.norm(gap)) <= slack
    rel = Relation.INTERSECTING if dist <= tol else Relation.SKEW
    return dist, rel


def geodesic_midpoint(u, v):
    """Midpoint of the minor great-circle arc from ``u`` to ``v``."""
    u = as_unit(u)
    v = as_unit(v)
    s = u + v
    ns = np.linalg.norm(s)
    if ns < 1e-9:
        raise AntipodalInput("antipodal directions have no unique midpoint")
    return s / ns


def circle_angle(v, plane, ref_dir):
    """Angle of ``v`` on the great circle ``plane ∩ S^2``.

    Measured from ``ref_dir``, counterclockwise about ``plane.normal``
    (right-hand rule); the result lies in ``(-pi, pi]``.
    """
    v = as_vec(v, 3)
    ref = as_unit(ref_dir)
    n = plane.normal
    if abs(np.dot(v, n)) > 1e-9:
        raise NotInPlane("vector is not parallel to the plane")
    if abs(np.dot(ref, n)) > 1e-9:
        raise NotInPlane("reference direction is not parallel to the plane")
    ang = float(np.arctan2(np.dot(np.cross(n, ref), v), np.dot(ref, v)))
    if ang <= -np.pi:
        ang = np.pi
    return ang


def angle_between(u, v):
    """Unsigned angle between two nonzero 3-vectors, robust near 0 and pi."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1), np.sum(u * v, axis=-1)))


def orthonormal_complement(v):
    """Return ``(e1, e2)`` spanning ``v^perp`` with ``e1 x e2 = v``."""
    v = unit(v)
    helper = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = unit(np.cross(helper, v))
    e2 = np.cross(v, e1)
    return e1, e2


def rotate_quarter(p, sign=1):
    """Multiply planar vector(s) by ``sign * i``."""
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    out[..., 0] = -sign * p[..., 1]
    out[..., 1] = sign * p[..., 0]
    return out


__all__ = [
    "EPS_GEO", "LineFibError", "OrientedLine", "AffinePlane", "Relation",
    "line_line_distance", "geodesic_midpoint", "circle_angle", "angle_between",
    "orthonormal_complement", "rotate_quarter", "unit", "as_unit", "as_vec",
]
