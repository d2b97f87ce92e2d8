import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from linefib.errors import AntipodalInput, NotInPlane
from linefib.geom import (
    AffinePlane, OrientedLine, Relation, angle_between, circle_angle, geodesic_midpoint,
    line_line_distance, orthonormal_complement, unit,
)

coord = st.floats(-50, 50, allow_nan=False)
vec3 = st.tuples(coord, coord, coord).map(np.array)
nonzero3 = vec3.filter(lambda v: np.linalg.norm(v) > 1e-3)
lines = st.builds(OrientedLine.through, vec3, nonzero3)


def brute_line_distance(l1, l2):
    """Grid search over (s, t) in [-100, 100]^2, then local refinement."""
    s = np.linspace(-100, 100, 401)
    S, T = np.meshgrid(s, s, indexing="ij")
    P = l1.base[None, None, :] + S[..., None] * l1.dir
    Q = l2.base[None, None, :] + T[..., None] * l2.dir
    d = np.linalg.norm(P - Q, axis=-1)
    i, j = np.unravel_index(np.argmin(d), d.shape)

    def sq(v):
        return np.sum((l1.point(v[0]) - l2.point(v[1])) ** 2)

    res = minimize(sq, [s[i], s[j]], method="BFGS", options={"gtol": 1e-14})
    return np.sqrt(res.fun)


def test_parallel_offset():
    z = OrientedLine((0, 0, 0), (0, 0, 1))
    l2 = OrientedLine((1, 0, 0), (0, 0, 1))
    assert line_line_distance(z, l2) == (1.0, Relation.PARALLEL)


def test_identical():
    x = OrientedLine((0, 0, 0), (1, 0, 0))
    d, rel = line_line_distance(x, OrientedLine((0, 0, 0), (1, 0, 0)))
    assert d == 0.0 and rel == Relation.IDENTICAL


def test_antiparallel_coincident_lines_are_parallel_not_identical():
    d, rel = line_line_distance(OrientedLine((0, 0, 0), (1, 0, 0)),
                                OrientedLine((3, 0, 0), (-1, 0, 0)))
    assert d == 0.0 and rel == Relation.PARALLEL


def test_skew_matches_brute_force():
    l1 = OrientedLine((0, 0, 0), (0, 0, 1))
    l2 = OrientedLine.through((1, 0, 0), (0, 1, 1))
    d, rel = line_line_distance(l1, l2)
    assert rel == Relation.SKEW
    assert d == pytest.approx(brute_line_distance(l1, l2), abs=1e-8)
    assert d == pytest.approx(1.0, abs=1e-15)


def test_intersecting():
    l1 = OrientedLine((0, 0, 0), (1, 0, 0))
    l2 = OrientedLine.through((2, -1, 0), (0, 1, 0))
    assert line_line_distance(l1, l2) == (0.0, Relation.INTERSECTING)


@settings(max_examples=30, deadline=None)
@given(lines, lines)
def test_distance_against_brute_force(l1, l2):
    d, rel = line_line_distance(l1, l2)
    if rel == Relation.SKEW:
        # the grid window only sees closest points with |s|, |t| <= 100
        w = l1.base - l2.base
        n = np.cross(l1.dir, l2.dir)
        b = np.dot(l1.dir, l2.dir)
        s = (b * np.dot(l2.dir, w) - np.dot(l1.dir, w)) / (1 - b * b)
        t = (np.dot(l2.dir, w) - b * np.dot(l1.dir, w)) / (1 - b * b)
        if max(abs(s), abs(t)) < 95 and np.linalg.norm(n) > 1e-2:
            assert d == pytest.approx(brute_line_distance(l1, l2), abs=1e-6)


@given(lines, lines)
def test_symmetric(l1, l2):
    d12, r12 = line_line_distance(l1, l2)
    d21, r21 = line_line_distance(l2, l1)
    assert abs(d12 - d21) <= 1e-12 * (1 + d12)
    assert r12 == r21


def test_nearly_parallel_lines_meeting():
    # 1 - (d1.d2)^2 rounds to zero here although the lines are not parallel
    a = OrientedLine([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    b = OrientedLine([0.0, 0.0, 5.0], unit([0.0, 5.692709443208027e-07, 1.0]))
    for l1, l2 in ((a, b), (b, a)):
        d, r = line_line_distance(l1, l2)
        assert d == 0.0 and r == Relation.INTERSECTING
    c = OrientedLine([1e-3, 0.0, 5.0], b.dir)
    d, r = line_line_distance(a, c)
    assert r == Relation.SKEW and d == pytest.approx(1e-3, rel=1e-9)


@settings(max_examples=50)
@given(lines, lines, st.integers(0, 2**32 - 1))
def test_rigid_motion_invariance(l1, l2, seed):
    rng = np.random.default_rng(seed)
    R = Rotation.random(random_state=seed).as_matrix()
    shift = rng.uniform(-20, 20, 3)

    def move(l):
        return OrientedLine(R @ l.base + shift, unit(R @ l.dir))

    d0, _ = line_line_distance(l1, l2)
    d1, _ = line_line_distance(move(l1), move(l2))
    assert abs(d0 - d1) <= 1e-9 * (1 + np.linalg.norm(l1.base - l2.base))


def test_line_equality_tolerant():
    a = OrientedLine((0, 0, 0), (0, 0, 1))
    assert a == OrientedLine((0, 0, 7.5), (0, 0, 1))
    assert a != OrientedLine((0, 0, 0), (0, 0, -1))
    assert a != OrientedLine((1e-6, 0, 0), (0, 0, 1))


def test_unit_direction_enforced():
    with pytest.raises(ValueError):
        OrientedLine((0, 0, 0), (0, 0, 2))


@pytest.mark.parametrize("u, v, w", [
    ((1, 0, 0), (0, 1, 0), np.array([1, 1, 0]) / np.sqrt(2)),
    ((0, 0, 1), (0, 1, 0), np.array([0, 1, 1]) / np.sqrt(2)),
    ((0, 0, 1), (0, 0, 1), np.array([0, 0, 1.0])),
])
def test_midpoint_examples(u, v, w):
    np.testing.assert_allclose(geodesic_midpoint(u, v), w, atol=1e-15)


def test_midpoint_antipodal():
    with pytest.raises(AntipodalInput):
        geodesic_midpoint((0, 1, 0), (0, -1, 0))


unit3 = nonzero3.map(unit)


@given(unit3, unit3)
def test_midpoint_properties(u, v):
    if np.linalg.norm(u + v) < 1e-6:
        return
    w = geodesic_midpoint(u, v)
    assert abs(np.linalg.norm(w) - 1) < 1e-12
    assert abs(angle_between(w, u) - angle_between(w, v)) < 1e-9
    # on the minor arc: the two halves add up to the whole
    assert abs(angle_between(w, u) + angle_between(w, v) - angle_between(u, v)) < 1e-9
    np.testing.assert_allclose(w, geodesic_midpoint(v, u), atol=1e-15)


def test_circle_angle_examples():
    plane = AffinePlane((0, 0, 1))
    ref = np.array([1.0, 0, 0])
    assert circle_angle(ref, plane, ref) == 0.0
    assert circle_angle(np.cross(plane.normal, ref), plane, ref) == pytest.approx(np.pi / 2)
    assert circle_angle(-ref, plane, ref) == np.pi
    with pytest.raises(NotInPlane):
        circle_angle((0, 0, 1), plane, ref)


@given(unit3, st.integers(2, 60))
def test_circle_angle_injective(n, k):
    e1, e2 = orthonormal_complement(n)
    plane = AffinePlane(n)
    phis = np.linspace(-np.pi, np.pi, k, endpoint=False) + 0.1
    angs = [circle_angle(np.cos(p) * e1 + np.sin(p) * e2, plane, e1) for p in phis]
    assert len(set(np.round(angs, 9))) == k
    assert all(-np.pi < a <= np.pi for a in angs)


def test_orthonormal_complement_orientation():
    for v in [(0, 0, 1), (1, 0, 0), (0.3, -0.2, 0.9)]:
        e1, e2 = orthonormal_complement(v)
        np.testing.assert_allclose(np.cross(e1, e2), unit(v), atol=1e-15)


def test_plane_translates_disjoint():
    p = AffinePlane((0, 0, 1), 0.0)
    x = np.array([0.3, -2.0, 1.5])
    assert p.translate(1.5).signed_distance(x) == 0.0
    assert p.translate(1.0).signed_distance(x) != 0.0
