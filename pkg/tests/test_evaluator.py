import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linefib.errors import CapExceeded, OnBoundaryFiber, OutsideDomain
from linefib.evaluator import (
    FibrationModel, SolverSettings, base_point_at, base_points, fiber_slopes,
    fiber_through_base, field_at, field_at_many, field_valid, inversion_residual,
    scale_homotopy,
)
from linefib.generators import (
    Composed, Constant, ConvexCollapse, DiskCollapse, ExoticTan, FatHelicoid, HalfHalf, Hopf,
    OneParam, SmoothDiskCollapse, eval_B,
)
from linefib.kernels import codes

HOPF = FibrationModel(Hopf())
EXOTIC = FibrationModel(ExoticTan())

MODELS = {
    "hopf": HOPF,
    "hopf_minus": FibrationModel(Hopf(-1)),
    "exotic": EXOTIC,
    "disk": FibrationModel(Composed(DiskCollapse())),
    "smooth_disk": FibrationModel(Composed(SmoothDiskCollapse())),
    "ellipse": FibrationModel(Composed(ConvexCollapse.ellipse((0.3, 0), (1.5, 0.5), 0.3))),
    "polygon": FibrationModel(Composed(ConvexCollapse.polygon([[0, 0], [2, 0], [1, 1.5]]))),
    "half_half": FibrationModel(Composed(HalfHalf())),
    "fat_helicoid": FibrationModel(Composed(FatHelicoid())),
    "constant": FibrationModel(Constant((0.3, -0.2, np.sqrt(1 - 0.13)))),
    "one_param": FibrationModel(OneParam(0.4)),
}


def test_fiber_through_base_examples():
    l = fiber_through_base(HOPF, [0, 0])
    np.testing.assert_array_equal(l.base, [0, 0, 0])
    np.testing.assert_array_equal(l.dir, [0, 0, 1])
    np.testing.assert_array_equal(fiber_through_base(EXOTIC, [0, 0]).dir, [0, 0, 1])
    np.testing.assert_allclose(fiber_through_base(HOPF, [1, 0]).dir,
                               np.array([0, 1, 1]) / np.sqrt(2), atol=1e-16)
    with pytest.raises(OutsideDomain):
        fiber_through_base(EXOTIC, [2, 0])


@pytest.mark.parametrize("name", sorted(MODELS))
def test_height_zero_is_identity(name):
    m = MODELS[name]
    for x in ([0.3, -0.7, 0.0], [1.2, 0.4, 0.0]):
        np.testing.assert_array_equal(base_point_at(m, x), x[:2])


def test_hopf_inversion_closed_form():
    assert np.array_equal(base_point_at(HOPF, [1, 0, 1]), [0.5, -0.5]) or \
        np.allclose(base_point_at(HOPF, [1, 0, 1]), [0.5, -0.5], atol=1e-15)
    rng = np.random.default_rng(0)
    X = rng.uniform(-10, 10, (500, 3))
    Q, st = base_points(HOPF, X)
    assert np.all(st == codes.OK)
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    want = np.array([np.linalg.solve(np.eye(2) + x[2] * J, x[:2]) for x in X])
    np.testing.assert_allclose(Q, want, atol=1e-11)


def test_hopf_field_examples():
    np.testing.assert_array_equal(field_at(HOPF, [0, 0, 5]), [0, 0, 1])
    np.testing.assert_allclose(field_at(HOPF, [1, 0, 1]),
                               np.array([0.5, 0.5, 1]) / np.linalg.norm([0.5, 0.5, 1]),
                               atol=1e-15)


def test_exotic_boundary_and_gap():
    np.testing.assert_array_equal(field_at(EXOTIC, [4, 7, 0]), [0, 1, 0])
    np.testing.assert_array_equal(field_at(EXOTIC, [-np.pi / 2, 7, 0]), [0, -1, 0])
    with pytest.raises(OnBoundaryFiber):
        base_point_at(EXOTIC, [4, 7, 0])
    # the 1e-12 sliver next to the strip edge is not evaluable
    with pytest.raises(OutsideDomain):
        field_at(EXOTIC, [np.pi / 2 - 5e-13, 0, 0])
    with pytest.raises(OutsideDomain):
        field_at(EXOTIC, [np.pi / 2 - 5e-13, 0, 0], method="newton")


def test_exotic_scalar_equation():
    rng = np.random.default_rng(1)
    X = rng.uniform(-10, 10, (2000, 3))
    X = X[np.abs(X[:, 2]) > 1e-3]
    Q, st = base_points(EXOTIC, X)
    assert np.all(st == codes.OK)
    x, y, t = X.T
    lhs = Q[:, 0] + t ** 2 * np.tan(Q[:, 0])
    np.testing.assert_allclose(lhs, x + t * y, atol=1e-9 * (1 + np.abs(x + t * y)).max())
    # second coordinate from either linear equation
    np.testing.assert_allclose(Q[:, 1], y - t * np.tan(Q[:, 0]), atol=1e-9)
    np.testing.assert_allclose(Q[:, 1], (Q[:, 0] - x) / t, atol=1e-6)


def test_exotic_newton_matches_scalar_solve():
    rng = np.random.default_rng(2)
    X = rng.uniform(-10, 10, (3000, 3))
    a, sa = base_points(EXOTIC, X, method="auto")
    b, sb = base_points(EXOTIC, X, method="newton")
    both = (sa == codes.OK) & (sb == codes.OK)
    assert both.mean() > 0.98
    np.testing.assert_allclose(a[both], b[both], atol=1e-9)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_inversion_round_trip(name):
    m = MODELS[name]
    rng = np.random.default_rng(3)
    Q = rng.uniform(-3, 3, (400, 2))
    if name == "exotic":
        Q[:, 0] = rng.uniform(-1.5, 1.5, 400)
    if name == "one_param":
        Q[:, 1] = rng.uniform(-3.5, 3.5, 400)
    t = rng.uniform(-10, 10, 400)
    X = np.column_stack([Q + t[:, None] * m.B(Q), t])
    got, st = base_points(m, X)
    assert np.all(st == codes.OK)
    np.testing.assert_allclose(got, Q, atol=1e-8)
    assert np.max(inversion_residual(m, X, got)) < 1e-10


@pytest.mark.parametrize("name", sorted(MODELS))
def test_field_constant_along_fibers(name):
    m = MODELS[name]
    rng = np.random.default_rng(4)
    X = rng.uniform(-5, 5, (1000, 3))
    s = rng.uniform(-5, 5, 1000)
    V, st = field_at_many(m, X)
    ok = field_valid(st)
    assert ok.mean() == 1.0
    W, st2 = field_at_many(m, X + s[:, None] * V)
    assert field_valid(st2).all()
    assert np.max(np.linalg.norm(W - V, axis=1)) <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize("name", ["hopf", "exotic", "disk", "half_half", "polygon"])
def test_surjective_on_planes(name):
    m = MODELS[name]
    g = np.linspace(-6, 6, 41)
    for t in (-3.0, 0.0, 0.5, 7.0):
        X = np.column_stack([np.repeat(g, g.size), np.tile(g, g.size), np.full(g.size ** 2, t)])
        Q, st = base_points(m, X)
        ok = st == codes.OK
        assert np.all(ok | (st == codes.BOUNDARY))
        assert np.max(inversion_residual(m, X[ok], Q[ok])) <= 1e-8


def test_field_is_fiber_direction():
    rng = np.random.default_rng(5)
    Q = rng.uniform(-2, 2, (50, 2))
    for m in (HOPF, MODELS["disk"], MODELS["ellipse"]):
        for q in Q:
            l = fiber_through_base(m, q)
            np.testing.assert_allclose(field_at(m, l.point(2.5)), l.dir, atol=1e-10)


def test_one_param_closed_form():
    m = MODELS["one_param"]
    V = field_at(m, [3, 2, -1])
    np.testing.assert_allclose(V, [np.sin(0.8), 0, np.cos(0.8)], atol=1e-16)
    # horizontal and downward fibers exist although they are not graphs over z = 0
    np.testing.assert_allclose(field_at(m, [0, np.pi / 0.4 / 2, 0]), [1, 0, 0], atol=1e-15)
    with pytest.raises(OutsideDomain):
        base_point_at(m, [0, np.pi / 0.4 / 2, 1.0])


def test_cap():
    with pytest.raises(CapExceeded):
        field_at(HOPF, [1e6, 1e3, 0])
    field_at(HOPF, [1e6, 0, 0])


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(newton_tol=1e-5)
    with pytest.raises(ValueError):
        SolverSettings(max_newton_iters=0)


# --- scale homotopy ---------------------------------------------------------------

def test_homotopy_endpoints_examples():
    X = np.random.default_rng(6).uniform(-10, 10, (1000, 3))
    for m in (HOPF, EXOTIC, MODELS["disk"], MODELS["one_param"]):
        V0, _ = field_at_many(m, X)
        Vs, _ = field_at_many(scale_homotopy(m, 0.0), X)
        np.testing.assert_array_equal(Vs, V0)
        V1, st = field_at_many(scale_homotopy(m, 1.0), X)
        assert field_valid(st).all()
        np.testing.assert_array_equal(V1, np.tile(field_at(m, [0, 0, 0]), (1000, 1)))
    np.testing.assert_allclose(field_at(scale_homotopy(HOPF, 0.5), [2, 0, 2]),
                               field_at(HOPF, [1, 0, 1]), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.tuples(*[st.floats(-8, 8)] * 3))
def test_homotopy_is_rescaling(s, x):
    x = np.array(x)
    for m in (HOPF, MODELS["fat_helicoid"]):
        np.testing.assert_allclose(field_at(scale_homotopy(m, s), x),
                                   field_at(m, (1 - s) * x), atol=1e-12)


def test_homotopy_composes():
    m = scale_homotopy(scale_homotopy(HOPF, 0.5), 0.5)
    assert m.scale == 0.25
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(field_at(m, x), field_at(HOPF, 0.25 * x), atol=1e-15)


def test_scaled_base_point_is_consistent():
    m = scale_homotopy(HOPF, 0.5)
    q = base_point_at(m, [2, 0, 2])
    np.testing.assert_allclose(q, [1, -1], atol=1e-12)
    np.testing.assert_allclose(m.B(q), eval_B(Hopf(), [0.5, -0.5]), atol=1e-15)


def test_exotic_slopes_near_strip_edge():
    z = 2.0 ** -np.arange(4, 15)
    X = np.column_stack([np.full(z.size, 4.0), np.zeros(z.size), z])
    B, st = fiber_slopes(EXOTIC, X)
    assert np.all(st == codes.OK)
    # B2 = tan q1 solves arctan(s) + z^2 s = 4 exactly up to rounding
    np.testing.assert_allclose(np.arctan(B[:, 1]) + z ** 2 * B[:, 1], 4.0, rtol=1e-14)
