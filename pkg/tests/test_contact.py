import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linefib.contact import (
    CANONICAL_RANK_ONE, EIGEN_TOL_FD, ContactVerdict, EigenKind, Jacobian2, JacobianMethod,
    box_grid, contact_verdict, curl_dot_V, eigen_classify, field_gradient, field_gradient_fd,
    frame_jacobian, frame_jacobians, jacobian_B, jacobians_B, quad_form, quad_form_trace,
    semidegeneracy_scan,
)
from linefib.errors import NearSeam, OutsideDomain
from linefib.evaluator import FibrationModel, base_points, scale_homotopy
from linefib.generators import (
    Composed, Constant, ConvexCollapse, DiskCollapse, ExoticTan, FatHelicoid, HalfHalf, Hopf,
    Identity, OneParam, SmoothDiskCollapse,
)
from linefib.kernels import codes

HOPF = FibrationModel(Hopf())
EXOTIC = FibrationModel(ExoticTan())
CONST = FibrationModel(Constant((0.3, -0.2, np.sqrt(1 - 0.13))))
DISK = FibrationModel(Composed(DiskCollapse()))
ONE = FibrationModel(OneParam(1.0))

BUILT_INS = {
    "hopf": HOPF, "hopf_minus": FibrationModel(Hopf(-1)), "exotic": EXOTIC, "constant": CONST,
    "disk": DISK, "smooth_disk": FibrationModel(Composed(SmoothDiskCollapse())),
    "half_half": FibrationModel(Composed(HalfHalf())),
    "fat_helicoid": FibrationModel(Composed(FatHelicoid())),
    "ellipse": FibrationModel(Composed(ConvexCollapse.ellipse((0.3, 0), (1.5, 0.5), 0.3))),
    "polygon": FibrationModel(Composed(ConvexCollapse.polygon([[0, 0], [2, 0], [1, 1.5]]))),
    "one_param": ONE, "one_param_slow": FibrationModel(OneParam(0.3, 0.2)),
    "breakpoints": FibrationModel(OneParam(breakpoints=[-1, 1], angles=[0, np.pi])),
}


def _base_sample(m, n, seed):
    rng = np.random.default_rng(seed)
    Q = rng.uniform(-3, 3, (n, 2))
    if isinstance(m.spec, ExoticTan):
        Q[:, 0] = rng.uniform(-1.5, 1.5, n)
    Q = Q[np.asarray(m.in_domain(Q)).reshape(-1)]
    h = 1e-5 * (1 + np.hypot(*Q.T))
    return Q[np.asarray(m.seam_distance(Q)).reshape(-1) > 20 * h]


# --- generator Jacobians ----------------------------------------------------------------

def test_jacobian_examples():
    J = jacobian_B(HOPF, [0.4, -1.3])
    assert J.method == JacobianMethod.ANALYTIC
    np.testing.assert_array_equal(J.matrix, [[0, -1], [1, 0]])
    for x in (0.0, 0.7, -1.4):
        J = jacobian_B(EXOTIC, [x, 2.0])
        np.testing.assert_allclose(J.matrix, [[0, -1], [1 / np.cos(x) ** 2, 0]], rtol=1e-15)
        F = jacobian_B(EXOTIC, [x, 2.0], method="fd")
        assert F.method == JacobianMethod.CENTRAL_DIFFERENCE and F.h > 0
        np.testing.assert_allclose(F.matrix, J.matrix, atol=1e-6)
    np.testing.assert_array_equal(jacobian_B(CONST, [1.0, 2.0]).matrix, np.zeros((2, 2)))


def test_jacobian_errors():
    with pytest.raises(OutsideDomain):
        jacobian_B(EXOTIC, [2.0, 0.0])
    with pytest.raises(NearSeam):
        jacobian_B(DISK, [1.0, 0.0])
    with pytest.raises(NearSeam):
        jacobian_B(DISK, [0.0, 1.0 + 5e-5])
    jacobian_B(DISK, [0.0, 1.01])
    with pytest.raises(ValueError):
        jacobian_B(BUILT_INS["ellipse"], [3.0, 0.0], method="analytic")
    with pytest.raises(ValueError):
        Jacobian2(np.nan, 0, 0, 0)
    with pytest.raises(ValueError):
        Jacobian2(0, 0, 0, 0, JacobianMethod.CENTRAL_DIFFERENCE)


@pytest.mark.parametrize("name", ["hopf", "exotic"])
def test_analytic_matches_differences(name):
    m = BUILT_INS[name]
    Q = _base_sample(m, 1000, 0)
    A, oka, *_ = jacobians_B(m, Q, "analytic")
    F, okf, *_ = jacobians_B(m, Q, "fd")
    ok = oka & okf
    assert ok.mean() > 0.99
    np.testing.assert_allclose(F[ok], A[ok], atol=1e-6)


@pytest.mark.parametrize("name", sorted(BUILT_INS))
def test_no_real_nonzero_eigenvalues(name):
    m = BUILT_INS[name]
    Q = _base_sample(m, 1000, 1)
    if m.is_one_param:
        Q = Q[np.abs(np.cos(m.spec.angle(Q[:, 1]))) > 1e-3]
    J, ok, meth, _ = jacobians_B(m, Q)
    tol = 1e-6 if meth == JacobianMethod.ANALYTIC else EIGEN_TOL_FD
    kinds = {eigen_classify(j, tol).kind for j in J[ok]}
    assert EigenKind.VIOLATION not in kinds


# --- eigenvalues and the quadratic form --------------------------------------------------

def test_eigen_examples():
    c = eigen_classify([[0, -1], [1, 0]])
    assert c.kind == EigenKind.COMPLEX_PAIR
    np.testing.assert_allclose(sorted(z.imag for z in c.eigenvalues), [-1, 1])
    assert eigen_classify([[0, 3.0], [0, 0]]).kind == EigenKind.DOUBLE_ZERO
    v = eigen_classify([[1, 0], [0, 1]])
    assert v.kind == EigenKind.VIOLATION and v.violating_value == 1.0
    assert eigen_classify(np.zeros((2, 2))).kind == EigenKind.DOUBLE_ZERO
    assert eigen_classify(Jacobian2(0, -1, 1, 0)).to_dict()["kind"] == "ComplexPair"


def test_quad_form_trace_examples():
    for a, b in [(1.0, 2.0), (-0.5, 0.25), (3.0, -1.0)]:
        assert quad_form_trace(CANONICAL_RANK_ONE["general"](a, b)) == (a * a + b * b) / b
        assert quad_form_trace(CANONICAL_RANK_ONE["upper"](a, b)) == -b
        assert quad_form_trace(CANONICAL_RANK_ONE["lower"](a, b)) == b
    assert quad_form_trace([[0, -1], [1, 0]]) == 2.0


entries = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200)
@given(entries, entries, entries, entries, entries, entries)
def test_quad_form_expansion(a, b, c, d, h1, h2):
    J = np.array([[a, b], [c, d]])
    direct = c * h1 ** 2 + (d - a) * h1 * h2 - b * h2 ** 2
    scale = 1 + np.abs(J).max() * (h1 * h1 + h2 * h2)
    assert abs(quad_form(J, [h1, h2]) - direct) <= 1e-12 * scale
    tr = quad_form(J, [1, 0]) + quad_form(J, [0, 1])
    assert abs(tr - quad_form_trace(J)) <= 1e-12 * (1 + np.abs(J).max())


@settings(max_examples=100)
@given(st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_canonical_forms_are_nilpotent(a, b):
    for M in (f(a, b) for f in CANONICAL_RANK_ONE.values()):
        assert np.linalg.matrix_rank(M) == 1
        assert abs(np.trace(M)) <= 1e-12 * (1 + abs(a) + abs(b))
        assert quad_form_trace(M) != 0.0


def test_trace_is_rotation_invariant():
    # the trace of Q does not depend on the oriented orthonormal frame
    rng = np.random.default_rng(2)
    for _ in range(50):
        J = rng.normal(size=(2, 2))
        a = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        assert quad_form_trace(R.T @ J @ R) == pytest.approx(quad_form_trace(J), abs=1e-13)


# --- curl -------------------------------------------------------------------------------

def test_curl_examples():
    rng = np.random.default_rng(3)
    for x in rng.uniform(-5, 5, (20, 3)):
        assert curl_dot_V(CONST, x) == 0.0
    assert curl_dot_V(HOPF, [0, 0, 0]) == pytest.approx(2.0, abs=1e-8)
    for w in (1.0, 0.3, -2.0):
        m = FibrationModel(OneParam(w))
        # (sin wy, 0, cos wy) has curl (-w sin wy, 0, -w cos wy)
        for x in rng.uniform(-5, 5, (5, 3)):
            assert curl_dot_V(m, x) == pytest.approx(-w, abs=1e-8)


def test_frame_jacobian_at_vertical_fiber():
    # where the fiber is vertical the re-based Jacobian is the generator Jacobian
    J = frame_jacobian(HOPF, [0, 0, 0])
    np.testing.assert_allclose(J.matrix, [[0, -1], [1, 0]], atol=1e-15)
    assert quad_form_trace(J) == pytest.approx(2.0)


@pytest.mark.parametrize("name", sorted(BUILT_INS))
def test_trace_matches_curl(name):
    m = BUILT_INS[name]
    rng = np.random.default_rng(4)
    X = rng.uniform(-5, 5, (400, 3))
    G, V, q, status = field_gradient(m, X)
    ok = status == codes.OK
    if not m.is_one_param:
        ok[ok] &= np.asarray(m.seam_distance(q[ok])).reshape(-1) > 1e-2
    else:
        ok &= np.asarray(m.seam_distance(X[:, :2])).reshape(-1) > 1e-2
    X, G, V = X[ok][:200], G[ok][:200], V[ok][:200]
    assert len(X) >= 100
    tr = np.array([quad_form_trace(J) for J in frame_jacobians(G, V)])
    curl = np.array([curl_dot_V(m, x) for x in X])
    assert np.all(np.abs(tr - curl) <= np.maximum(1e-4, 1e-2 * np.abs(tr)))


def test_gradient_routes_agree():
    rng = np.random.default_rng(5)
    X = rng.uniform(-4, 4, (300, 3))
    for m in (HOPF, EXOTIC, ONE):
        G, V, _, status = field_gradient(m, X)
        F, ok = field_gradient_fd(m, X)
        ok &= status == codes.OK
        np.testing.assert_allclose(F[ok], G[ok], atol=1e-7)


def test_curl_under_rescaling():
    # V_c(x) = V(c x) has curl V_c . V_c = c (curl V . V)(c x)
    m = scale_homotopy(HOPF, 0.5)
    for x in ([1.0, 2.0, -1.0], [0.3, -0.4, 2.0]):
        x = np.array(x)
        assert curl_dot_V(m, x) == pytest.approx(0.5 * curl_dot_V(HOPF, 0.5 * x), rel=1e-7)


# --- scans ------------------------------------------------------------------------------

def test_semidegeneracy_examples():
    s = semidegeneracy_scan(HOPF)
    assert (s["min_rank"], s["max_rank"]) == (2, 2) and s["scanned"] == 21 ** 3
    s = semidegeneracy_scan(CONST)
    assert (s["min_rank"], s["max_rank"]) == (0, 0)
    s = semidegeneracy_scan(ONE)
    assert (s["min_rank"], s["max_rank"]) == (1, 1)


def test_hopf_contact_tight():
    r = contact_verdict(HOPF, (-5, 5, 0.5))
    assert r.verdict == ContactVerdict.CONTACT_TIGHT and r.tight
    s = r.scanned
    assert s.all() and np.all(r.rank[s] == 2)
    # sign coherence of the contact form
    assert np.all(r.curl_dot_v > 0)
    assert all(e == EigenKind.COMPLEX_PAIR for e in r.eigen)
    m = contact_verdict(FibrationModel(Hopf(-1)), (-5, 5, 0.5))
    assert m.verdict == ContactVerdict.CONTACT_TIGHT and np.all(m.curl_dot_v < 0)


def test_constant_not_contact():
    r = contact_verdict(CONST)
    assert r.verdict == ContactVerdict.NOT_CONTACT
    assert np.all(np.abs(r.curl_dot_v) < 1e-8) and np.all(r.rank == 0)
    assert not r.tight


def test_one_param_contact_rank_one():
    r = contact_verdict(ONE)
    assert r.verdict == ContactVerdict.CONTACT_TIGHT
    assert np.all(r.rank == 1)
    assert all(e == EigenKind.DOUBLE_ZERO for e in r.eigen)


def test_disk_not_contact_inside_cylinder():
    r = contact_verdict(DISK)
    assert r.verdict == ContactVerdict.NOT_CONTACT
    assert r.excluded["seam"] > 0
    zero = r.scanned & (r.rank == 0)
    Q, st = base_points(DISK, r.points[zero])
    assert np.all(np.hypot(*Q.T) < 1)
    np.testing.assert_array_equal(r.curl_dot_v[zero], 0.0)
    # outside the cylinder the field is nondegenerate
    assert np.all(r.rank[r.scanned & ~zero] == 2)


def test_exotic_boundary_points_excluded():
    r = contact_verdict(EXOTIC)
    assert r.excluded["boundary_fiber"] == 14 * 21
    assert r.verdict == ContactVerdict.CONTACT_TIGHT


def test_broken_generator_flagged():
    r = contact_verdict(FibrationModel(Identity()), (-2, 2, 0.5))
    assert r.verdict == ContactVerdict.MIXED_VIOLATION
    assert "eigen_violation" in r.witnesses


def test_report_serialization():
    r = contact_verdict(HOPF, box_grid(-1, 1, 1.0))
    d = r.to_dict(records=True)
    assert d["verdict"] == "ContactTight" and d["scanned"] == 27
    assert len(d["records"]) == 27 and d["records"][0]["rank"] == 2
    assert d["tightness"] is not None
    assert contact_verdict(HOPF, {"lo": -1, "hi": 1, "step": 1.0}).to_dict() == r.to_dict()


def test_small_complex_pair_is_not_violation():
    # purely imaginary eigenvalues of size 1e-5 have discriminant -4e-10
    e = eigen_classify([[0.0, -1e-5], [1e-5, 0.0]], 1e-6)
    assert e.kind == EigenKind.DOUBLE_ZERO
    assert eigen_classify([[2e-6, 0.0], [0.0, 0.0]], 1e-6).kind == EigenKind.VIOLATION


@settings(max_examples=200)
@given(entries, entries, entries, entries)
def test_vectorised_eigen_kinds_agree(a, b, c, d):
    from linefib.contact import _KINDS, _eigen_kinds
    J = np.array([[a, b], [c, d]])
    assert _KINDS[int(_eigen_kinds(J[None], 1e-6)[0])] == eigen_classify(J, 1e-6).kind
