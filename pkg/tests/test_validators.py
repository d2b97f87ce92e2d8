import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linefib.errors import CanyonFound, EmptyEstimate, MidpointNotRealized, ViolationFound
from linefib.evaluator import FibrationModel, fiber_slopes, scale_homotopy
from linefib.generators import (
    Composed, Constant, ConvexCollapse, DiskCollapse, ExoticTan, FatHelicoid, HalfHalf, Hopf,
    Identity, OneParam, SmoothDiskCollapse,
)
from linefib.validators import (
    BaseSpaceEstimate, CheckReport, Compactness, ContinuityVerdict, Convexity, GaussSampleSet,
    GridSpec, PushoffCurve, StructureKind, SupportClass, check_gauss_convexity,
    check_monotone_pushoff, check_skew_criterion, classify_structure, classify_support_line, detect_antipodal,
    direction_realized, estimate_S_u, hausdorff_distance, oracle_disjointness,
    probe_continuity_at_infinity, properness_sequences, pushoff_gamma, run_structure_suite,
    sample_gauss_image,
)

U_CONST = (0.3, -0.2, np.sqrt(1 - 0.13))
HOPF = FibrationModel(Hopf())
EXOTIC = FibrationModel(ExoticTan())
DISK = FibrationModel(Composed(DiskCollapse()))
HELICOID = FibrationModel(Composed(FatHelicoid()))
HALF = FibrationModel(Composed(HalfHalf()))
ONE = FibrationModel(OneParam(1.0))
CONST = FibrationModel(Constant(U_CONST))
ELLIPSE = FibrationModel(Composed(ConvexCollapse.ellipse((0.3, 0), (1.5, 0.5), 0.3)))
POLYGON = FibrationModel(Composed(ConvexCollapse.polygon([[0, 0], [2, 0], [1, 1.5]])))
SMOOTH = FibrationModel(Composed(SmoothDiskCollapse()))
BREAKS = FibrationModel(OneParam(breakpoints=[-1, 1], angles=[0, np.pi]))
BROKEN = FibrationModel(Identity())

BUILT_INS = {
    "hopf": HOPF, "hopf_minus": FibrationModel(Hopf(-1)), "exotic": EXOTIC, "disk": DISK,
    "fat_helicoid": HELICOID, "half_half": HALF, "one_param": ONE, "constant": CONST,
    "ellipse": ELLIPSE, "polygon": POLYGON, "smooth_disk": SMOOTH, "breakpoints": BREAKS,
}
SMALL_GRID = GridSpec(fine_max=401)


# --- construction criterion and line oracle ------------------------------------------

def test_skew_criterion_examples():
    r = check_skew_criterion(HOPF, 10_000)
    assert r.passed and r.summary["pairs"] == 10_000
    assert r.summary["zero_defect_pairs"] == 0
    assert check_skew_criterion(EXOTIC, 10_000).passed
    bad = check_skew_criterion(BROKEN, 1000)
    assert not bad.passed and bad.witness is not None
    with pytest.raises(ViolationFound) as exc:
        bad.check()
    assert exc.value.witness is bad.witness


def test_oracle_examples():
    r = oracle_disjointness(HOPF, 500)
    assert r.passed
    rel = r.summary["relations"]
    assert rel.get("Skew", 0) == 500 * 499 // 2
    c = oracle_disjointness(CONST, 500).summary["relations"]
    assert c.get("Parallel", 0) == 500 * 499 // 2
    e = oracle_disjointness(EXOTIC, 500)
    assert e.passed
    assert e.summary["relations"].get("Skew", 0) > 0
    assert e.summary["relations"].get("Parallel", 0) > 0
    assert not oracle_disjointness(BROKEN, 200).passed


@pytest.mark.parametrize("name", sorted(BUILT_INS) + ["broken"])
def test_skew_criterion_agrees_with_oracle(name):
    m = BUILT_INS.get(name, BROKEN)
    a = check_skew_criterion(m, 2000, seed=3)
    b = oracle_disjointness(m, 200, seed=3)
    assert a.passed == b.passed
    assert a.passed == (name != "broken")


def test_properness_sequences_escape():
    for m in (HOPF, EXOTIC, DISK):
        seqs = properness_sequences(m)
        assert len(seqs) == 16
    r = check_skew_criterion(EXOTIC, 100)
    assert r.summary["proper_sequences"] == 16 and r.summary["proper_failures"] == 0


def test_reports_are_reproducible():
    a = check_skew_criterion(DISK, 500, seed=9).to_dict()
    b = check_skew_criterion(DISK, 500, seed=9).to_dict()
    assert a == b


# --- Gauss image ------------------------------------------------------------------------

def test_gauss_image_examples():
    g = sample_gauss_image(HOPF, n=10_000)
    assert g.directions[:, 2].min() > 0
    np.testing.assert_allclose(np.linalg.norm(g.directions, axis=1), 1.0, atol=1e-15)
    assert detect_antipodal(g) == []
    c = sample_gauss_image(CONST, n=500)
    assert len(c) == 1
    np.testing.assert_allclose(c.directions[0], U_CONST, atol=1e-15)


def test_exotic_has_one_antipodal_pair():
    g = sample_gauss_image(EXOTIC, n=10_000)
    pairs = detect_antipodal(g)
    assert len(pairs) == 1
    got = {tuple(np.round(g.directions[i], 12)) for i in pairs[0]}
    assert got == {(0.0, 1.0, 0.0), (0.0, -1.0, 0.0)}
    assert (g.directions[~g.boundary, 2] > 0).all()


def test_one_param_breakpoints_antipodal():
    g = sample_gauss_image(BREAKS, n=2000)
    assert len(detect_antipodal(g)) >= 1


def test_gauss_dedup_resolution():
    g = sample_gauss_image(HOPF, n=2000)
    d = g.directions
    diff = np.linalg.norm(d[:, None, :] - d[None, :, :], axis=-1)
    np.fill_diagonal(diff, np.inf)
    assert diff.min() > 1e-6


@pytest.mark.parametrize("m", [HOPF, DISK, HELICOID, ELLIPSE, POLYGON, SMOOTH],
                         ids=["hopf", "disk", "helicoid", "ellipse", "polygon", "smooth"])
def test_gauss_convexity_passes(m):
    g = sample_gauss_image(m, n=2000)
    r = check_gauss_convexity(g, m, n_pairs=200)
    assert r.passed, r.witness
    assert r.error is MidpointNotRealized


def test_one_param_image_lies_on_great_circle():
    # midpoints of directions on a great circle stay on it, so they are realized
    g = sample_gauss_image(ONE, n=2000)
    assert np.abs(g.directions[:, 1]).max() == 0.0
    ok, _ = direction_realized(ONE, [0.0, 1.0, 1.0] / np.sqrt(2), None)
    assert not ok[0]


def test_steep_directions_not_realized():
    # the smooth collapse has |B| < 1, so these slopes are not attained
    m = SMOOTH
    dirs = np.array([[0.99, 0.0, np.sqrt(1 - 0.99 ** 2)], [-0.99, 0.0, np.sqrt(1 - 0.99 ** 2)],
                     [0.0, 0.99, np.sqrt(1 - 0.99 ** 2)]])
    ok, _ = direction_realized(m, dirs, np.zeros((3, 1, 2)))
    assert not ok.any()


# --- base spaces ------------------------------------------------------------------------

def _unit_disk(step=2e-3):
    g = np.arange(-1, 1 + step / 2, step)
    X, Y = np.meshgrid(g, g)
    P = np.column_stack([X.ravel(), Y.ravel()])
    th = np.linspace(0, 2 * np.pi, 4000)
    return np.vstack([P[np.hypot(*P.T) <= 1], np.column_stack([np.cos(th), np.sin(th)])])


def test_disk_base_space():
    e = estimate_S_u(DISK, (0, 0, 1))
    assert e.convexity == Convexity.CONVEX
    assert e.compactness == Compactness.COMPACT
    assert hausdorff_distance(e.points, _unit_disk()) <= e.dist_tol
    assert not e.is_singleton()


def test_helicoid_base_space_is_segment():
    e = estimate_S_u(HELICOID, (0, 0, 1), SMALL_GRID)
    assert e.convexity == Convexity.CONVEX and e.compactness == Compactness.COMPACT
    assert np.abs(e.points[:, 1]).max() <= e.level_tol
    np.testing.assert_allclose([e.points[:, 0].min(), e.points[:, 0].max()], [-1, 1],
                               atol=e.dist_tol)


def test_exotic_boundary_base_space():
    e = estimate_S_u(EXOTIC, (0, 1, 0), SMALL_GRID)
    assert e.convexity == Convexity.CONVEX
    assert e.compactness == Compactness.NONCOMPACT
    assert e.points[:, 0].min() >= np.pi / 2
    assert classify_support_line(e, (0, 1)) == SupportClass.NONSTRICT
    assert classify_support_line(e, (1, 0)) == SupportClass.ALL_INTERSECT


def test_hopf_base_spaces_are_points():
    for u in [(0, 0, 1), (0.3, 0.2, 1), (-0.5, 0.4, 1)]:
        e = estimate_S_u(HOPF, u, SMALL_GRID)
        assert e.is_singleton() and e.compactness == Compactness.COMPACT
        b = np.array(u[:2]) / u[2]
        np.testing.assert_allclose(e.points.mean(0), [b[1], -b[0]], atol=e.dist_tol)


def test_estimate_errors():
    with pytest.raises(EmptyEstimate):
        estimate_S_u(HOPF, (1, 0, 0))
    with pytest.raises(ValueError):
        estimate_S_u(HOPF, (0, 0, -1))
    with pytest.raises(EmptyEstimate):
        estimate_S_u(FibrationModel(Composed(SmoothDiskCollapse())), (1, 0, 1e-3), SMALL_GRID)


def test_half_half_ray():
    e = estimate_S_u(HALF, (0, 0, 1), SMALL_GRID)
    assert e.compactness == Compactness.NONCOMPACT
    assert classify_support_line(e, (1, 0)) == SupportClass.NONSTRICT
    for m in [(0, 1), (1, 1), (1, -2)]:
        assert classify_support_line(e, m) == SupportClass.STRICT


@pytest.mark.parametrize("name", ["hopf", "exotic", "disk", "fat_helicoid", "half_half",
                                  "ellipse", "polygon", "smooth_disk"])
def test_base_spaces_are_convex(name):
    m = BUILT_INS[name]
    for u in [(0, 0, 1), (0.2, -0.1, 1)]:
        e = estimate_S_u(m, u, SMALL_GRID)
        assert e.convexity == Convexity.CONVEX, (u, e.evidence["convexity_witness"])


def test_one_param_base_space_is_union_of_lines():
    # slope-1 planes: direction (0,0,1) is attained on every plane y = 2 k pi
    e = estimate_S_u(ONE, (0, 0, 1), SMALL_GRID)
    ys = np.unique(np.round(e.points[:, 1] / (2 * np.pi), 6))
    assert np.allclose(ys, np.round(ys)) and len(ys) >= 2
    assert e.convexity == Convexity.NONCONVEX


# --- support lines, synthetic ---------------------------------------------------------

def test_support_bounded_set():
    e = BaseSpaceEstimate.from_points(_unit_disk(0.02), cell=0.02)
    for a in np.linspace(0, np.pi, 7):
        assert classify_support_line(e, (np.cos(a), np.sin(a))) == SupportClass.STRICT


def test_support_full_line():
    s = np.linspace(-10, 10, 2001)
    e = BaseSpaceEstimate.from_points(np.column_stack([s, 0 * s]), recession=[(1, 0), (-1, 0)])
    assert classify_support_line(e, (1, 0)) == SupportClass.NONSTRICT
    assert classify_support_line(e, (0, 1)) == SupportClass.ALL_INTERSECT
    assert classify_support_line(e, (1, 1)) == SupportClass.ALL_INTERSECT


def test_support_ray():
    s = np.linspace(0, 10, 1001)
    e = BaseSpaceEstimate.from_points(np.column_stack([s, 0 * s]), recession=[(1, 0)])
    assert classify_support_line(e, (1, 0)) == SupportClass.NONSTRICT
    for m in [(0, 1), (1, 1), (-1, 3)]:
        assert classify_support_line(e, m) == SupportClass.STRICT


def test_support_empty_set_raises():
    e = BaseSpaceEstimate.from_points(np.zeros((0, 2)))
    assert e.convexity == Convexity.EMPTY
    with pytest.raises(EmptyEstimate):
        classify_support_line(e, (1, 0))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_support_partition_is_exclusive(a, b):
    # exactly one class per query; a single recession direction leaves only
    # its own direction non-strict
    s = np.linspace(0, 5, 201)
    d = np.array([np.cos(b), np.sin(b)])
    e = BaseSpaceEstimate.from_points(np.outer(s, d), recession=[d])
    m = np.array([np.cos(a), np.sin(a)])
    got = classify_support_line(e, m)
    assert got in set(SupportClass)
    par = abs(m[0] * d[1] - m[1] * d[0]) <= e.angle_tol
    assert (got == SupportClass.NONSTRICT) == par
    assert got != SupportClass.ALL_INTERSECT


def test_nonconvex_points_detected():
    s = np.linspace(0, 1, 101)
    L = np.vstack([np.column_stack([s, 0 * s]), np.column_stack([0 * s, s])])
    e = BaseSpaceEstimate.from_points(L)
    assert e.convexity == Convexity.NONCONVEX
    assert not e.convexity_report().passed


# --- continuity at infinity -------------------------------------------------------------

def test_continuity_examples():
    assert probe_continuity_at_infinity(HOPF, (0, 0, 1)).verdict == ContinuityVerdict.CONVERGING
    assert probe_continuity_at_infinity(ONE, (0, 0, 1)).verdict != ContinuityVerdict.CONVERGING
    c = probe_continuity_at_infinity(CONST, U_CONST)
    assert c.verdict == ContinuityVerdict.CONVERGING
    assert np.nanmax(c.shell_max) <= 1e-7


def test_continuity_argument_checks():
    with pytest.raises(ValueError):
        probe_continuity_at_infinity(HOPF, (0, 0, 1), delta=1.0)
    with pytest.raises(ValueError):
        probe_continuity_at_infinity(HOPF, (0, 0, 1), radii=[4.0, 2.0, 8.0])


@pytest.mark.parametrize("m", [HOPF, DISK, ELLIPSE, HELICOID],
                         ids=["hopf", "disk", "ellipse", "helicoid"])
def test_compact_base_space_implies_continuity(m):
    u = np.array([0.0, 0.0, 1.0])
    e = estimate_S_u(m, u, SMALL_GRID)
    assert e.compactness == Compactness.COMPACT
    assert probe_continuity_at_infinity(m, u).verdict == ContinuityVerdict.CONVERGING
    g = sample_gauss_image(m, n=2000)
    assert np.min(np.linalg.norm(g.directions + u, axis=1)) > 1e-6


# --- pushoff ------------------------------------------------------------------------------

def test_hopf_pushoff_strictly_monotone():
    c = pushoff_gamma(HOPF, (0, 0, 1), (1, 0))
    assert c.found().all()
    a = np.unwrap(c.angles(), period=np.pi)
    d = np.diff(a)
    assert np.all(d > 0) or np.all(d < 0)
    assert check_monotone_pushoff(c).passed


def test_disk_pushoff_flat_interval():
    c = pushoff_gamma(DISK, (0, 0, 1), (1, 0))
    assert c.found().all()
    assert check_monotone_pushoff(c).passed
    t, a = c.ts(), c.angles()
    flat = t[np.abs(a) <= 1e-12]
    assert flat.min() == pytest.approx(-1, abs=0.051) and flat.max() == pytest.approx(1, abs=0.051)
    assert np.all(np.abs(a[np.abs(t) > 1.06]) > 0)


def test_one_param_pushoff_is_gamma():
    m = FibrationModel(OneParam(0.4))
    c = pushoff_gamma(m, (0, 0, 1), (1, 0))
    assert c.found().all()
    np.testing.assert_allclose(c.angles(), 0.4 * c.ts(), atol=1e-15)


def test_canyon_synthetic():
    c = PushoffCurve.from_angles([0, 1, 2], [0, 0.3, 0.1])
    r = check_monotone_pushoff(c)
    assert not r.passed
    assert r.witness["t"] == [0, 1, 2]
    with pytest.raises(CanyonFound):
        r.check()
    assert check_monotone_pushoff(PushoffCurve.from_angles([0, 1, 2, 3], [0, 0.3, 0.3, 1])).passed
    with pytest.raises(ValueError):
        check_monotone_pushoff(PushoffCurve.from_angles([0, 1, 2], [0, None, 1]))


def test_canyon_respects_line_angles():
    # angles of lines wrap at pi, so a jump of nearly pi is a small step
    c = PushoffCurve.from_angles([0, 1, 2, 3], [1.4, 1.5, -1.5, -1.4])
    assert check_monotone_pushoff(c).passed


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.5, 1.5), st.lists(st.floats(0.0, 1.5), min_size=2, max_size=30),
       st.booleans())
def test_sorted_angles_never_canyon(start, steps, down):
    # steps stay below pi/2 so unwrapping modulo pi keeps the order
    a = start + np.cumsum([0.0] + steps) * (-1.0 if down else 1.0)
    c = PushoffCurve.from_angles(np.arange(len(a)), np.angle(np.exp(2j * a)) / 2)
    assert check_monotone_pushoff(c).passed


@pytest.mark.parametrize("name", ["hopf", "hopf_minus", "disk", "fat_helicoid", "ellipse",
                                  "smooth_disk", "exotic", "half_half"])
def test_no_canyon_on_built_ins(name):
    m = BUILT_INS[name]
    for mm in [(1, 0), (0, 1)]:
        c = pushoff_gamma(m, (0, 0, 1), mm, n_samples=101)
        if c.found().sum() >= 3:
            assert check_monotone_pushoff(c).passed


# --- exotic asymptotics -----------------------------------------------------------------

def test_exotic_rates_along_vertical():
    n = np.arange(4, 15)
    z = 2.0 ** -n
    X = np.column_stack([np.full(n.size, 4.0), np.zeros(n.size), z])
    B, _ = fiber_slopes(EXOTIC, X)
    s1 = np.polyfit(np.log(z), np.log(np.abs(B[:, 0])), 1)[0]
    s2 = np.polyfit(np.log(z), np.log(np.abs(B[:, 1])), 1)[0]
    assert abs(s1 + 1) <= 0.2 and abs(s2 + 2) <= 0.2
    V = np.column_stack([B, np.ones(n.size)])
    V /= np.linalg.norm(V, axis=1)[:, None]
    ang = np.arccos(np.clip(V[:, 1], -1, 1))
    assert np.all(np.diff(ang) < 0)


# --- classification ---------------------------------------------------------------------

@pytest.mark.parametrize("name,kind", [
    ("hopf", StructureKind.SKEW), ("exotic", StructureKind.EXOTIC),
    ("half_half", StructureKind.HALF_AND_HALF), ("one_param", StructureKind.ONE_PARAMETER),
    ("constant", StructureKind.ONE_PARAMETER), ("disk", StructureKind.SKEW_LIKE),
    ("fat_helicoid", StructureKind.SKEW_LIKE), ("polygon", StructureKind.SKEW_LIKE),
    ("breakpoints", StructureKind.ONE_PARAMETER),
])
def test_classification(name, kind):
    v = classify_structure(BUILT_INS[name])
    assert v.kind == kind, v.reasons


def test_broken_generator_is_indeterminate():
    v = classify_structure(BROKEN)
    assert v.kind == StructureKind.INDETERMINATE
    assert "failed: skew_criterion" in v.reasons


def test_verdict_is_function_of_evidence():
    ev = run_structure_suite(HOPF, seed=5)
    a = classify_structure(HOPF, ev)
    b = classify_structure(HOPF, ev)
    assert a.to_dict() == b.to_dict()
    ev2 = run_structure_suite(HOPF, seed=5, workers=3)
    assert ev.to_dict() == ev2.to_dict()


def test_scaled_model_keeps_structure():
    assert classify_structure(scale_homotopy(DISK, 0.5)).kind == StructureKind.SKEW_LIKE


def test_check_report_serializes():
    r = CheckReport("x", True, {"a": np.float64(1.5), "b": np.arange(2)})
    assert r.to_dict() == {"name": "x", "passed": True, "summary": {"a": 1.5, "b": [0, 1]},
                           "witness": None}
    assert r.check() is r
    g = GaussSampleSet(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), np.zeros(1, bool), {})
    assert detect_antipodal(g) == []
