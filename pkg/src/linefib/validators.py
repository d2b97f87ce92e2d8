"""Numerical checks of the structure of a line fibration.

Every check is a pure function of ``(model, parameters, seed)``.  Checks that
can fail return a :class:`CheckReport`; ``report.check()`` raises the matching
:class:`~linefib.errors.ViolationFound` subclass with the witness attached.

Sampling is quasi-random (scrambled Halton, seeded) so reports are
reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import kernels
from .errors import CanyonFound, EmptyEstimate, MidpointNotRealized, ViolationFound
from .evaluator import (
    FibrationModel, fiber_lines, field_at_many, field_valid, base_points,
)
from .generators import DomainKind, fibers_intersect_many
from .geom import (
    EPS_GEO, AffinePlane, as_unit, circle_angle, geodesic_midpoint, orthonormal_complement, unit,
)
from .kernels import codes

ANTIPODAL_TOL = 1e-6
DEDUP_RESOLUTION = 1e-6
BACKTRACK_TOL = 1e-6
ANGLE_TOL = 1e-3
MIDPOINT_TOL = 1e-8
STRIP_INSET = 1e-9


# --- shared helpers -----------------------------------------------------------

def halton(n, d, seed):
    """``n`` scrambled Halton points in ``[0, 1)^d``."""
    if n <= 0:
        return np.zeros((0, d))
    return qmc.Halton(d=d, scramble=True, seed=seed).random(n)


def jsonable(x):
    """Convert numpy containers to plain Python for JSON output."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, Enum):
        return x.value
    if hasattr(x, "to_dict"):
        return jsonable(x.to_dict())
    return x


@dataclass
class CheckReport:
    name: str
    passed: bool
    summary: dict = field(default_factory=dict)
    witness: object = None
    error: type = ViolationFound

    def check(self):
        if not self.passed:
            raise self.error(f"{self.name} failed: {self.summary}", self.witness)
        return self

    def to_dict(self):
        return jsonable({"name": self.name, "passed": self.passed, "summary": self.summary,
                         "witness": self.witness})


def _B_masked(model, Q):
    """Model generator on the rows of ``Q`` that are in the domain, NaN elsewhere."""
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    ok = np.asarray(model.in_domain(Q)).reshape(-1)
    B = np.full_like(Q, np.nan)
    if ok.any():
        B[ok] = np.asarray(model.B(Q[ok])).reshape(-1, 2)
    return B, ok


def base_window(model, radius, clip=True):
    """Sampling window ``(xlo, xhi, ylo, yhi)`` for base points and which
    sides are artificial truncations (as opposed to domain edges)."""
    dom = model.generator.domain
    c = model.scale if model.scale > 0 else 1.0
    xlo, xhi, ylo, yhi = -radius, radius, -radius, radius
    cut = [True, True, True, True]
    if clip and dom.kind == DomainKind.STRIP:
        a = (dom.a + STRIP_INSET) / c
        b = (dom.b - STRIP_INSET) / c
        if a > xlo:
            xlo, cut[0] = a, False
        if b < xhi:
            xhi, cut[1] = b, False
    return (xlo, xhi, ylo, yhi), cut


def sample_base_points(model, n, seed, radius=10.0):
    """``n`` Halton points in the window that lie in the domain."""
    (xlo, xhi, ylo, yhi), _ = base_window(model, radius)
    out = np.zeros((0, 2))
    k = n
    for attempt in range(8):
        h = halton(k, 2, seed + attempt)
        Q = np.column_stack([xlo + (xhi - xlo) * h[:, 0], ylo + (yhi - ylo) * h[:, 1]])
        Q = Q[np.asarray(model.in_domain(Q)).reshape(-1)]
        out = np.vstack([out, Q])
        if out.shape[0] >= n:
            return out[:n]
        k = 2 * k
    return out


# --- construction criterion -----------------------------------------------------

def _domain_interval(inside, limit=2.0 ** 20):
    """Largest interval around 0 on which ``inside(y)`` holds, found by doubling
    and bisection; each end is ``None`` when it reaches ``limit``."""
    ends = []
    for sgn in (1.0, -1.0):
        y = 1.0
        while y <= limit and inside(sgn * y):
            y *= 2.0
        if y > limit:
            ends.append(None)
            continue
        lo, hi = 0.0, y
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if inside(sgn * mid):
                lo = mid
            else:
                hi = mid
        ends.append(sgn * lo)
    return ends[1], ends[0]


def properness_sequences(model, n_steps=40):
    """Sixteen sequences that leave every compact subset of the domain.

    Radial escape for unbounded directions, and approach to each finite edge
    of the domain, with distances ``2^(k/2)`` and ``2^-k`` respectively.
    """
    k = np.arange(n_steps)
    grow = 2.0 ** (k / 2.0)
    seqs = []
    dom = model.generator.domain
    if model.is_one_param:
        ylo, yhi = _domain_interval(lambda y: bool(model.in_domain([0.0, y])))
        edges = [(e, s) for e, s in ((yhi, -1.0), (ylo, 1.0)) if e is not None]
        if not edges:
            for a in np.linspace(0, 2 * np.pi, 16, endpoint=False):
                seqs.append((f"radial {a:.3f}", grow[:, None] * [np.cos(a), np.sin(a)]))
            return seqs
        y0s = np.linspace(ylo if ylo is not None else -3.0, yhi if yhi is not None else 3.0, 6)[1:-1]
        for y0 in y0s:
            for sgn in (1.0, -1.0):
                seqs.append((f"along y={y0:.3f} {'+' if sgn > 0 else '-'}",
                             np.column_stack([sgn * grow, np.full(n_steps, y0)])))
        per = (16 - len(seqs)) // len(edges)
        for e, inward in edges:
            for x0 in np.linspace(-5, 5, per):
                d = e + inward * np.maximum(2.0 ** -k, abs(e) * 1e-15 + 1e-12)
                seqs.append((f"edge y={e:.6f} x={x0:.2f}", np.column_stack([np.full(n_steps, x0), d])))
        return seqs[:16]
    if dom.kind == DomainKind.STRIP:
        c = model.scale if model.scale > 0 else 1.0
        a, b = dom.a / c, dom.b / c
        xs = np.linspace(a, b, 6)[1:-1]
        for x0 in xs:
            for sgn in (1.0, -1.0):
                seqs.append((f"along x={x0:.3f} {'+' if sgn > 0 else '-'}",
                             np.column_stack([np.full(n_steps, x0), sgn * grow])))
        gap = 2.0 ** -np.minimum(k, 38)
        for y0 in (-3.0, -1.0, 1.0, 3.0):
            seqs.append((f"edge x={b:.6f} y={y0}", np.column_stack([b - gap / c, np.full(n_steps, y0)])))
            seqs.append((f"edge x={a:.6f} y={y0}", np.column_stack([a + gap / c, np.full(n_steps, y0)])))
        return seqs
    for a in np.linspace(0, 2 * np.pi, 16, endpoint=False):
        seqs.append((f"radial {a:.3f}", grow[:, None] * [np.cos(a), np.sin(a)]))
    return seqs


PROPER_TIMES = (-10.0, -1.0, -0.1, 0.1, 1.0, 10.0)


def _proper_ok(vals):
    """Tail minima must grow: the last quarter's tail minimum is at least 1e4
    and at least eight times the tail minimum from the midpoint on."""
    n = vals.size
    tail = np.minimum.accumulate(vals[::-1])[::-1]
    mid, late = tail[n // 2], tail[(3 * n) // 4]
    return bool(late >= 1e4 and late >= 8.0 * mid), float(mid), float(late)


def check_skew_criterion(model: FibrationModel, n_pairs=10_000, seed=42, radius=10.0):
    """Pairwise non-intersection of sampled fibers plus a properness probe."""
    P = sample_base_points(model, 2 * n_pairs, seed, radius)
    n = P.shape[0] // 2
    A, C = P[:n], P[n:2 * n]
    A, C = model.scale * A + 0.0, model.scale * C + 0.0
    gen = model.generator
    hits = fibers_intersect_many(gen, A, C)
    BA = kernels.eval_B(gen.kind, gen.params, A)
    BC = kernels.eval_B(gen.kind, gen.params, C)
    dq, dB = A - C, BA - BC
    det = dq[:, 0] * dB[:, 1] - dq[:, 1] * dB[:, 0]
    scale = np.hypot(dq[:, 0], dq[:, 1]) * np.maximum(np.hypot(dB[:, 0], dB[:, 1]), 1.0)
    zero_defect = np.abs(det) <= 1e-12 * scale
    parallel = np.hypot(dB[:, 0], dB[:, 1]) <= 1e-12 * (1 + np.abs(BA).sum(1) + np.abs(BC).sum(1))
    summary = {
        "pairs": int(n),
        "intersecting_pairs": int(hits.sum()),
        "zero_defect_pairs": int(zero_defect.sum()),
        "parallel_pairs": int(parallel.sum()),
        "min_relative_defect": float(np.min(np.abs(det) / np.maximum(scale, 1e-300))) if n else None,
    }
    witness = None
    if hits.any():
        i = int(np.flatnonzero(hits)[0])
        p, q = A[i] / (model.scale or 1.0), C[i] / (model.scale or 1.0)
        lam = float(np.dot(dq[i], dB[i]) / np.dot(dB[i], dB[i]))
        witness = {"kind": "pair", "p": p, "q": q, "multiplier": lam, "meet_height": -lam}
    failures = []
    for label, seq in properness_sequences(model):
        Bs, ok = _B_masked(model, seq)
        if not ok.all():
            failures.append({"sequence": label, "reason": "left the domain"})
            continue
        for t in PROPER_TIMES:
            vals = np.hypot(*(seq + t * Bs).T)
            good, mid, late = _proper_ok(vals)
            if not good:
                failures.append({"sequence": label, "t": t, "tail_min_mid": mid,
                                 "tail_min_late": late})
    summary["proper_sequences"] = len(properness_sequences(model))
    summary["proper_failures"] = len(failures)
    if witness is None and failures:
        witness = {"kind": "sequence", **failures[0]}
    return CheckReport("skew_criterion", not hits.any() and not failures, summary, witness)


def _sample_lines(model, n_lines, seed, radius=10.0):
    fams = model.generator.boundary
    n_fam = n_lines // 10 if fams else 0
    per = n_fam // len(fams) if fams else 0
    Q = sample_base_points(model, n_lines - per * len(fams), seed, radius)
    bases, dirs = fiber_lines(model, Q)
    kinds = ["fiber"] * len(bases)
    rng = np.random.default_rng(seed)
    for b, d in model.boundary_lines(per, radius, rng):
        bases, dirs = np.vstack([bases, b]), np.vstack([dirs, d])
        kinds += ["boundary"] * len(b)
    return bases, dirs, kinds


def oracle_disjointness(model: FibrationModel, n_lines=500, seed=42, radius=10.0):
    """Independent check in R^3: no two sampled fibers meet."""
    bases, dirs, kinds = _sample_lines(model, n_lines, seed, radius)
    dist, rel = kernels.line_pairs(bases, dirs, EPS_GEO)
    counts = {name: int((rel == code).sum()) for name, code in (
        ("Identical", codes.REL_IDENTICAL), ("Parallel", codes.REL_PARALLEL),
        ("Intersecting", codes.REL_INTERSECTING), ("Skew", codes.REL_SKEW))}
    bad = (rel == codes.REL_INTERSECTING) | (rel == codes.REL_IDENTICAL)
    witness = None
    if bad.any():
        i, j = np.triu_indices(len(bases), 1)
        k = int(np.flatnonzero(bad)[0])
        a, b = int(i[k]), int(j[k])
        witness = {"kind": "lines", "line_a": {"base": bases[a], "dir": dirs[a]},
                   "line_b": {"base": bases[b], "dir": dirs[b]}, "distance": dist[k]}
    summary = {"lines": len(bases), "boundary_lines": kinds.count("boundary"),
               "relations": counts, "min_skew_distance": float(dist[rel == codes.REL_SKEW].min())
               if counts["Skew"] else None}
    return CheckReport("oracle_disjointness", not bad.any(), summary, witness)


# --- Gauss image --------------------------------------------------------------------

@dataclass
class GaussSampleSet:
    sources: np.ndarray
    directions: np.ndarray
    boundary: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.directions.shape[0]

    def to_dict(self):
        return {"count": len(self), "metadata": self.metadata,
                "boundary_directions": self.directions[self.boundary]}


def _dedup(dirs, resolution):
    """Mask keeping the first of every cluster of directions closer than
    ``resolution``; exact repeats are removed first."""
    keep = np.zeros(dirs.shape[0], dtype=bool)
    _, first = np.unique(dirs, axis=0, return_index=True)
    keep[first] = True
    idx = np.flatnonzero(keep)
    tree = cKDTree(dirs[idx])
    pairs = tree.query_pairs(resolution, output_type="ndarray")
    for i, j in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        if keep[idx[i]] and keep[idx[j]]:
            keep[idx[j]] = False
    return keep


def sample_gauss_image(model: FibrationModel, region=((-5, 5), (-5, 5), (-5, 5)), n=10_000,
                       seed=42):
    """Field directions at ``n`` Halton points of the box, plus every
    boundary-family direction; duplicates within 1e-6 are merged."""
    lo = np.array([r[0] for r in region], dtype=float)
    hi = np.array([r[1] for r in region], dtype=float)
    X = lo + (hi - lo) * halton(n, 3, seed)
    V, st = field_at_many(model, X)
    ok = field_valid(st)
    src, dirs = X[ok], V[ok]
    flags = np.zeros(src.shape[0], dtype=bool)
    for fam in model.generator.boundary:
        p = np.asarray(fam.normal) * fam.offset * 1.5
        x = np.array([p[0], p[1], 0.0]) / (model.scale or 1.0)
        src = np.vstack([src, x])
        dirs = np.vstack([dirs, fam.dir])
        flags = np.append(flags, True)
    keep = _dedup(dirs, DEDUP_RESOLUTION) if len(dirs) else np.zeros(0, bool)
    # boundary directions are exact; keep them even if a sample sits on top
    keep |= flags
    failed = {str(code): int((st == code).sum()) for code in np.unique(st[~ok])}
    meta = {"region": [list(map(float, r)) for r in region], "count": int(n), "seed": int(seed),
            "evaluated": int(ok.sum()), "failed": failed, "coverage": float(ok.mean()) if n else 1.0}
    return GaussSampleSet(src[keep], dirs[keep], flags[keep], meta)


def detect_antipodal(gauss: GaussSampleSet, tol=ANTIPODAL_TOL):
    """All index pairs ``(i, j)``, ``i < j``, with ``|u_i + u_j| <= tol``."""
    if len(gauss) == 0:
        return []
    tree = cKDTree(gauss.directions)
    pairs = set()
    for i, hits in enumerate(tree.query_ball_point(-gauss.directions, tol)):
        for j in hits:
            if i != j:
                pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def _level_solve(model, Q0, b, tol, maxit=80):
    """Levenberg-Marquardt for ``B(q) = b`` from each row of ``Q0``.

    ``b`` is one target ``(2,)`` or one per row.  Returns ``(Q, residual)``.
    """
    q = np.array(Q0, dtype=float).reshape(-1, 2)
    n = q.shape[0]
    b = np.broadcast_to(np.asarray(b, dtype=float), (n, 2))
    B, ok = _B_masked(model, q)
    G = B - b
    r = np.where(ok, np.hypot(G[:, 0], G[:, 1]), np.inf)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n,))
    mu = np.full(n, 1e-3)
    active = ok & (r > tol)
    for _ in range(maxit):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        J = np.asarray(model.jac_B(q[idx])).reshape(-1, 2, 2)
        JtJ = np.einsum("nki,nkj->nij", J, J)
        scale = np.trace(JtJ, axis1=1, axis2=2) + 1e-12
        A = JtJ + (mu[idx] * scale)[:, None, None] * np.eye(2)
        g = np.einsum("nki,nk->ni", J, G[idx])
        step = -np.linalg.solve(A, g[..., None])[..., 0]
        trial = q[idx] + step
        Bt, okt = _B_masked(model, trial)
        Gt = Bt - b[idx]
        rt = np.where(okt, np.hypot(Gt[:, 0], Gt[:, 1]), np.inf)
        acc = okt & (rt < r[idx])
        ia = idx[acc]
        q[ia], G[ia], r[ia] = trial[acc], Gt[acc], rt[acc]
        mu[ia] = np.maximum(mu[ia] / 3.0, 1e-12)
        mu[idx[~acc]] *= 4.0
        active[ia[r[ia] <= tol[ia]]] = False
        active[idx[mu[idx] > 1e10]] = False
    return q, r


def _zoom_solve(model, b, P, tol, n=41, maxit=200):
    """Derivative-free search for ``B(q) = b``: start at the best point of
    ``P`` and repeatedly re-grid a shrinking square around the best point.

    Needed where the Jacobian is rank deficient on one side of a seam and
    Newton-type steps stall.  Returns ``(q, residual)``.
    """
    B, _ = _B_masked(model, P)
    r = np.hypot(*(B - b).T)
    r = np.where(np.isfinite(r), r, np.inf)
    i = int(np.argmin(r))
    q, rq = P[i].copy(), float(r[i])
    h = float(np.ptp(P, axis=0).max()) / 2.0
    for _ in range(maxit):
        if rq <= tol or h < 1e-15 * (1.0 + np.hypot(*q)):
            break
        G, _, _ = _grid(q[0] - h, q[0] + h, q[1] - h, q[1] + h, n, n)
        B, _ = _B_masked(model, G)
        r = np.hypot(*(B - b).T)
        r = np.where(np.isfinite(r), r, np.inf)
        j = int(np.argmin(r))
        if r[j] < rq:
            q, rq = G[j].copy(), float(r[j])
        h *= 0.5
    return q, rq


def direction_realized(model, W, starts, tol=MIDPOINT_TOL):
    """Whether each unit direction in ``W`` is a field value.

    Upward directions are tested through the level equation ``B(q) = b_w``
    from the given starting base points; horizontal ones against the
    boundary families; the plane-by-plane generator is tested in closed form.
    Returns ``(realized, residual)``.
    """
    W = np.asarray(W, dtype=float).reshape(-1, 3)
    n = W.shape[0]
    realized = np.zeros(n, dtype=bool)
    resid = np.full(n, np.inf)
    if model.is_one_param:
        spec = model.spec
        lo, hi = _angle_range(spec)
        ang = np.arctan2(W[:, 0], W[:, 2])
        off = np.abs(W[:, 1])
        # distance of the angle to the attained interval, modulo 2 pi
        k = np.round(((lo + hi) / 2 - ang) / (2 * np.pi))
        a = ang + 2 * np.pi * k
        gap = np.maximum(np.maximum(lo - a, a - hi), 0.0)
        resid = np.hypot(off, np.where(hi - lo >= 2 * np.pi, 0.0, gap))
        return resid <= tol, resid
    up = W[:, 2] > 1e-12
    for fam in model.generator.boundary:
        hit = ~up & (np.linalg.norm(W - fam.dir, axis=1) <= 1e-9)
        realized |= hit
        resid[hit] = np.linalg.norm(W[hit] - fam.dir, axis=1)
    if up.any():
        b = W[up, :2] / W[up, 2:3]
        starts = np.asarray(starts, dtype=float).reshape(n, -1, 2)[up]
        best = _preimage_residual(model, b)
        for k in range(starts.shape[1]):
            if np.all(best <= tol):
                break
            _, r = _level_solve(model, starts[:, k], b, MIDPOINT_TOL * (1 + np.hypot(*b.T)))
            best = np.minimum(best, r / (1 + np.hypot(*b.T)))
        # a start on the wrong side of a seam can stall; retry from a local grid
        for k in np.flatnonzero(best > tol):
            S = starts[k]
            S = S[np.all(np.isfinite(S), axis=1)]
            if len(S) == 0:
                continue
            c = S.mean(0)
            h = max(1.0, 2.0 * float(np.ptp(S, axis=0).max()))
            P, shape, _ = _grid(c[0] - h, c[0] + h, c[1] - h, c[1] + h, 41, 41)
            lt = tol * (1 + float(np.hypot(*b[k])))
            T = _level_trace(model, P, shape, b[k], lt)
            if len(T):
                B, _ = _B_masked(model, T[:1])
                best[k] = float(np.hypot(*(B[0] - b[k]))) / (1 + float(np.hypot(*b[k])))
            else:
                _, r = _zoom_solve(model, b[k], P, lt)
                best[k] = r / (1 + float(np.hypot(*b[k])))
        resid[up] = best
        realized[up] = best <= tol
    return realized, resid


def _preimage_residual(model, b):
    """Relative residual of ``B(q) = b`` at the explicit preimage, where the
    generator has one; ``inf`` elsewhere."""
    best = np.full(b.shape[0], np.inf)
    spec = model.spec
    f = getattr(spec, "f", None)
    if f is None:
        return best
    try:
        Q, ok = f.preimage(np.column_stack([b[:, 1], -b[:, 0]]))
    except NotImplementedError:
        return best
    if model.scale == 0.0:
        Q = np.zeros_like(Q)
    else:
        Q = Q / model.scale
    B, inside = _B_masked(model, Q)
    ok &= inside
    r = np.hypot(*(B - b).T) / (1 + np.hypot(*b.T))
    best[ok] = r[ok]
    return best


def _angle_range(spec):
    if spec.breakpoints is None:
        if spec.slope == 0.0:
            return spec.offset, spec.offset
        return -np.inf, np.inf
    return float(spec.angles.min()), float(spec.angles.max())


def check_gauss_convexity(gauss: GaussSampleSet, model: FibrationModel, n_pairs=500, seed=42,
                          n_starts=4):
    """Geodesic midpoints of sampled direction pairs must again be field values."""
    m = len(gauss)
    rng = np.random.default_rng(seed)
    if m < 2:
        return CheckReport("gauss_convexity", True, {"pairs": 0}, error=MidpointNotRealized)
    I = rng.integers(0, m, n_pairs)
    J = rng.integers(0, m, n_pairs)
    keep = I != J
    I, J = I[keep], J[keep]
    U, V = gauss.directions[I], gauss.directions[J]
    anti = np.linalg.norm(U + V, axis=1) < 1e-9
    I, J, U, V = I[~anti], J[~anti], U[~anti], V[~anti]
    W = np.array([geodesic_midpoint(u, v) for u, v in zip(U, V)]).reshape(-1, 3)
    starts = np.zeros((len(W), n_starts, 2))
    if len(W) and not model.is_one_param:
        Q, st = base_points(model, gauss.sources)
        good = st == codes.OK
        tree = cKDTree(gauss.directions[good])
        _, nn = tree.query(W, k=min(n_starts, int(good.sum())))
        nn = np.asarray(nn).reshape(len(W), -1)
        base = Q[good]
        for k in range(n_starts):
            starts[:, k] = base[nn[:, min(k, nn.shape[1] - 1)]]
    ok, resid = direction_realized(model, W, starts)
    summary = {"pairs": int(len(W)), "skipped_antipodal": int(anti.sum()),
               "not_realized": int((~ok).sum()),
               "max_residual": float(resid.max()) if len(W) else 0.0}
    witness = None
    if not ok.all():
        k = int(np.flatnonzero(~ok)[0])
        witness = {"u": U[k], "v": V[k], "midpoint": W[k], "residual": resid[k]}
    return CheckReport("gauss_convexity", bool(ok.all()), summary, witness, MidpointNotRealized)


# --- base spaces --------------------------------------------------------------------

class Convexity(str, Enum):
    CONVEX = "Convex"
    NONCONVEX = "NonConvex"
    EMPTY = "Empty"


class Compactness(str, Enum):
    COMPACT = "Compact"
    NONCOMPACT = "Noncompact"
    UNKNOWN = "Unknown"


class SupportClass(str, Enum):
    STRICT = "StrictSupport"
    NONSTRICT = "NonStrictSupport"
    ALL_INTERSECT = "AllTranslatesIntersect"


@dataclass
class GridSpec:
    """Grids used by :func:`estimate_S_u`.

    Coarse square grids of half-width ``radii`` with ``n_coarse`` points per
    axis decide compactness; a fine grid of step ``fine_step`` (at most
    ``fine_max`` points per axis, inside ``[-fine_clip, fine_clip]^2``) around
    the first coarse trace gives the returned points.
    """

    radii: tuple = (10.0, 40.0, 160.0)
    n_coarse: int = 401
    fine_step: float = 1e-2
    fine_max: int = 1001
    fine_clip: float = 10.0
    n_segments: int = 400
    seed: int = 0

    def __post_init__(self):
        if len(self.radii) < 3 or list(self.radii) != sorted(self.radii):
            raise ValueError("need at least three increasing radii")
        if self.n_coarse < 3 or self.fine_max < 3 or self.fine_step <= 0:
            raise ValueError("grids need at least three points per axis")

    def to_dict(self):
        return {"radii": list(self.radii), "n_coarse": self.n_coarse,
                "fine_step": self.fine_step, "fine_max": self.fine_max,
                "fine_clip": self.fine_clip, "n_segments": self.n_segments, "seed": self.seed}


@dataclass
class BaseSpaceEstimate:
    u: np.ndarray
    points: np.ndarray
    convexity: Convexity
    compactness: Compactness
    recession: np.ndarray
    cell: float
    level_tol: float
    angle_tol: float = ANGLE_TOL
    evidence: dict = field(default_factory=dict)

    @property
    def dist_tol(self):
        return 2.0 * self.cell

    @property
    def radius(self):
        """Half-diagonal of the bounding box of the trace."""
        return _half_diag(self.points)

    def is_singleton(self):
        return self.points.shape[0] > 0 and self.radius <= self.dist_tol

    @classmethod
    def from_points(cls, points, u=(0.0, 0.0, 1.0), cell=1e-2, recession=None,
                    compactness=None, n_segments=400, seed=0):
        """Estimate built from an explicit point set (for synthetic tests).

        ``recession`` lists the unit directions in which the set is unbounded;
        by default none, and the set is compact.
        """
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        rec = np.zeros((0, 2)) if recession is None else \
            np.array([_unit2(d) for d in np.asarray(recession, dtype=float).reshape(-1, 2)])
        if compactness is None:
            compactness = Compactness.NONCOMPACT if len(rec) else Compactness.COMPACT
        conv, wit = _convexity(P, 2.0 * cell, n_segments, seed)
        return cls(as_unit(u), P, conv, Compactness(compactness), rec, float(cell), 0.0,
                   evidence={"convexity_witness": wit})

    def convexity_report(self):
        ok = self.convexity != Convexity.NONCONVEX
        return CheckReport("S_u_convexity", ok, {"u": self.u, "points": len(self.points),
                                                 "verdict": self.convexity},
                           self.evidence.get("convexity_witness"))

    def to_dict(self):
        P = self.points
        lo = P.min(0) if len(P) else None
        hi = P.max(0) if len(P) else None
        return jsonable({"u": self.u, "count": len(P), "bbox": [lo, hi],
                         "convexity": self.convexity, "compactness": self.compactness,
                         "recession": self.recession, "cell": self.cell,
                         "level_tol": self.level_tol, "dist_tol": self.dist_tol,
                         "evidence": self.evidence})


def _unit2(v):
    v = np.asarray(v, dtype=float).reshape(2)
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise ValueError("zero direction")
    return v / n


def _half_diag(P):
    if len(P) == 0:
        return 0.0
    return 0.5 * float(np.hypot(*(P.max(0) - P.min(0))))


def _convexity(P, dist_tol, n_segments, seed):
    """Points on random chords of the set must lie near the set."""
    if len(P) == 0:
        return Convexity.EMPTY, None
    if len(P) == 1:
        return Convexity.CONVEX, None
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(P), n_segments)
    j = rng.integers(0, len(P), n_segments)
    lam = np.arange(1, 8) / 8.0
    S = P[i, None, :] * (1 - lam[None, :, None]) + P[j, None, :] * lam[None, :, None]
    d, _ = cKDTree(P).query(S.reshape(-1, 2))
    d = d.reshape(n_segments, lam.size)
    if np.all(d <= dist_tol):
        return Convexity.CONVEX, None
    k, l = np.unravel_index(int(np.argmax(d)), d.shape)
    return Convexity.NONCONVEX, {"a": P[i[k]], "b": P[j[k]], "point": S[k, l],
                                 "distance": d[k, l]}


def hausdorff_distance(A, B):
    """Symmetric Hausdorff distance between two finite point sets."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return max(float(cKDTree(B).query(A)[0].max()), float(cKDTree(A).query(B)[0].max()))


def _grid(xlo, xhi, ylo, yhi, nx, ny):
    xs = np.linspace(xlo, xhi, nx)
    ys = np.linspace(ylo, yhi, ny)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()]), (ny, nx), float(np.hypot(xs[1] - xs[0],
                                                                              ys[1] - ys[0]))


def _level_trace(model, P, shape, b, level_tol):
    """Points of the grid ``P`` on the level set ``B = b``, plus refined
    points started from cells the level set may cross."""
    B, ok = _B_masked(model, P)
    G = B - b
    r = np.where(ok, np.hypot(G[:, 0], G[:, 1]), np.inf)
    inside = r <= level_tol
    Gg = G.reshape(shape + (2,))
    var = np.zeros(shape)
    for axis in (0, 1):
        d = np.linalg.norm(np.diff(Gg, axis=axis), axis=-1)
        d = np.where(np.isfinite(d), d, 0.0)
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        var[tuple(lo)] = np.maximum(var[tuple(lo)], d)
        var[tuple(hi)] = np.maximum(var[tuple(hi)], d)
    cand = ok & ~inside & (r <= var.ravel() + level_tol)
    pts = [P[inside]]
    if cand.any():
        Q, res = _level_solve(model, P[cand], b, level_tol)
        pts.append(Q[res <= level_tol])
    return np.vstack(pts)


def _member_trace(model, P, fam):
    c = model.scale if model.scale > 0 else 1.0
    return P[P @ np.asarray(fam.normal) >= fam.offset / c]


def _touches(P, window, cut, cell):
    xlo, xhi, ylo, yhi = window
    if len(P) == 0:
        return np.zeros(0, bool)
    near = np.zeros(len(P), bool)
    for side, (val, coord) in enumerate(((xlo, 0), (xhi, 0), (ylo, 1), (yhi, 1))):
        if cut[side]:
            near |= np.abs(P[:, coord] - val) <= 1.5 * cell
    return near


def estimate_S_u(model: FibrationModel, u, grid: GridSpec | None = None) -> BaseSpaceEstimate:
    """Trace of the base space of direction ``u`` in the base plane.

    For upward ``u`` this is the level set ``B(q) = (u1, u2) / u3``; for a
    horizontal ``u`` it is the region covered by the boundary family of that
    direction.  Raises :class:`EmptyEstimate` if nothing is found.
    """
    grid = grid or GridSpec()
    u = unit(u)
    fam = None
    if abs(u[2]) <= 1e-12:
        for f in model.generator.boundary:
            if np.linalg.norm(f.dir - u) <= 1e-12:
                fam = f
        if fam is None:
            raise EmptyEstimate(f"horizontal direction {u} is not a boundary direction")
        b = None
        level_tol = 0.0
    elif u[2] < 0:
        raise ValueError("base spaces are traced for upward or boundary directions only")
    else:
        b = u[:2] / u[2]
        level_tol = 1e-6 * (1.0 + float(np.hypot(*b)))

    def trace(window, nx, ny):
        P, shape, cell = _grid(*window, nx, ny)
        if fam is not None:
            return _member_trace(model, P, fam), cell
        return _level_trace(model, P, shape, b, level_tol), cell

    coarse = []
    for R in grid.radii:
        window, cut = base_window(model, R, clip=fam is None)
        T, cell = trace(window, grid.n_coarse, grid.n_coarse)
        edge = _touches(T, window, cut, cell)
        coarse.append({"R": R, "points": T, "cell": cell, "edge": edge, "window": window})
    first = next((c for c in coarse if len(c["points"])), None)
    if first is None:
        raise EmptyEstimate(f"direction {u} not attained on the grids")
    # fine trace around the first coarse trace
    P, cell = first["points"], first["cell"]
    if first is coarse[0]:
        w0, _ = base_window(model, min(grid.fine_clip, grid.radii[0]), clip=fam is None)
        lo = np.maximum(P.min(0) - 5 * cell, [w0[0], w0[2]])
        hi = np.minimum(P.max(0) + 5 * cell, [w0[1], w0[3]])
        n = np.minimum(np.ceil((hi - lo) / grid.fine_step).astype(int) + 1, grid.fine_max)
        n = np.maximum(n, 3)
        T, fcell = trace((lo[0], hi[0], lo[1], hi[1]), int(n[0]), int(n[1]))
        if len(T):
            P, cell = T, fcell
    conv, wit = _convexity(P, 2.0 * cell, grid.n_segments, grid.seed)
    # compactness from the growth of the last two coarse traces
    radii = [_half_diag(c["points"]) for c in coarse]
    c_mid, c_last = coarse[-2], coarse[-1]
    if len(c_mid["points"]) == 0:
        compact = Compactness.UNKNOWN
    elif abs(radii[-1] - radii[-2]) <= 2.0 * c_last["cell"] and not c_last["edge"].any():
        compact = Compactness.COMPACT
    elif radii[-1] >= 2.0 * radii[-2]:
        compact = Compactness.NONCOMPACT
    else:
        compact = Compactness.UNKNOWN
    rec = np.zeros((0, 2))
    angle_tol = ANGLE_TOL
    if compact != Compactness.COMPACT and c_last["edge"].any():
        core = P[np.argmin(np.hypot(P[:, 0], P[:, 1]))]
        E = c_last["points"][c_last["edge"]] - core
        E = E[np.hypot(E[:, 0], E[:, 1]) > 0]
        rec = E / np.hypot(E[:, 0], E[:, 1])[:, None]
        angle_tol = max(ANGLE_TOL, 2.0 * c_last["cell"] / c_last["R"])
    evidence = {
        "coarse": [{"R": c["R"], "count": len(c["points"]), "half_diag": r,
                    "touches_cut": bool(c["edge"].any()), "cell": c["cell"]}
                   for c, r in zip(coarse, radii)],
        "source": "boundary_family" if fam is not None else "level_set",
        "convexity_witness": wit,
    }
    return BaseSpaceEstimate(u, P, conv, compact, rec, cell, level_tol, angle_tol, evidence)


def classify_support_line(estimate: BaseSpaceEstimate, m) -> SupportClass:
    """Support class of the direction ``m`` (base plane) for the estimated set.

    A side of the lines parallel to ``m`` is bounded iff no recession direction
    points to it; the contact set is unbounded iff some recession direction
    is parallel to ``m``.
    """
    if len(estimate.points) == 0:
        raise EmptyEstimate("support lines of an empty set")
    m = _unit2(m)
    if estimate.compactness == Compactness.COMPACT or len(estimate.recession) == 0:
        return SupportClass.STRICT
    nu = np.array([-m[1], m[0]])
    h = estimate.recession @ nu
    tol = estimate.angle_tol
    sides = [bool(np.all(h <= tol)), bool(np.all(-h <= tol))]
    if not any(sides):
        return SupportClass.ALL_INTERSECT
    if np.any(np.abs(h) <= tol):
        return SupportClass.NONSTRICT
    return SupportClass.STRICT


# --- continuity at infinity ------------------------------------------------------

class ContinuityVerdict(str, Enum):
    CONVERGING = "Converging"
    NOT_CONVERGING = "NotConverging"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ContinuityTable:
    u: np.ndarray
    radii: np.ndarray
    shell_max: np.ndarray
    failures: list
    verdict: ContinuityVerdict
    angle_tol: float = ANGLE_TOL

    def to_dict(self):
        return jsonable({"u": self.u, "radii": self.radii, "shell_max": self.shell_max,
                         "failures": self.failures, "verdict": self.verdict,
                         "angle_tol": self.angle_tol})


def _cone_directions(u, half_angle, n_phi=8, n_rho=3):
    e1, e2 = orthonormal_complement(u)
    dirs = [u]
    for rho in np.arange(1, n_rho + 1) / n_rho:
        a = rho * half_angle
        for phi in np.linspace(0, 2 * np.pi, n_phi, endpoint=False):
            dirs.append(np.cos(a) * u + np.sin(a) * (np.cos(phi) * e1 + np.sin(phi) * e2))
    return np.array(dirs)


def probe_continuity_at_infinity(model: FibrationModel, u, delta=0.1,
                                 radii=2.0 ** np.arange(0, 21), angle_tol=ANGLE_TOL):
    """Angle between the field and ``u`` on shells around the axis ``±u``.

    At radius ``r`` the probe cone has half-angle ``delta * sqrt(r0 / r)``, so
    the sample points leave every bounded set while their direction tends to
    ``±u``.  Angles are between lines (sign of the field is ignored).
    The verdict asks for non-increasing shell maxima over the outer half of
    the usable shells and a final maximum below ``angle_tol``; shells with
    any failed evaluation (including the evaluation cap) are left out and
    listed in ``failures``.
    """
    if not 0 < delta < np.pi / 4:
        raise ValueError("cone half-angle must lie in (0, pi/4)")
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and increasing")
    u = unit(u)
    shell = np.full(radii.size, np.nan)
    failures = []
    for k, r in enumerate(radii):
        a = delta * np.sqrt(radii[0] / r)
        D = np.vstack([_cone_directions(u, a), _cone_directions(-u, a)])
        X = r * D
        V, st = field_at_many(model, X)
        ok = field_valid(st)
        if not ok.all():
            codes_seen = {int(c): int((st == c).sum()) for c in np.unique(st[~ok])}
            failures.append({"radius": r, "failed": int((~ok).sum()), "status": codes_seen})
        if ok.any():
            c = np.clip(np.abs(V[ok] @ u), 0.0, 1.0)
            shell[k] = float(np.max(np.arccos(c)))
    good = np.isfinite(shell)
    # a shell with any failure is left out of the verdict
    bad_r = {f["radius"] for f in failures}
    use = good & np.array([r not in bad_r for r in radii])
    vals = shell[use]
    if vals.size < 3:
        verdict = ContinuityVerdict.INCONCLUSIVE
    elif vals[-1] >= angle_tol:
        verdict = ContinuityVerdict.NOT_CONVERGING
    elif np.all(np.diff(tail := vals[vals.size // 2:]) <= 1e-12 + 1e-9 * tail[:-1]):
        verdict = ContinuityVerdict.CONVERGING
    else:
        verdict = ContinuityVerdict.INCONCLUSIVE
    return ContinuityTable(u, radii, shell, failures, verdict, angle_tol)


# --- parallel plane pushoff -------------------------------------------------------

@dataclass
class PushoffSample:
    t: float
    angle: float | None
    found: bool
    n_roots: int = 0
    spread: float = 0.0


@dataclass
class PushoffCurve:
    normal: np.ndarray
    ref: np.ndarray
    samples: list

    @property
    def plane(self):
        return AffinePlane(self.normal)

    def found(self):
        return np.array([s.found for s in self.samples], dtype=bool)

    def ts(self):
        return np.array([s.t for s in self.samples])

    def angles(self):
        return np.array([s.angle if s.found else np.nan for s in self.samples])

    @classmethod
    def from_angles(cls, ts, angles, normal=(0.0, 1.0, 0.0), ref=(0.0, 0.0, 1.0)):
        """Curve from explicit values; ``None`` or NaN marks a missing sample."""
        samples = []
        for t, a in zip(ts, angles):
            miss = a is None or not np.isfinite(a)
            samples.append(PushoffSample(float(t), None if miss else float(a), not miss))
        return cls(as_unit(normal), as_unit(ref), samples)

    def to_dict(self):
        return jsonable({"normal": self.normal, "ref": self.ref,
                         "samples": [[s.t, s.angle, s.found, s.n_roots, s.spread]
                                     for s in self.samples]})


def _plane_angles(V, n, ref):
    """Vectorised :func:`circle_angle` for rows of ``V`` lying in ``n``-perp."""
    if len(V) == 0:
        return []
    return list(np.arctan2(V @ np.cross(n, ref), V @ ref))


def pushoff_plane(u, m):
    """Unit normal of ``span{u, (m, 0)}``."""
    u = unit(u)
    mm = np.asarray(m, dtype=float).reshape(2)
    return unit(np.cross(u, np.array([mm[0], mm[1], 0.0])))


def pushoff_gamma(model: FibrationModel, u, m, t_range=(-5.0, 5.0), n_samples=201,
                  s_window=50.0, n_scan=4001) -> PushoffCurve:
    """Direction of the fibers lying in each parallel plane ``<x, n> = t``.

    ``n`` is the unit normal of ``span{u, (m, 0)}``.  A fiber over ``q`` lies in
    the plane iff ``<(q, 0), n> = t`` and ``<(B(q), 1), n> = 0``; the second
    condition is solved along the line of the first by a sign scan over
    ``|s| <= s_window`` followed by Brent's method.  Boundary lines are
    included when their direction lies in the plane.
    """
    u = unit(u)
    n = pushoff_plane(u, m)
    plane = AffinePlane(n)
    ts = np.linspace(t_range[0], t_range[1], n_samples)
    samples = []
    n12, n3 = n[:2], n[2]
    nn = float(np.dot(n12, n12))
    tau = np.array([-n12[1], n12[0]]) / np.sqrt(nn) if nn > 0 else np.zeros(2)
    S = np.linspace(-s_window, s_window, n_scan)
    c = model.scale if model.scale > 0 else 1.0

    def angle_of(V):
        return circle_angle(V, plane, u)

    one_param_closed = model.is_one_param and np.linalg.norm(np.cross(n, [0.0, 1.0, 0.0])) < 1e-12
    one_param_roots = None
    if model.is_one_param and not one_param_closed:
        # fibers in plane y = c lie in the plane iff <V(c), n> = 0, for every t
        ys = np.linspace(-s_window, s_window, n_scan)
        th = model.spec.angle(model._to_gen(ys))
        g = np.sin(th) * n[0] + np.cos(th) * n[2]
        idx = np.flatnonzero((g[:-1] * g[1:] < 0) | (g[:-1] == 0))
        one_param_roots = [ys[i] for i in idx]
    for t in ts:
        angles = []
        if one_param_closed:
            y = t / n[1]
            th = float(model.spec.angle(model._to_gen(np.array([y])))[0])
            angles.append(angle_of(np.array([np.sin(th), 0.0, np.cos(th)])))
        elif one_param_roots is not None:
            for y in one_param_roots:
                th = float(model.spec.angle(model._to_gen(np.array([y])))[0])
                V = np.array([np.sin(th), 0.0, np.cos(th)])
                V = V - np.dot(V, n) * n
                angles.append(angle_of(unit(V)))
        elif nn > 1e-24:
            q0 = t * n12 / nn
            Q = q0 + S[:, None] * tau
            B, ok = _B_masked(model, Q)
            g = B @ n12 + n3
            zero_tol = 1e-12 * (1.0 + np.abs(B).sum(1))
            g = np.where(np.abs(g) <= zero_tol, 0.0, g)
            Broots = [B[ok & (g == 0.0)]]
            both = ok[:-1] & ok[1:]
            for i in np.flatnonzero(both & (g[:-1] * g[1:] < 0)):
                def h(s):
                    return float(model.B(q0 + s * tau) @ n12 + n3)
                s0 = brentq(h, S[i], S[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                Broots.append(model.B(q0 + s0 * tau).reshape(1, 2))
            Broots = np.vstack(Broots)
            if len(Broots):
                V = np.column_stack([Broots, np.ones(len(Broots))])
                V -= np.outer(V @ n, n)
                V /= np.linalg.norm(V, axis=1)[:, None]
                angles.append(angle_of(V[0]))
                angles.extend(_plane_angles(V[1:], n, u))
        for fam in model.generator.boundary:
            if abs(np.dot(fam.dir, n)) > 1e-12:
                continue
            k = float(np.dot(fam.normal, n12))
            if abs(k) > 1e-12:
                if t / k >= fam.offset / c:
                    angles.append(angle_of(fam.dir))
            elif t == 0.0:
                angles.append(angle_of(fam.dir))
        if angles:
            d = (np.asarray(angles) - angles[0]) % np.pi
            spread = float(np.max(np.minimum(d, np.pi - d)))
            samples.append(PushoffSample(float(t), float(angles[0]), True, len(angles), spread))
        else:
            samples.append(PushoffSample(float(t), None, False))
    return PushoffCurve(n, u, samples)


def check_monotone_pushoff(curve: PushoffCurve, tol=BACKTRACK_TOL):
    """Weak monotonicity of the pushoff angle across found samples.

    Angles are of lines, so they are unwrapped modulo pi first.
    """
    found = curve.found()
    if found.sum() < 3:
        raise ValueError("need at least three found samples")
    t = curve.ts()[found]
    a = np.unwrap(curve.angles()[found], period=np.pi)
    back_up = float(np.max(np.maximum.accumulate(a) - a))
    back_down = float(np.max(a - np.minimum.accumulate(a)))
    summary = {"found": int(found.sum()), "samples": len(curve.samples),
               "backtrack_increasing": back_up, "backtrack_decreasing": back_down}
    if min(back_up, back_down) <= tol:
        summary["direction"] = "increasing" if back_up <= tol else "decreasing"
        return CheckReport("no_canyon", True, summary, error=CanyonFound)
    left_min, left_max = np.minimum.accumulate(a), np.maximum.accumulate(a)
    right_min = np.minimum.accumulate(a[::-1])[::-1]
    right_max = np.maximum.accumulate(a[::-1])[::-1]
    witness = None
    for j in range(1, len(a) - 1):
        if a[j] - left_min[j - 1] > tol and a[j] - right_min[j + 1] > tol:
            i = int(np.argmin(a[:j]))
            k = j + 1 + int(np.argmin(a[j + 1:]))
        elif left_max[j - 1] - a[j] > tol and right_max[j + 1] - a[j] > tol:
            i = int(np.argmax(a[:j]))
            k = j + 1 + int(np.argmax(a[j + 1:]))
        else:
            continue
        witness = {"t": [t[i], t[j], t[k]], "angle": [a[i], a[j], a[k]]}
        break
    return CheckReport("no_canyon", False, summary, witness, CanyonFound)


# --- structure classification --------------------------------------------------

class StructureKind(str, Enum):
    SKEW = "Skew"
    SKEW_LIKE = "SkewLike"
    ONE_PARAMETER = "OneParameter"
    HALF_AND_HALF = "HalfAndHalf"
    EXOTIC = "Exotic"
    INDETERMINATE = "Indeterminate"


@dataclass
class StructureVerdict:
    kind: StructureKind
    evidence: list
    reasons: list

    def to_dict(self):
        return jsonable({"verdict": self.kind, "reasons": self.reasons,
                         "evidence": [{"name": n, "result": r} for n, r in self.evidence]})


@dataclass
class SuiteSettings:
    """Sample sizes of :func:`run_structure_suite`."""

    n_pairs: int = 2000
    n_lines: int = 300
    n_gauss: int = 4000
    gauss_box: float = 5.0
    n_midpoints: int = 200
    pushoff_samples: int = 101
    t_range: tuple = (-5.0, 5.0)
    half_plane_normals: int = 8
    grid: GridSpec = field(default_factory=lambda: GridSpec(fine_max=401))

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("n_pairs", "n_lines", "n_gauss", "gauss_box",
                                           "n_midpoints", "pushoff_samples", "half_plane_normals")}
        d["t_range"] = list(self.t_range)
        d["grid"] = self.grid.to_dict()
        return d


@dataclass
class StructureEvidence:
    """Everything :func:`classify_structure` looks at, for one model."""

    skew_criterion: CheckReport
    oracle: CheckReport
    gauss: GaussSampleSet
    antipodal: list
    gauss_convexity: CheckReport | None
    estimates: list            # (u, BaseSpaceEstimate or error message)
    continuity: list           # ContinuityTable for compact directions
    pushoffs: list             # (u, m, PushoffCurve, CheckReport or None)
    great_circle: dict
    boundary_families: int
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        ests = []
        for u, e in self.estimates:
            ests.append({"u": u, "estimate": e if isinstance(e, str) else e.to_dict()})
        return jsonable({
            "skew_criterion": self.skew_criterion, "oracle": self.oracle,
            "gauss": self.gauss.to_dict(),
            "antipodal_pairs": [[self.gauss.directions[i], self.gauss.directions[j]]
                                for i, j in self.antipodal],
            "gauss_convexity": self.gauss_convexity, "base_spaces": ests,
            "continuity": self.continuity,
            "pushoffs": [{"u": u, "m": m, "found": int(c.found().sum()),
                          "samples": len(c.samples), "no_canyon": r}
                         for u, m, c, r in self.pushoffs],
            "great_circle": self.great_circle, "boundary_families": self.boundary_families,
            "settings": self.settings,
        })


PROBE_TARGETS = np.array([
    [0.0, 0.0, 1.0], [0.3, 0.0, 1.0], [0.0, 0.3, 1.0], [-0.5, 0.2, 1.0], [0.4, -0.7, 1.0],
])


def _great_circle_fit(dirs):
    """Normal of the best-fitting great circle and the RMS distance to it."""
    _, sv, vt = np.linalg.svd(dirs, full_matrices=True)
    normal = vt[-1]
    rms = float(sv[-1] / np.sqrt(len(dirs))) if len(sv) == 3 else 0.0
    return normal, rms


def _constant_on_planes(model, normal, seed, n=200, tol=1e-8):
    """Whether the field is constant on each plane ``<x, normal> = t``."""
    rng = np.random.default_rng(seed)
    e1, e2 = orthonormal_complement(normal)
    X = rng.uniform(-5, 5, (n, 3))
    a, b = rng.uniform(-5, 5, (2, n))
    Y = X + a[:, None] * e1 + b[:, None] * e2
    V, s1 = field_at_many(model, X)
    W, s2 = field_at_many(model, Y)
    ok = field_valid(s1) & field_valid(s2)
    if not ok.any():
        return False, np.inf
    dev = np.abs(np.abs(np.einsum("ij,ij->i", V[ok], W[ok])) - 1.0)
    return bool(ok.all() and dev.max() <= tol), float(dev.max())


def _probe_directions(model, gauss, seed):
    """Directions whose base spaces are estimated: ``(0,0,1)`` when it is a
    field value, sampled field values near a few fixed targets, and the
    boundary directions."""
    out = []
    up = gauss.directions[:, 2] > 1e-9
    if not up.any():
        return [fam.dir for fam in model.generator.boundary]
    tree = cKDTree(gauss.directions[up])
    src = gauss.sources[up]
    Q, st = base_points(model, src)
    for k, target in enumerate(PROBE_TARGETS):
        w = unit(target)
        _, idx = tree.query(w, k=min(4, int(up.sum())))
        idx = np.atleast_1d(idx)
        if k == 0 and not model.is_one_param:
            starts = Q[idx][st[idx] == codes.OK]
            if len(starts):
                ok, _ = direction_realized(model, w, starts[None, :, :])
                if ok[0]:
                    out.append(w)
                    continue
        cand = gauss.directions[up][idx[0]]
        if not any(np.linalg.norm(cand - v) < 1e-6 for v in out):
            out.append(cand)
    out.extend(fam.dir for fam in model.generator.boundary)
    return out


def run_structure_suite(model: FibrationModel, seed=42, settings: SuiteSettings | None = None,
                        workers=1) -> StructureEvidence:
    """Run every check that :func:`classify_structure` needs.

    Independent checks may run on ``workers`` threads; results are collected
    by name, so the evidence does not depend on completion order.
    """
    from concurrent.futures import ThreadPoolExecutor

    cfg = settings or SuiteSettings()
    box = ((-cfg.gauss_box, cfg.gauss_box),) * 3
    jobs = {
        "skew_criterion": lambda: check_skew_criterion(model, cfg.n_pairs, seed),
        "oracle": lambda: oracle_disjointness(model, cfg.n_lines, seed),
        "gauss": lambda: sample_gauss_image(model, box, cfg.n_gauss, seed),
    }
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futs = {k: pool.submit(f) for k, f in jobs.items()}
        res = {k: f.result() for k, f in futs.items()}
    gauss = res["gauss"]
    anti = detect_antipodal(gauss)
    dirs = _probe_directions(model, gauss, seed)

    def estimate(u):
        try:
            return u, estimate_S_u(model, u, cfg.grid)
        except EmptyEstimate as exc:
            return u, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        estimates = list(pool.map(estimate, dirs))
    good = [e for _, e in estimates if not isinstance(e, str)]
    all_compact = bool(good) and all(e.compactness == Compactness.COMPACT for e in good)
    gconv = None
    if all_compact and len(gauss) >= 2:
        gconv = check_gauss_convexity(gauss, model, cfg.n_midpoints, seed)
    continuity = [probe_continuity_at_infinity(model, u) for u, e in estimates
                  if not isinstance(e, str) and e.compactness == Compactness.COMPACT][:1]
    # great-circle test of the Gauss image, then pushoffs
    normal, rms = _great_circle_fit(gauss.directions)
    on_circle = rms <= 1e-6
    gc = {"normal": normal, "rms_distance": rms, "on_great_circle": on_circle}
    pushoffs = []
    if on_circle and np.hypot(normal[0], normal[1]) > 1e-9:
        m_lift = unit(np.cross(normal, [0.0, 0.0, 1.0]))
        inplane = gauss.directions[np.abs(gauss.directions @ m_lift) < 1 - 1e-6]
        u = inplane[0] if len(inplane) else gauss.directions[0]
        const, dev = _constant_on_planes(model, normal, seed)
        gc.update(constant_on_planes=const, max_deviation=dev)
        curve = pushoff_gamma(model, u, m_lift[:2], cfg.t_range, cfg.pushoff_samples)
        gc["pushoff_found_all"] = bool(curve.found().all())
        pushoffs.append((u, m_lift[:2], curve, _monotone_or_none(curve)))
    else:
        gc.update(constant_on_planes=False, pushoff_found_all=False)
        u = dirs[0] if dirs else np.array([0.0, 0.0, 1.0])
        if abs(u[2]) > 1e-12:
            for m in ((1.0, 0.0), (0.0, 1.0)):
                curve = pushoff_gamma(model, u, m, cfg.t_range, cfg.pushoff_samples)
                pushoffs.append((u, np.array(m), curve, _monotone_or_none(curve)))
    return StructureEvidence(res["skew_criterion"], res["oracle"], gauss, anti, gconv, estimates,
                             continuity, pushoffs, gc, len(model.generator.boundary),
                             {"seed": seed, **cfg.to_dict()})


def _monotone_or_none(curve):
    try:
        return check_monotone_pushoff(curve)
    except ValueError:
        return None


def _skew_on_half_plane(estimates, n_normals):
    """A half-plane through the origin meeting every trace in at most one point."""
    for a in np.linspace(0, 2 * np.pi, n_normals, endpoint=False):
        nu = np.array([np.cos(a), np.sin(a)])
        ok = True
        for e in estimates:
            P = e.points[e.points @ nu > e.dist_tol]
            if _half_diag(P) > e.dist_tol:
                ok = False
                break
        if ok:
            return nu
    return None


def classify_structure(model: FibrationModel, evidence: StructureEvidence | None = None,
                       seed=42, settings: SuiteSettings | None = None) -> StructureVerdict:
    """Heuristic structural category of the fibration from sampled evidence.

    The rules are applied in order: Skew, OneParameter, Exotic, HalfAndHalf,
    SkewLike; anything else, and any failed consistency check, is
    Indeterminate.  The verdict depends on the evidence only.
    """
    if evidence is None:
        evidence = run_structure_suite(model, seed, settings)
    ev = evidence
    good = [(u, e) for u, e in ev.estimates if not isinstance(e, str)]
    ests = [e for _, e in good]
    one_param = bool(ev.great_circle.get("on_great_circle")
                     and ev.great_circle.get("constant_on_planes")
                     and ev.great_circle.get("pushoff_found_all"))
    items = [("skew_criterion", ev.skew_criterion.to_dict()), ("oracle", ev.oracle.to_dict()),
             ("antipodal_pairs", len(ev.antipodal)), ("great_circle", ev.great_circle),
             ("base_spaces", [{"u": u, "convexity": e.convexity, "compactness": e.compactness,
                               "singleton": e.is_singleton()} for u, e in good])]
    violations = []
    if not ev.skew_criterion.passed:
        violations.append("skew_criterion")
    if not ev.oracle.passed:
        violations.append("oracle_disjointness")
    if not one_param:
        for u, m, c, r in ev.pushoffs:
            if r is not None and not r.passed:
                violations.append("no_canyon")
        for e in ests:
            if e.convexity == Convexity.NONCONVEX:
                violations.append("S_u_convexity")
    if ev.gauss_convexity is not None:
        items.append(("gauss_convexity", ev.gauss_convexity.to_dict()))
        if not ev.gauss_convexity.passed:
            violations.append("gauss_convexity")
    compact = [e for e in ests if e.compactness == Compactness.COMPACT]
    if compact:
        dirs = ev.gauss.directions
        for e in compact:
            if len(dirs) and np.min(np.linalg.norm(dirs + e.u, axis=1)) <= ANTIPODAL_TOL:
                violations.append("compact_base_has_antipode")
        if ev.continuity:
            items.append(("continuity", ev.continuity[0].to_dict()))
            if ev.continuity[0].verdict != ContinuityVerdict.CONVERGING:
                violations.append("continuity_at_infinity")
    if violations:
        reasons = [f"failed: {v}" for v in dict.fromkeys(violations)]
        return StructureVerdict(StructureKind.INDETERMINATE, items, reasons)
    zero_defects = ev.skew_criterion.summary.get("zero_defect_pairs", 0)
    if (zero_defects == 0 and ev.boundary_families == 0 and ests
            and all(e.is_singleton() and e.compactness == Compactness.COMPACT for e in ests)):
        return StructureVerdict(StructureKind.SKEW, items,
                                ["no zero skew defects", "every probed base space is a point"])
    if one_param:
        return StructureVerdict(StructureKind.ONE_PARAMETER, items,
                                ["field directions lie on a great circle",
                                 "field constant on a family of parallel planes",
                                 "every plane of the family contains a fiber"])
    if ev.antipodal:
        return StructureVerdict(StructureKind.EXOTIC, items,
                                ["antipodal pair in the Gauss image",
                                 "field directions not on a great circle"])
    noncompact = [e for e in ests if e.compactness == Compactness.NONCOMPACT]
    if noncompact:
        nu = _skew_on_half_plane(ests, SuiteSettings().half_plane_normals)
        if nu is not None:
            return StructureVerdict(StructureKind.HALF_AND_HALF, items,
                                    ["some base space is noncompact",
                                     f"base spaces meet the half-plane <q, {nu.tolist()}> > 0 "
                                     "in at most one point"])
    if ests and len(compact) == len(ests) and any(not e.is_singleton() for e in ests):
        return StructureVerdict(StructureKind.SKEW_LIKE, items,
                                ["every probed base space is compact and convex",
                                 "some base space is not a point"])
    return StructureVerdict(StructureKind.INDETERMINATE, items, ["no rule applies"])
