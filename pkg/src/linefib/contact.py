"""Contact invariants of the plane field orthogonal to a line fibration.

Two independent routes are kept side by side:

* the chain rule through the generator, which gives the derivative of the
  field exactly (up to the accuracy of the generator Jacobian) and from it the
  Jacobian of the generator re-based on the plane orthogonal to the fiber;
* central differences of the ambient field, which give ``curl V . V`` and the
  rank of ``grad V`` on ``V^perp`` without looking at the generator.

The trace of the quadratic form ``h -> det(h, J h)`` of the re-based Jacobian
equals ``curl V . V`` at the same point; scans compare the two.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NearSeam, OutsideDomain
from .evaluator import FibrationModel, base_points, field_at_many, field_valid
from .generators import _points
from .geom import as_vec
from .kernels import codes

CONTACT_MARGIN = 1e-3
RANK_TOL = 1e-6
EIGEN_TOL_ANALYTIC = 1e-6
EIGEN_TOL_FD = 1e-4
FD_REL_STEP = 1e-5
SEAM_FACTOR = 10.0
CONSISTENCY_ABS = 1e-4
CONSISTENCY_REL = 1e-2


class JacobianMethod(str, Enum):
    ANALYTIC = "Analytic"
    CENTRAL_DIFFERENCE = "CentralDifference"


@dataclass(frozen=True)
class Jacobian2:
    """2x2 matrix ``[[a, b], [c, d]]``; columns are partial derivatives."""

    a: float
    b: float
    c: float
    d: float
    method: JacobianMethod = JacobianMethod.ANALYTIC
    h: float | None = None

    def __post_init__(self):
        if not np.all(np.isfinite([self.a, self.b, self.c, self.d])):
            raise ValueError("Jacobian entries must be finite")
        if self.method == JacobianMethod.CENTRAL_DIFFERENCE and self.h is None:
            raise ValueError("a difference Jacobian records its step")

    @classmethod
    def from_matrix(cls, M, method=JacobianMethod.ANALYTIC, h=None):
        M = np.asarray(M, dtype=float).reshape(2, 2)
        return cls(float(M[0, 0]), float(M[0, 1]), float(M[1, 0]), float(M[1, 1]),
                   JacobianMethod(method), h)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    def to_dict(self):
        return {"matrix": self.matrix.tolist(), "method": self.method.value, "h": self.h}


class EigenKind(str, Enum):
    COMPLEX_PAIR = "ComplexPair"
    DOUBLE_ZERO = "DoubleZero"
    VIOLATION = "Violation"


@dataclass(frozen=True)
class EigenClass:
    kind: EigenKind
    eigenvalues: tuple

    @property
    def violating_value(self):
        """The real nonzero eigenvalue of a violation, else ``None``."""
        if self.kind != EigenKind.VIOLATION:
            return None
        return float(max(self.eigenvalues, key=abs).real)

    def to_dict(self):
        return {"kind": self.kind.value,
                "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues]}


def _as_matrix(J):
    return J.matrix if isinstance(J, Jacobian2) else np.asarray(J, dtype=float).reshape(2, 2)


# --- pointwise algebra -------------------------------------------------------------

def eigen_classify(J, eigen_tol=EIGEN_TOL_ANALYTIC) -> EigenClass:
    """Eigenvalue class of a 2x2 matrix.

    ``ComplexPair`` when the discriminant ``(a-d)^2 + 4bc`` is below
    ``-eigen_tol``.  Otherwise the eigenvalues count as real; a discriminant
    in ``[-eigen_tol, 0)`` is read as a double root at ``(a+d)/2``.  Real
    eigenvalues all within ``eigen_tol`` of zero give ``DoubleZero``, anything
    else ``Violation``.
    """
    (a, b), (c, d) = _as_matrix(J)
    disc = (a - d) ** 2 + 4.0 * b * c
    r = np.sqrt(complex(disc))
    lam = ((a + d + r) / 2.0, (a + d - r) / 2.0)
    real = np.sqrt(max(disc, 0.0))
    if disc < -eigen_tol:
        kind = EigenKind.COMPLEX_PAIR
    elif max(abs(a + d + real), abs(a + d - real)) / 2.0 <= eigen_tol:
        kind = EigenKind.DOUBLE_ZERO
    else:
        kind = EigenKind.VIOLATION
    return EigenClass(kind, lam)


def _eigen_kinds(J, eigen_tol):
    """Vectorised :func:`eigen_classify` for ``(N, 2, 2)``; returns kind codes
    0 (complex pair), 1 (double zero), 2 (violation)."""
    a, b, c, d = J[:, 0, 0], J[:, 0, 1], J[:, 1, 0], J[:, 1, 1]
    disc = (a - d) ** 2 + 4.0 * b * c
    r = np.sqrt(np.maximum(disc, 0.0))
    big = np.maximum(np.abs(a + d + r), np.abs(a + d - r)) / 2.0
    return np.where(disc < -eigen_tol, 0, np.where(big <= eigen_tol, 1, 2))


_KINDS = (EigenKind.COMPLEX_PAIR, EigenKind.DOUBLE_ZERO, EigenKind.VIOLATION)


def quad_form(J, h):
    """``Q(h) = det(h, J h)``."""
    J = _as_matrix(J)
    h = as_vec(h, 2)
    return float(np.linalg.det(np.column_stack([h, J @ h])))


def quad_form_trace(J) -> float:
    """Trace of ``Q(h) = det(h, J h) = c h1^2 + (d - a) h1 h2 - b h2^2``,
    which is ``c - b``."""
    J = _as_matrix(J)
    return float(J[1, 0] - J[0, 1])


# --- generator Jacobian ----------------------------------------------------------

def _fd_step(p):
    return FD_REL_STEP * (1.0 + np.linalg.norm(p, axis=-1))


def _richardson(F, P, h):
    """Central-difference derivatives of ``F`` (rows -> rows) at the rows of
    ``P`` along every axis, with one Richardson halving.  ``F`` returns
    ``(values, ok)``; the result is ``(D, ok)`` with ``D[i, :, j]`` the
    derivative along axis ``j`` at point ``i``."""
    n, dim = P.shape
    hs = (h, h / 2.0)
    stencil = []
    for hk in hs:
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = 1.0
            stencil.append(P + hk[:, None] * e)
            stencil.append(P - hk[:, None] * e)
    vals, ok = F(np.vstack(stencil))
    m = vals.shape[1]
    vals = vals.reshape(2, dim, 2, n, m)
    ok = ok.reshape(2, dim, 2, n).all(axis=(0, 1, 2))
    D = np.empty((n, m, dim))
    for j in range(dim):
        d1 = (vals[0, j, 0] - vals[0, j, 1]) / (2.0 * hs[0][:, None])
        d2 = (vals[1, j, 0] - vals[1, j, 1]) / (2.0 * hs[1][:, None])
        D[:, :, j] = (4.0 * d2 - d1) / 3.0
    return D, ok


def _B_ok(model):
    def F(Q):
        ok = np.asarray(model.in_domain(Q)).reshape(-1)
        B = np.full((Q.shape[0], 2), np.nan)
        if ok.any():
            B[ok] = np.asarray(model.B(Q[ok])).reshape(-1, 2)
        return B, ok
    return F


def jacobians_B(model: FibrationModel, Q, method="auto", h=None):
    """Generator Jacobians at the rows of ``Q``.

    Returns ``(J, ok, method, h)`` with ``J`` of shape ``(N, 2, 2)``; ``ok`` is
    false where a stencil point leaves the domain.  ``method`` is
    ``"analytic"``, ``"fd"`` or ``"auto"`` (analytic when the generator has a
    closed-form Jacobian).
    """
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    if method == "auto":
        method = "analytic" if model.generator.spec.analytic_jacobian else "fd"
    if method == "analytic":
        if not model.generator.spec.analytic_jacobian:
            raise ValueError(f"{model.name} has no closed-form Jacobian")
        ok = np.asarray(model.in_domain(Q)).reshape(-1)
        J = np.full((Q.shape[0], 2, 2), np.nan)
        if ok.any():
            J[ok] = np.asarray(model.jac_B(Q[ok])).reshape(-1, 2, 2)
        return J, ok, JacobianMethod.ANALYTIC, None
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    hh = _fd_step(Q) if h is None else np.full(Q.shape[0], float(h))
    J, ok = _richardson(_B_ok(model), Q, hh)
    return J, ok, JacobianMethod.CENTRAL_DIFFERENCE, hh


def jacobian_B(model: FibrationModel, q, method="auto", h=None) -> Jacobian2:
    """Jacobian of the generator at ``q`` (base-plane coordinates).

    Raises :class:`OutsideDomain` off the domain and :class:`NearSeam` within
    ``10 h`` of a non-smooth locus of the generator.
    """
    q = as_vec(q, 2)
    if not bool(np.asarray(model.in_domain(q)).reshape(-1)[0]):
        raise OutsideDomain(f"{model.name}: {q.tolist()} is outside the domain")
    step = float(_fd_step(q)) if h is None else float(h)
    if float(np.asarray(model.seam_distance(q)).reshape(-1)[0]) <= SEAM_FACTOR * step:
        raise NearSeam(f"{model.name}: {q.tolist()} is within {SEAM_FACTOR * step:g} of a seam")
    J, ok, meth, hh = jacobians_B(model, q[None, :], method, None if h is None else step)
    if not ok[0]:
        raise OutsideDomain(f"{model.name}: difference stencil at {q.tolist()} leaves the domain")
    return Jacobian2.from_matrix(J[0], meth, None if hh is None else float(hh[0]))


# --- field derivatives ---------------------------------------------------------------

def _frames(V):
    """Oriented orthonormal frames ``(e1, e2)`` of ``V^perp`` with ``e1 x e2 = V``."""
    helper = np.where((np.abs(V[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    e1 = np.cross(helper, V)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(V, e1)
    return e1, e2


def _base_derivative(J, B, t):
    """``dq/dx = (I + t J)^-1 [I | -B]`` row by row; NaN where singular."""
    n = len(t)
    A = np.eye(2)[None] + t[:, None, None] * J
    R = np.concatenate([np.broadcast_to(np.eye(2), (n, 2, 2)), -B[:, :, None]], axis=2)
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    good = np.abs(det) > 1e-14 * (1.0 + np.abs(A).reshape(n, -1).max(1)) ** 2
    out = np.full((n, 2, 3), np.nan)
    if good.any():
        out[good] = np.linalg.solve(A[good], R[good])
    return out


def field_gradient(model: FibrationModel, X):
    """``grad V`` at the rows of ``X`` by the chain rule through the generator.

    Returns ``(G, V, q, status)``; ``G[i, k, j]`` is the derivative of ``V_k``
    along ``x_j``.  The plane-by-plane generator is differentiated in closed
    form; otherwise, with ``x = (q, 0) + t (B(q), 1)``,
    ``dq/dx = (I + t dB)^-1 [I | -B]`` and ``dV = (I - V V^T) dW / |W|`` for
    ``W = (B, 1)``.  Rows that are not generator fibers get NaN.
    """
    X, _ = _points(X, 3)
    n = X.shape[0]
    G = np.full((n, 3, 3), np.nan)
    V = np.full((n, 3), np.nan)
    c = model.scale
    if model.is_one_param:
        spec = model.spec
        y = model._to_gen(X[:, 1])
        th = spec.angle(y)
        dth = c * spec.angle_slope(y)
        V = np.column_stack([np.sin(th), np.zeros(n), np.cos(th)])
        G = np.zeros((n, 3, 3))
        G[:, 0, 1] = dth * np.cos(th)
        G[:, 2, 1] = -dth * np.sin(th)
        return G, V, X[:, :2].copy(), np.full(n, codes.OK, dtype=np.int64)
    Q, status = base_points(model, X)
    ok = status == codes.OK
    if ok.any():
        q = Q[ok]
        t = X[ok, 2]
        B = np.asarray(model.B(q)).reshape(-1, 2)
        J = np.asarray(model.jac_B(q)).reshape(-1, 2, 2)
        dq = _base_derivative(J, B, t)
        W = np.column_stack([B, np.ones(len(q))])
        w = np.linalg.norm(W, axis=1)
        Vk = W / w[:, None]
        dW = np.zeros((len(q), 3, 3))
        dW[:, :2, :] = J @ dq
        P = np.eye(3)[None] - Vk[:, :, None] * Vk[:, None, :]
        G[ok] = (P @ dW) / w[:, None, None]
        V[ok] = Vk
    return G, V, Q, status


def frame_jacobians(G, V):
    """Matrix of ``grad V`` on ``V^perp`` in the oriented frame of :func:`_frames`.

    This is the Jacobian of the generator re-based on the plane through the
    point orthogonal to its fiber.
    """
    e1, e2 = _frames(V)
    E = np.stack([e1, e2], axis=2)
    return np.transpose(E, (0, 2, 1)) @ G @ E


def frame_jacobian(model: FibrationModel, x) -> Jacobian2:
    """Re-based generator Jacobian at ``x`` (see :func:`frame_jacobians`)."""
    G, V, _, st = field_gradient(model, as_vec(x, 3)[None, :])
    if st[0] != codes.OK:
        raise OutsideDomain(f"{model.name}: no generator fiber through {list(x)}")
    return Jacobian2.from_matrix(frame_jacobians(G, V)[0])


def _field_ok(model):
    def F(Y):
        W, st = field_at_many(model, Y)
        return W, field_valid(st)
    return F


def field_gradient_fd(model: FibrationModel, X, h=None):
    """``grad V`` at the rows of ``X`` by central differences of the field.

    Step ``h = 1e-5 (1 + |x|)`` with one Richardson halving unless given.
    Returns ``(G, ok)``.
    """
    X, _ = _points(X, 3)
    hh = _fd_step(X) if h is None else np.full(X.shape[0], float(h))
    return _richardson(_field_ok(model), X, hh)


def _curl_dot(G, V):
    curl = np.column_stack([G[:, 2, 1] - G[:, 1, 2], G[:, 0, 2] - G[:, 2, 0],
                            G[:, 1, 0] - G[:, 0, 1]])
    return np.einsum("ij,ij->i", curl, V)


def curl_dot_V(model: FibrationModel, x, h=None) -> float:
    """``<curl V, V>`` at ``x`` from central differences of the field."""
    x = as_vec(x, 3)
    V, st = field_at_many(model, x[None, :])
    if not field_valid(st)[0]:
        raise OutsideDomain(f"{model.name}: field not evaluable at {x.tolist()}")
    G, ok = field_gradient_fd(model, x[None, :], h)
    if not ok[0]:
        raise OutsideDomain(f"{model.name}: difference stencil at {x.tolist()} not evaluable")
    return float(_curl_dot(G, V)[0])


def restricted_singular_values(G, V):
    """Singular values of ``grad V`` restricted to ``V^perp``, largest first."""
    e1, e2 = _frames(V)
    E = np.stack([e1, e2], axis=2)
    return np.linalg.svd(G @ E, compute_uv=False)


# --- scans ---------------------------------------------------------------------------

class ContactVerdict(str, Enum):
    CONTACT_TIGHT = "ContactTight"
    NOT_CONTACT = "NotContact"
    MIXED_VIOLATION = "MixedViolation"


def box_grid(lo=-5.0, hi=5.0, step=0.5):
    """Points of the cubic grid ``[lo, hi]^3`` with the given spacing."""
    g = np.arange(lo, hi + step / 2, step)
    A, B, C = np.meshgrid(g, g, g, indexing="ij")
    return np.column_stack([A.ravel(), B.ravel(), C.ravel()])


def _as_grid(grid):
    if isinstance(grid, dict):
        return box_grid(grid.get("lo", -5.0), grid.get("hi", 5.0), grid.get("step", 0.5))
    X = np.asarray(grid, dtype=float)
    if X.ndim == 1 and X.size == 3:
        return box_grid(*X)
    return X.reshape(-1, 3)


def _seam_excluded(model, X, G, q, status, h):
    """Points whose difference stencil may straddle a generator seam."""
    if model.is_one_param:
        d = np.asarray(model.seam_distance(X[:, :2])).reshape(-1)
        return d <= SEAM_FACTOR * h
    out = np.zeros(X.shape[0], dtype=bool)
    ok = status == codes.OK
    if not ok.any():
        return out
    d = np.asarray(model.seam_distance(q[ok])).reshape(-1)
    if not np.isfinite(d).any():
        return out
    # base points move by at most |dq/dx| h when x moves by h
    J = np.asarray(model.jac_B(q[ok])).reshape(-1, 2, 2)
    B = np.asarray(model.B(q[ok])).reshape(-1, 2)
    kappa = np.linalg.norm(_base_derivative(J, B, X[ok, 2]), ord=2, axis=(1, 2))
    kappa = np.where(np.isfinite(kappa), kappa, np.inf)
    out[ok] = d <= SEAM_FACTOR * h[ok] * np.maximum(kappa, 1.0)
    return out


@dataclass
class ContactReport:
    """Per-point contact data of a scan and the aggregated verdict.

    Arrays are aligned with ``points``; excluded points carry NaN (and rank
    -1) and are listed in ``excluded`` by reason.
    """

    points: np.ndarray
    jacobians: np.ndarray
    eigen: list
    trace_q: np.ndarray
    curl_dot_v: np.ndarray
    rank: np.ndarray
    singular_values: np.ndarray
    excluded: dict
    verdict: ContactVerdict
    reasons: list
    tolerances: dict
    witnesses: dict = field(default_factory=dict)

    @property
    def scanned(self):
        return self.rank >= 0

    @property
    def tight(self):
        """Contact structures induced by line fibrations are tight; this is a
        label carried over from theory, not something the scan computes."""
        return self.verdict == ContactVerdict.CONTACT_TIGHT

    def summary(self):
        s = self.scanned
        out = {"points": int(len(self.points)), "scanned": int(s.sum()),
               "excluded": {k: int(v) for k, v in self.excluded.items()},
               "verdict": self.verdict.value, "reasons": list(self.reasons),
               "tightness": "implied by theory, not computed" if self.tight else None,
               "tolerances": dict(self.tolerances)}
        if s.any():
            r = self.rank[s]
            out.update(
                rank_min=int(r.min()), rank_max=int(r.max()),
                trace_q_min_abs=float(np.min(np.abs(self.trace_q[s]))),
                curl_dot_v_range=[float(self.curl_dot_v[s].min()),
                                  float(self.curl_dot_v[s].max())],
                max_route_gap=float(np.max(np.abs(self.trace_q[s] - self.curl_dot_v[s]))),
                eigen_counts={k.value: int(sum(1 for e, ok in zip(self.eigen, s)
                                               if ok and e == k)) for k in EigenKind},
            )
        return out

    def records(self):
        """Per-point rows for export."""
        rows = []
        for i, x in enumerate(self.points):
            if self.rank[i] < 0:
                continue
            rows.append({"point": x.tolist(), "jacobian": self.jacobians[i].tolist(),
                         "eigen": self.eigen[i].value, "trace_q": float(self.trace_q[i]),
                         "curl_dot_v": float(self.curl_dot_v[i]), "rank": int(self.rank[i])})
        return rows

    def to_dict(self, records=False):
        d = self.summary()
        d["witnesses"] = {k: np.asarray(v).tolist() for k, v in self.witnesses.items()}
        if records:
            d["records"] = self.records()
        return d


def contact_verdict(model: FibrationModel, grid=None, contact_margin=CONTACT_MARGIN,
                    rank_tol=RANK_TOL, eigen_tol=EIGEN_TOL_ANALYTIC, h=None) -> ContactReport:
    """Scan ``grid`` (points, ``(lo, hi, step)`` or a dict of those; default
    ``[-5, 5]^3`` with step 0.5) and decide whether the plane field is contact.

    ``ContactTight`` needs rank at least 1 and ``|curl V . V| > contact_margin``
    at every scanned point; ``NotContact`` needs a rank-0 point at which
    ``curl V . V`` vanishes within the consistency tolerance.  Anything else,
    including an eigenvalue violation or disagreement between the
    chain-rule trace and the difference curl, is ``MixedViolation``.
    """
    X = _as_grid(box_grid() if grid is None else grid)
    n = X.shape[0]
    hh = _fd_step(X) if h is None else np.full(n, float(h))
    G, V, q, status = field_gradient(model, X)
    Gfd, fd_ok = _richardson(_field_ok(model), X, hh)
    Vx, st = field_at_many(model, X)
    valid = (status == codes.OK) & field_valid(st) & fd_ok & np.all(np.isfinite(G), axis=(1, 2))
    seam = _seam_excluded(model, X, G, q, status, hh) & valid
    use = valid & ~seam
    boundary = status == codes.BOUNDARY
    excluded = {"boundary_fiber": int(boundary.sum()), "solver": int((~valid & ~boundary).sum()),
                "seam": int(seam.sum())}

    Jf = np.full((n, 2, 2), np.nan)
    trace_q = np.full(n, np.nan)
    curl = np.full(n, np.nan)
    rank = np.full(n, -1, dtype=np.int64)
    sv = np.full((n, 2), np.nan)
    eig = [None] * n
    if use.any():
        Jf[use] = frame_jacobians(G[use], V[use])
        trace_q[use] = Jf[use, 1, 0] - Jf[use, 0, 1]
        curl[use] = _curl_dot(Gfd[use], Vx[use])
        sv[use] = restricted_singular_values(Gfd[use], Vx[use])
        rank[use] = np.sum(sv[use] > rank_tol, axis=1)
        for i, k in zip(np.flatnonzero(use), _eigen_kinds(Jf[use], eigen_tol)):
            eig[i] = _KINDS[k]

    tol = {"contact_margin": contact_margin, "rank_tol": rank_tol, "eigen_tol": eigen_tol,
           "consistency_abs": CONSISTENCY_ABS, "consistency_rel": CONSISTENCY_REL,
           "seam_factor": SEAM_FACTOR, "fd_rel_step": FD_REL_STEP if h is None else None}
    reasons, wit = [], {}
    if not use.any():
        verdict = ContactVerdict.MIXED_VIOLATION
        reasons.append("no scannable points")
    else:
        idx = np.flatnonzero(use)
        gap = np.abs(trace_q[idx] - curl[idx])
        bad_gap = gap > np.maximum(CONSISTENCY_ABS, CONSISTENCY_REL * np.abs(trace_q[idx]))
        viol = np.array([eig[i] == EigenKind.VIOLATION for i in idx])
        zero_rank = rank[idx] == 0
        small = (np.abs(curl[idx]) <= contact_margin) | (np.abs(trace_q[idx]) <= contact_margin)
        if viol.any():
            reasons.append("real nonzero eigenvalue of the re-based Jacobian")
            wit["eigen_violation"] = X[idx[viol][0]]
        if bad_gap.any():
            reasons.append("chain-rule trace and difference curl disagree")
            wit["route_gap"] = X[idx[bad_gap][0]]
        if zero_rank.any():
            nz = zero_rank & (np.abs(curl[idx]) > CONSISTENCY_ABS)
            if nz.any():
                reasons.append("rank 0 where the curl does not vanish")
                wit["rank0_curl"] = X[idx[nz][0]]
            wit["rank0"] = X[idx[zero_rank][0]]
        elif small.any():
            reasons.append("curl nearly vanishes at a point of positive rank")
            wit["small_curl"] = X[idx[small][0]]
        if reasons:
            verdict = ContactVerdict.MIXED_VIOLATION
        elif zero_rank.any():
            verdict = ContactVerdict.NOT_CONTACT
            reasons.append("grad V vanishes on V^perp at some point")
        else:
            verdict = ContactVerdict.CONTACT_TIGHT
            reasons.append("rank at least 1 and curl bounded away from zero everywhere scanned")
    return ContactReport(X, Jf, eig, trace_q, curl, rank, sv, excluded, verdict, reasons,
                         tol, wit)


def semidegeneracy_scan(model: FibrationModel, grid=None, rank_tol=RANK_TOL, h=None):
    """Extremes of the rank of ``grad V`` on ``V^perp`` over the grid, from
    central differences, with a witness point for each extreme."""
    X = _as_grid(box_grid() if grid is None else grid)
    hh = _fd_step(X) if h is None else np.full(X.shape[0], float(h))
    G, ok = _richardson(_field_ok(model), X, hh)
    V, st = field_at_many(model, X)
    ok &= field_valid(st)
    if not ok.any():
        return {"min_rank": None, "max_rank": None, "scanned": 0, "failed": int(len(X))}
    sv = restricted_singular_values(G[ok], V[ok])
    r = np.sum(sv > rank_tol, axis=1)
    P = X[ok]
    return {"min_rank": int(r.min()), "max_rank": int(r.max()),
            "min_witness": P[int(np.argmin(r))].tolist(),
            "max_witness": P[int(np.argmax(r))].tolist(),
            "scanned": int(ok.sum()), "failed": int((~ok).sum()), "rank_tol": rank_tol}


CANONICAL_RANK_ONE = {
    "general": lambda a, b: np.array([[a, -b], [a * a / b, -a]]),
    "upper": lambda a, b: np.array([[0.0, b], [0.0, 0.0]]),
    "lower": lambda a, b: np.array([[0.0, 0.0], [b, 0.0]]),
}
