"""Pure-numpy kernels, vectorised over points.

This is the fallback path (``LINEFIB_DISABLE_JIT=1``) and the reference the
numba kernels are tested against.  All functions take ``(N, 2)`` or ``(N, 3)``
float arrays.
"""
import numpy as np

from .codes import (
    BOUNDARY, CONSTANT, DISK, ELLIPSE, EXOTIC_TAN, FAT_HELICOID, HALF_HALF, HOPF,
    IDENTITY, NO_CONVERGENCE, OK, ONE_PARAM, ONE_PARAM_COS_MIN, OUTSIDE, POLYGON,
    REL_IDENTICAL, REL_INTERSECTING, REL_PARALLEL, REL_SKEW, SMOOTH_DISK, STRIP_HALF,
)

_EPS = np.finfo(float).eps
_ELLIPSE_ITERS = 120


# --- one-parameter angle function -------------------------------------------

def _theta(params, y):
    n = int(params[2])
    if n == 0:
        return params[1] + params[0] * y, np.full_like(y, params[0])
    xs = params[3:3 + n]
    ths = params[3 + n:3 + 2 * n]
    th = np.interp(y, xs, ths)
    k = np.clip(np.searchsorted(xs, y, side="right") - 1, 0, max(n - 2, 0))
    slope = np.zeros_like(y)
    if n > 1:
        seg = (ths[k + 1] - ths[k]) / (xs[k + 1] - xs[k])
        inside = (y >= xs[0]) & (y <= xs[-1])
        slope = np.where(inside, seg, 0.0)
    return th, slope


# --- convex projections -----------------------------------------------------

def _project_ellipse(params, p):
    cx, cy, a, b, phi = params[:5]
    c, s = np.cos(phi), np.sin(phi)
    dx = p[:, 0] - cx
    dy = p[:, 1] - cy
    y0 = c * dx + s * dy
    y1 = -s * dx + c * dy
    swap = a < b
    e0, e1 = (b, a) if swap else (a, b)
    u0, u1 = (np.abs(y1), np.abs(y0)) if swap else (np.abs(y0), np.abs(y1))
    z0 = u0 / e0
    z1 = u1 / e1
    outside = z0 * z0 + z1 * z1 > 1.0
    r0 = (e0 / e1) ** 2
    lo = z1 - 1.0
    hi = np.sqrt(r0 * r0 * z0 * z0 + z1 * z1) - 1.0
    # inside points may divide by zero here; they are replaced just below
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(_ELLIPSE_ITERS):
            mid = 0.5 * (lo + hi)
            g = (r0 * z0 / (mid + r0)) ** 2 + (z1 / (mid + 1.0)) ** 2 - 1.0
            pos = g > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        sroot = 0.5 * (lo + hi)
        x0 = r0 * u0 / (sroot + r0)
        x1 = u1 / (sroot + 1.0)
    x0 = np.where(outside, x0, u0)
    x1 = np.where(outside, x1, u1)
    if swap:
        w0 = np.copysign(x1, y0)
        w1 = np.copysign(x0, y1)
    else:
        w0 = np.copysign(x0, y0)
        w1 = np.copysign(x1, y1)
    out = np.empty_like(p)
    out[:, 0] = cx + c * w0 - s * w1
    out[:, 1] = cy + s * w0 + c * w1
    return out


def _polygon_nearest(params, p):
    """Gap vector from the nearest polygon point (zero inside), the unit
    direction of the nearest edge and whether that point is interior to it."""
    n = int(params[1])
    vx = params[2:2 + n]
    vy = params[2 + n:2 + 2 * n]
    ax, ay = vx[None, :], vy[None, :]
    bx, by = np.roll(vx, -1)[None, :], np.roll(vy, -1)[None, :]
    px, py = p[:, 0:1], p[:, 1:2]
    ex, ey = bx - ax, by - ay
    cross = ex * (py - ay) - ey * (px - ax)
    inside = np.all(cross >= 0.0, axis=1)
    t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
    on_edge = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    gx = px - (ax + t * ex)
    gy = py - (ay + t * ey)
    d2 = gx * gx + gy * gy
    k = np.argmin(d2, axis=1)
    rows = np.arange(p.shape[0])
    gap = np.stack([gx[rows, k], gy[rows, k]], axis=1)
    gap[inside] = 0.0
    le = np.hypot(ex, ey)[0, k]
    u = np.stack([ex[0, k] / le, ey[0, k] / le], axis=1)
    return gap, u, on_edge[rows, k] & ~inside


def _polygon_gap(params, p):
    """Vector from the nearest polygon point to ``p`` (zero inside)."""
    return _polygon_nearest(params, p)[0]


def _polygon_df(params, p):
    # f = g - rho g/|g| with g the gap; dg = I at vertices, the normal
    # projector along edges
    rho = params[0]
    gap, u, edge = _polygon_nearest(params, p)
    d = np.hypot(gap[:, 0], gap[:, 1])
    out = d > rho
    ds = np.where(out, d, 1.0)
    nrm = gap / ds[:, None]
    k = np.where(out, rho / ds, 0.0)
    eye = np.eye(2)[None]
    M = eye - k[:, None, None] * (eye - nrm[:, :, None] * nrm[:, None, :])
    P = np.where(edge[:, None, None], eye - u[:, :, None] * u[:, None, :], eye)
    return np.where(out[:, None, None], M @ P, 0.0)


# --- f maps for the composed kinds -------------------------------------------

def eval_f(kind, params, p):
    p = np.asarray(p, dtype=float)
    x, y = p[:, 0], p[:, 1]
    out = np.zeros_like(p)
    if kind == DISK:
        r = np.hypot(x, y)
        w = np.where(r > 1.0, 1.0 - 1.0 / np.where(r > 1.0, r, 1.0), 0.0)
        out[:, 0] = w * x
        out[:, 1] = w * y
    elif kind == SMOOTH_DISK:
        r = np.hypot(x, y)
        big = r > 1.0
        rr = np.where(big, r, 2.0)
        with np.errstate(over="ignore", under="ignore"):
            g = np.where(big, np.exp(-1.0 / (rr - 1.0) ** 2), 0.0)
        out[:, 0] = g * x / rr
        out[:, 1] = g * y / rr
    elif kind == ELLIPSE:
        out = p - _project_ellipse(params, p)
    elif kind == POLYGON:
        rho = params[0]
        gap = _polygon_gap(params, p)
        d = np.hypot(gap[:, 0], gap[:, 1])
        w = np.where(d > rho, 1.0 - rho / np.where(d > rho, d, 1.0), 0.0)
        out = gap * w[:, None]
    elif kind == HALF_HALF:
        out[:, 0] = np.where(x <= 0.0, x, 0.0)
        out[:, 1] = y
    elif kind == FAT_HELICOID:
        out[:, 0] = np.where(x >= 1.0, x - 1.0, np.where(x <= -1.0, x + 1.0, 0.0))
        out[:, 1] = y
    else:
        raise ValueError(f"kind {kind} is not a composed generator")
    return out


def _df(kind, p):
    x, y = p[:, 0], p[:, 1]
    n = p.shape[0]
    J = np.zeros((n, 2, 2))
    if kind == DISK:
        r = np.hypot(x, y)
        big = r > 1.0
        rr = np.where(big, r, 1.0)
        w = 1.0 - 1.0 / rr
        r3 = rr ** 3
        J[:, 0, 0] = np.where(big, w + x * x / r3, 0.0)
        J[:, 0, 1] = np.where(big, x * y / r3, 0.0)
        J[:, 1, 0] = J[:, 0, 1]
        J[:, 1, 1] = np.where(big, w + y * y / r3, 0.0)
    elif kind == SMOOTH_DISK:
        r = np.hypot(x, y)
        big = r > 1.0
        rr = np.where(big, r, 2.0)
        with np.errstate(over="ignore", under="ignore"):
            g = np.where(big, np.exp(-1.0 / (rr - 1.0) ** 2), 0.0)
        dg = np.where(big, g * 2.0 / (rr - 1.0) ** 3, 0.0)
        ux, uy = x / rr, y / rr
        a = dg
        b = g / rr
        J[:, 0, 0] = a * ux * ux + b * (1 - ux * ux)
        J[:, 0, 1] = (a - b) * ux * uy
        J[:, 1, 0] = J[:, 0, 1]
        J[:, 1, 1] = a * uy * uy + b * (1 - uy * uy)
    elif kind == HALF_HALF:
        J[:, 0, 0] = np.where(x <= 0.0, 1.0, 0.0)
        J[:, 1, 1] = 1.0
    elif kind == FAT_HELICOID:
        J[:, 0, 0] = np.where(np.abs(x) >= 1.0, 1.0, 0.0)
        J[:, 1, 1] = 1.0
    else:
        raise ValueError(kind)
    return J


# --- generator evaluation ---------------------------------------------------

def eval_B(kind, params, q):
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    x, y = q[:, 0], q[:, 1]
    out = np.empty_like(q)
    if kind == CONSTANT:
        out[:, 0] = params[0]
        out[:, 1] = params[1]
    elif kind == HOPF:
        s = params[0]
        out[:, 0] = -s * y
        out[:, 1] = s * x
    elif kind == EXOTIC_TAN:
        out[:, 0] = -y
        out[:, 1] = np.tan(x)
    elif kind == ONE_PARAM:
        th, _ = _theta(params, y)
        out[:, 0] = np.tan(th)
        out[:, 1] = 0.0
    elif kind == IDENTITY:
        out[:] = q
    else:
        f = eval_f(kind, params, q)
        out[:, 0] = -f[:, 1]
        out[:, 1] = f[:, 0]
    return out


def _fd_jacobian(kind, params, q, fd_step):
    h = fd_step * (1.0 + np.hypot(q[:, 0], q[:, 1]))
    J = np.empty((q.shape[0], 2, 2))
    for j in range(2):
        e = np.zeros_like(q)
        e[:, j] = h
        J[:, :, j] = (eval_B(kind, params, q + e) - eval_B(kind, params, q - e)) / (2 * h[:, None])
    return J


def jac_B(kind, params, q, fd_step):
    """dB at each point; columns are partials in base-plane coordinates."""
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    x, y = q[:, 0], q[:, 1]
    n = q.shape[0]
    J = np.zeros((n, 2, 2))
    if kind == CONSTANT:
        pass
    elif kind == HOPF:
        s = params[0]
        J[:, 0, 1] = -s
        J[:, 1, 0] = s
    elif kind == EXOTIC_TAN:
        J[:, 0, 1] = -1.0
        J[:, 1, 0] = 1.0 / np.cos(x) ** 2
    elif kind == ONE_PARAM:
        th, dth = _theta(params, y)
        J[:, 0, 1] = dth / np.cos(th) ** 2
    elif kind == IDENTITY:
        J[:, 0, 0] = 1.0
        J[:, 1, 1] = 1.0
    elif kind == ELLIPSE:
        J = _fd_jacobian(kind, params, q, fd_step)
    else:
        df = _polygon_df(params, q) if kind == POLYGON else _df(kind, q)
        J[:, 0, 0] = -df[:, 1, 0]
        J[:, 0, 1] = -df[:, 1, 1]
        J[:, 1, 0] = df[:, 0, 0]
        J[:, 1, 1] = df[:, 0, 1]
    return J


def in_domain(kind, params, q):
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    ok = np.all(np.isfinite(q), axis=1)
    if kind == EXOTIC_TAN:
        ok &= np.abs(q[:, 0]) < STRIP_HALF
    elif kind == ONE_PARAM:
        th, _ = _theta(params, q[:, 1])
        ok &= np.cos(th) > ONE_PARAM_COS_MIN
    return ok


# --- inversion of q -> q + t B(q) -------------------------------------------

def _residual(kind, params, q, x, t):
    B = eval_B(kind, params, q)
    F = q + t[:, None] * B - x
    return F, np.hypot(F[:, 0], F[:, 1]), B


def _newton(kind, params, x, t, q0, tol, maxit, fd_step):
    n = x.shape[0]
    q = q0.copy()
    conv = np.zeros(n, dtype=bool)
    alive = in_domain(kind, params, q)
    F, r, B = _residual(kind, params, q, x, t)
    alive &= np.isfinite(r)
    polished = np.zeros(n, dtype=bool)
    for _ in range(maxit + 1):
        # B(q) carries a rounding error of order eps |q|, amplified by |t|
        scale = np.hypot(x[:, 0], x[:, 1]) + (1.0 + np.abs(t)) * (
            np.hypot(B[:, 0], B[:, 1]) + np.hypot(q[:, 0], q[:, 1]))
        floor = 16.0 * _EPS * scale
        inside = alive & (r <= np.maximum(tol, floor))
        # one extra step once inside tolerance, unless already at rounding level
        done = inside & (polished | (r <= floor))
        polished |= inside
        conv |= done
        alive &= ~done
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        J = jac_B(kind, params, q[idx], fd_step) * t[idx, None, None]
        J[:, 0, 0] += 1.0
        J[:, 1, 1] += 1.0
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        good = np.isfinite(det) & (np.abs(det) > 1e-300)
        bad = idx[~good]
        conv[bad] |= polished[bad]
        alive[bad] = False
        idx, J, det = idx[good], J[good], det[good]
        Fi = F[idx]
        d = np.empty_like(Fi)
        d[:, 0] = -(J[:, 1, 1] * Fi[:, 0] - J[:, 0, 1] * Fi[:, 1]) / det
        d[:, 1] = -(-J[:, 1, 0] * Fi[:, 0] + J[:, 0, 0] * Fi[:, 1]) / det
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(60):
            if not pending.any():
                break
            k = np.flatnonzero(pending)
            trial = q[idx[k]] + lam[k, None] * d[k]
            Ft, rt, Bt = _residual(kind, params, trial, x[idx[k]], t[idx[k]])
            okk = in_domain(kind, params, trial) & np.isfinite(rt) & (rt < r[idx[k]])
            acc = k[okk]
            q[idx[acc]] = trial[okk]
            F[idx[acc]] = Ft[okk]
            r[idx[acc]] = rt[okk]
            B[idx[acc]] = Bt[okk]
            pending[acc] = False
            lam[k[~okk]] *= 0.5
        stuck = idx[pending]
        conv[stuck] |= polished[stuck]
        alive[stuck] = False
    conv |= alive & polished
    return q, conv


def _geometric_steps(t, steps):
    """Extra continuation steps past height 1: ``steps / 8`` per doubling."""
    big = np.abs(t) > 1.0
    if not np.any(big):
        return 0
    return int(np.ceil(np.log2(np.max(np.abs(t[big]))) * steps / 8.0))


def continuation_height(t, k, steps, extra):
    """Height of continuation step ``k``: linear up to ``min(|t|, 1)`` in
    ``steps`` steps, then geometric up to ``|t|`` in ``extra`` steps."""
    a = np.minimum(np.abs(t), 1.0)
    if k <= steps:
        return np.sign(t) * a * (k / steps)
    ratio = np.abs(t) / np.where(a > 0, a, 1.0)
    return np.sign(t) * a * ratio ** ((k - steps) / extra)


def invert(kind, params, X, tol, maxit, steps, fd_step):
    """Solve ``q + x3 B(q) = (x1, x2)`` for every row of ``X``.

    Damped Newton from ``q = (x1, x2)``; points that fail are retried by
    continuation in ``x3`` from 0 (linear to height 1, geometric beyond),
    doubling the number of steps up to 16x.  Returns ``(Q, status)``.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    x = X[:, :2].copy()
    t = X[:, 2].copy()
    start_ok = in_domain(kind, params, x)
    q0 = x.copy()
    if kind == EXOTIC_TAN:
        q0[:, 0] = np.clip(q0[:, 0], -1.5, 1.5)
    Q, conv = _newton(kind, params, x, t, q0, tol, maxit, fd_step)
    status = np.where(conv, OK, NO_CONVERGENCE).astype(np.int8)
    todo = np.flatnonzero(~conv & start_ok)
    nsteps = steps
    for _ in range(5):
        if todo.size == 0:
            break
        q = x[todo].copy()
        alive = np.ones(todo.size, dtype=bool)
        extra = _geometric_steps(t[todo], nsteps)
        for k in range(1, nsteps + extra + 1):
            tk = continuation_height(t[todo], k, nsteps, extra)
            q_new, c = _newton(kind, params, x[todo], tk, q, tol, maxit, fd_step)
            q = np.where(c[:, None], q_new, q)
            alive &= c
        Q[todo[alive]] = q[alive]
        status[todo[alive]] = OK
        todo = todo[~alive]
        nsteps *= 2
    return Q, status


# --- exotic one-dimensional solve --------------------------------------------

def exotic_solve(c, t):
    """Solve ``arctan(s) + t^2 s = c`` for ``s = tan(q1)``.

    The left side is strictly increasing in ``s``; it is bracketed by
    ``[(c - pi/2)/t^2, (c + pi/2)/t^2]`` and bisected to relative width 1e-14,
    then polished by safeguarded Newton steps.  Rows with ``t == 0`` return
    ``tan(c)`` when ``|c|`` lies in the strip and NaN otherwise.
    """
    c = np.asarray(c, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    t2 = t * t
    zero = t2 == 0.0
    t2s = np.where(zero, 1.0, t2)
    half = np.pi / 2
    lo = (c - half) / t2s
    hi = (c + half) / t2s
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        width = hi - lo
        active = width > 1e-14 * np.maximum(1.0, np.abs(mid))
        if not active.any():
            break
        g = np.arctan(mid) + t2s * mid - c
        up = active & (g > 0)
        dn = active & ~(g > 0)
        hi = np.where(up, mid, hi)
        lo = np.where(dn, mid, lo)
    s = 0.5 * (lo + hi)
    g = np.arctan(s) + t2s * s - c
    for _ in range(4):
        step = g / (1.0 / (1.0 + s * s) + t2s)
        trial = s - step
        gt = np.arctan(trial) + t2s * trial - c
        better = (np.abs(gt) < np.abs(g)) & (trial >= lo - np.abs(lo) * 1e-12 - 1e-300) \
            & (trial <= hi + np.abs(hi) * 1e-12 + 1e-300)
        s = np.where(better, trial, s)
        g = np.where(better, gt, g)
    with np.errstate(invalid="ignore"):
        direct = np.where(np.abs(c) < STRIP_HALF, np.tan(c), np.nan)
    return np.where(zero, direct, s)


def exotic_invert(X):
    """Base points of the exotic strip fibration; returns ``(Q, tanq1, status)``."""
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    x, y, t = X[:, 0], X[:, 1], X[:, 2]
    s = exotic_solve(x + t * y, t)
    Q = np.empty((X.shape[0], 2))
    Q[:, 0] = np.arctan(s)
    Q[:, 1] = y - t * s
    status = np.full(X.shape[0], OK, dtype=np.int8)
    flat = t == 0.0
    Q[flat, 0] = x[flat]
    Q[flat, 1] = y[flat]
    bad = flat & ~(np.abs(x) < STRIP_HALF)
    status[bad] = np.where(np.abs(x[bad]) >= np.pi / 2, BOUNDARY, OUTSIDE)
    return Q, s, status


# --- pairwise line relations ---------------------------------------------------

def line_pairs(bases, dirs, tol, parallel_tol=1e-12):
    """Distance and relation code for every pair ``i < j`` (``np.triu_indices`` order)."""
    bases = np.asarray(bases, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    i, j = np.triu_indices(bases.shape[0], 1)
    d1, d2 = dirs[i], dirs[j]
    w = bases[i] - bases[j]
    n = np.cross(d1, d2)
    nn = np.linalg.norm(n, axis=1)
    par = nn < parallel_tol
    safe = np.where(par, 1.0, nn)
    skew_dist = np.abs(np.sum(w * n, axis=1)) / safe
    perp = w - np.sum(w * d2, axis=1)[:, None] * d2
    par_dist = np.linalg.norm(perp, axis=1)
    dist = np.where(par, par_dist, skew_dist)
    same_way = np.sum(d1 * d2, axis=1) > 0
    rel = np.where(
        par,
        np.where((dist <= tol) & same_way, REL_IDENTICAL, REL_PARALLEL),
        np.where(dist <= tol, REL_INTERSECTING, REL_SKEW),
    ).astype(np.int8)
    return dist, rel
