"""Numba kernels: the same contracts as :mod:`linefib.kernels.vec`, one point at a time."""
import math

import numpy as np

from .._jit import njit
from .codes import (
    BOUNDARY, CONSTANT, DISK, ELLIPSE, EXOTIC_TAN, FAT_HELICOID, HALF_HALF, HOPF,
    IDENTITY, NO_CONVERGENCE, OK, ONE_PARAM, ONE_PARAM_COS_MIN, OUTSIDE, POLYGON,
    REL_IDENTICAL, REL_INTERSECTING, REL_PARALLEL, REL_SKEW, SMOOTH_DISK, STRIP_HALF,
)

_EPS = 2.220446049250313e-16
_HALF_PI = math.pi / 2


@njit
def _theta(params, y):
    n = int(params[2])
    if n == 0:
        return params[1] + params[0] * y, params[0]
    xs = params[3:3 + n]
    ths = params[3 + n:3 + 2 * n]
    if y <= xs[0]:
        return ths[0], 0.0
    if y >= xs[n - 1]:
        return ths[n - 1], 0.0
    k = 0
    while k < n - 2 and y >= xs[k + 1]:
        k += 1
    slope = (ths[k + 1] - ths[k]) / (xs[k + 1] - xs[k])
    return ths[k] + slope * (y - xs[k]), slope


@njit
def _project_ellipse(params, px, py):
    cx, cy, a, b, phi = params[0], params[1], params[2], params[3], params[4]
    c = math.cos(phi)
    s = math.sin(phi)
    dx = px - cx
    dy = py - cy
    y0 = c * dx + s * dy
    y1 = -s * dx + c * dy
    swap = a < b
    if swap:
        e0, e1, u0, u1 = b, a, abs(y1), abs(y0)
    else:
        e0, e1, u0, u1 = a, b, abs(y0), abs(y1)
    z0 = u0 / e0
    z1 = u1 / e1
    if z0 * z0 + z1 * z1 > 1.0:
        r0 = (e0 / e1) ** 2
        lo = z1 - 1.0
        hi = math.sqrt(r0 * r0 * z0 * z0 + z1 * z1) - 1.0
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            g = (r0 * z0 / (mid + r0)) ** 2 + (z1 / (mid + 1.0)) ** 2 - 1.0
            if g > 0:
                lo = mid
            else:
                hi = mid
        sr = 0.5 * (lo + hi)
        x0 = r0 * u0 / (sr + r0)
        x1 = u1 / (sr + 1.0)
    else:
        x0, x1 = u0, u1
    if swap:
        w0 = math.copysign(x1, y0)
        w1 = math.copysign(x0, y1)
    else:
        w0 = math.copysign(x0, y0)
        w1 = math.copysign(x1, y1)
    return cx + c * w0 - s * w1, cy + s * w0 + c * w1


@njit
def _polygon_nearest(params, px, py):
    """Gap vector from the nearest polygon point, the unit direction of the
    nearest edge and whether that point is interior to the edge."""
    n = int(params[1])
    inside = True
    best = np.inf
    gx_best = 0.0
    gy_best = 0.0
    ux_best = 1.0
    uy_best = 0.0
    edge_best = False
    for k in range(n):
        ax = params[2 + k]
        ay = params[2 + n + k]
        kk = (k + 1) % n
        bx = params[2 + kk]
        by = params[2 + n + kk]
        ex = bx - ax
        ey = by - ay
        if ex * (py - ay) - ey * (px - ax) < 0.0:
            inside = False
        tt = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        edge = 0.0 < tt < 1.0
        tt = min(max(tt, 0.0), 1.0)
        gx = px - (ax + tt * ex)
        gy = py - (ay + tt * ey)
        d2 = gx * gx + gy * gy
        if d2 < best:
            best = d2
            gx_best = gx
            gy_best = gy
            le = math.hypot(ex, ey)
            ux_best = ex / le
            uy_best = ey / le
            edge_best = edge
    if inside:
        return 0.0, 0.0, ux_best, uy_best, False
    return gx_best, gy_best, ux_best, uy_best, edge_best


@njit
def _polygon_gap(params, px, py):
    gx, gy, _, _, _ = _polygon_nearest(params, px, py)
    return gx, gy


@njit
def eval_f1(kind, params, x, y):
    if kind == DISK:
        r = math.hypot(x, y)
        if r > 1.0:
            w = 1.0 - 1.0 / r
            return w * x, w * y
        return 0.0, 0.0
    if kind == SMOOTH_DISK:
        r = math.hypot(x, y)
        if r > 1.0:
            g = math.exp(-1.0 / (r - 1.0) ** 2)
            return g * x / r, g * y / r
        return 0.0, 0.0
    if kind == ELLIPSE:
        px, py = _project_ellipse(params, x, y)
        return x - px, y - py
    if kind == POLYGON:
        rho = params[0]
        gx, gy = _polygon_gap(params, x, y)
        d = math.hypot(gx, gy)
        if d > rho:
            w = 1.0 - rho / d
            return w * gx, w * gy
        return 0.0, 0.0
    if kind == HALF_HALF:
        return (x if x <= 0.0 else 0.0), y
    if kind == FAT_HELICOID:
        if x >= 1.0:
            return x - 1.0, y
        if x <= -1.0:
            return x + 1.0, y
        return 0.0, y
    return np.nan, np.nan


@njit
def eval_B1(kind, params, x, y):
    if kind == CONSTANT:
        return params[0], params[1]
    if kind == HOPF:
        s = params[0]
        return -s * y, s * x
    if kind == EXOTIC_TAN:
        return -y, math.tan(x)
    if kind == ONE_PARAM:
        th, _ = _theta(params, y)
        return math.tan(th), 0.0
    if kind == IDENTITY:
        return x, y
    f0, f1 = eval_f1(kind, params, x, y)
    return -f1, f0


@njit
def jac_B1(kind, params, x, y, fd_step):
    """Returns (a, b, c, d) for dB = [[a, b], [c, d]]."""
    if kind == CONSTANT:
        return 0.0, 0.0, 0.0, 0.0
    if kind == HOPF:
        s = params[0]
        return 0.0, -s, s, 0.0
    if kind == EXOTIC_TAN:
        cx = math.cos(x)
        return 0.0, -1.0, 1.0 / (cx * cx), 0.0
    if kind == ONE_PARAM:
        th, dth = _theta(params, y)
        ct = math.cos(th)
        return 0.0, dth / (ct * ct), 0.0, 0.0
    if kind == IDENTITY:
        return 1.0, 0.0, 0.0, 1.0
    if kind == POLYGON:
        # f = g - rho g/|g| with g the gap; dg = I at vertices, the normal
        # projector along edges
        rho = params[0]
        gx, gy, ux, uy, edge = _polygon_nearest(params, x, y)
        d = math.hypot(gx, gy)
        if d <= rho:
            return 0.0, 0.0, 0.0, 0.0
        nx = gx / d
        ny = gy / d
        k = rho / d
        m00 = 1.0 - k * (1.0 - nx * nx)
        m01 = k * nx * ny
        m11 = 1.0 - k * (1.0 - ny * ny)
        if edge:
            p00 = 1.0 - ux * ux
            p01 = -ux * uy
            p11 = 1.0 - uy * uy
        else:
            p00 = 1.0
            p01 = 0.0
            p11 = 1.0
        f00 = m00 * p00 + m01 * p01
        f01 = m00 * p01 + m01 * p11
        f10 = m01 * p00 + m11 * p01
        f11 = m01 * p01 + m11 * p11
        return -f10, -f11, f00, f01
    if kind == ELLIPSE:
        h = fd_step * (1.0 + math.hypot(x, y))
        b0p, b1p = eval_B1(kind, params, x + h, y)
        b0m, b1m = eval_B1(kind, params, x - h, y)
        c0p, c1p = eval_B1(kind, params, x, y + h)
        c0m, c1m = eval_B1(kind, params, x, y - h)
        return ((b0p - b0m) / (2 * h), (c0p - c0m) / (2 * h),
                (b1p - b1m) / (2 * h), (c1p - c1m) / (2 * h))
    # df, then dB = i df
    f00 = 0.0
    f01 = 0.0
    f10 = 0.0
    f11 = 0.0
    if kind == DISK:
        r = math.hypot(x, y)
        if r > 1.0:
            w = 1.0 - 1.0 / r
            r3 = r * r * r
            f00 = w + x * x / r3
            f01 = x * y / r3
            f10 = f01
            f11 = w + y * y / r3
    elif kind == SMOOTH_DISK:
        r = math.hypot(x, y)
        if r > 1.0:
            g = math.exp(-1.0 / (r - 1.0) ** 2)
            a = g * 2.0 / (r - 1.0) ** 3
            b = g / r
            ux = x / r
            uy = y / r
            f00 = a * ux * ux + b * (1 - ux * ux)
            f01 = (a - b) * ux * uy
            f10 = f01
            f11 = a * uy * uy + b * (1 - uy * uy)
    elif kind == HALF_HALF:
        f00 = 1.0 if x <= 0.0 else 0.0
        f11 = 1.0
    elif kind == FAT_HELICOID:
        f00 = 1.0 if abs(x) >= 1.0 else 0.0
        f11 = 1.0
    return -f10, -f11, f00, f01


@njit
def in_domain1(kind, params, x, y):
    if not (math.isfinite(x) and math.isfinite(y)):
        return False
    if kind == EXOTIC_TAN:
        return abs(x) < STRIP_HALF
    if kind == ONE_PARAM:
        th, _ = _theta(params, y)
        return math.cos(th) > ONE_PARAM_COS_MIN
    return True


@njit
def _newton1(kind, params, x1, x2, t, q1, q2, tol, maxit, fd_step):
    if not in_domain1(kind, params, q1, q2):
        return q1, q2, False
    b1, b2 = eval_B1(kind, params, q1, q2)
    f1 = q1 + t * b1 - x1
    f2 = q2 + t * b2 - x2
    r = math.hypot(f1, f2)
    if not math.isfinite(r):
        return q1, q2, False
    polished = False
    for _ in range(maxit + 1):
        # B(q) carries a rounding error of order eps |q|, amplified by |t|
        scale = math.hypot(x1, x2) + (1.0 + abs(t)) * (math.hypot(b1, b2) + math.hypot(q1, q2))
        floor = 16.0 * _EPS * scale
        if r <= max(tol, floor):
            # one extra step once inside tolerance, unless already at rounding level
            if polished or r <= floor:
                return q1, q2, True
            polished = True
        a, b, c, d = jac_B1(kind, params, q1, q2, fd_step)
        a = 1.0 + t * a
        b = t * b
        c = t * c
        d = 1.0 + t * d
        det = a * d - b * c
        if not math.isfinite(det) or abs(det) <= 1e-300:
            return q1, q2, polished
        d1 = -(d * f1 - b * f2) / det
        d2 = -(-c * f1 + a * f2) / det
        lam = 1.0
        accepted = False
        for _k in range(60):
            n1 = q1 + lam * d1
            n2 = q2 + lam * d2
            if in_domain1(kind, params, n1, n2):
                nb1, nb2 = eval_B1(kind, params, n1, n2)
                g1 = n1 + t * nb1 - x1
                g2 = n2 + t * nb2 - x2
                rn = math.hypot(g1, g2)
                if math.isfinite(rn) and rn < r:
                    q1, q2, b1, b2, f1, f2, r = n1, n2, nb1, nb2, g1, g2, rn
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return q1, q2, polished
    return q1, q2, polished


@njit
def _invert1(kind, params, x1, x2, t, tol, maxit, steps, fd_step):
    s1 = x1
    if kind == EXOTIC_TAN:
        s1 = min(max(x1, -1.5), 1.5)
    q1, q2, ok = _newton1(kind, params, x1, x2, t, s1, x2, tol, maxit, fd_step)
    if ok:
        return q1, q2, OK
    if not in_domain1(kind, params, x1, x2):
        return q1, q2, NO_CONVERGENCE
    nsteps = steps
    at = abs(t)
    a = min(at, 1.0)
    sgn = 1.0 if t > 0 else -1.0
    for _round in range(5):
        extra = 0
        if at > 1.0:
            extra = int(np.ceil(np.log2(at) * nsteps / 8.0))
        p1, p2 = x1, x2
        good = True
        for k in range(1, nsteps + extra + 1):
            if k <= nsteps:
                tk = sgn * a * (k / nsteps)
            else:
                tk = sgn * a * at ** ((k - nsteps) / extra)
            p1, p2, good = _newton1(kind, params, x1, x2, tk, p1, p2, tol, maxit, fd_step)
            if not good:
                break
        if good:
            return p1, p2, OK
        nsteps *= 2
    return q1, q2, NO_CONVERGENCE


@njit
def eval_B(kind, params, q):
    out = np.empty_like(q)
    for i in range(q.shape[0]):
        out[i, 0], out[i, 1] = eval_B1(kind, params, q[i, 0], q[i, 1])
    return out


@njit
def eval_f(kind, params, p):
    out = np.empty_like(p)
    for i in range(p.shape[0]):
        out[i, 0], out[i, 1] = eval_f1(kind, params, p[i, 0], p[i, 1])
    return out


@njit
def jac_B(kind, params, q, fd_step):
    out = np.empty((q.shape[0], 2, 2))
    for i in range(q.shape[0]):
        a, b, c, d = jac_B1(kind, params, q[i, 0], q[i, 1], fd_step)
        out[i, 0, 0] = a
        out[i, 0, 1] = b
        out[i, 1, 0] = c
        out[i, 1, 1] = d
    return out


@njit
def in_domain(kind, params, q):
    out = np.empty(q.shape[0], dtype=np.bool_)
    for i in range(q.shape[0]):
        out[i] = in_domain1(kind, params, q[i, 0], q[i, 1])
    return out


@njit
def invert(kind, params, X, tol, maxit, steps, fd_step):
    n = X.shape[0]
    Q = np.empty((n, 2))
    status = np.empty(n, dtype=np.int8)
    for i in range(n):
        q1, q2, st = _invert1(kind, params, X[i, 0], X[i, 1], X[i, 2], tol, maxit, steps, fd_step)
        Q[i, 0] = q1
        Q[i, 1] = q2
        status[i] = st
    return Q, status


@njit
def _exotic_solve1(c, t):
    t2 = t * t
    if t2 == 0.0:
        if abs(c) < STRIP_HALF:
            return math.tan(c)
        return np.nan
    lo = (c - _HALF_PI) / t2
    hi = (c + _HALF_PI) / t2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-14 * max(1.0, abs(mid)):
            break
        if math.atan(mid) + t2 * mid - c > 0:
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    g = math.atan(s) + t2 * s - c
    for _ in range(4):
        trial = s - g / (1.0 / (1.0 + s * s) + t2)
        if trial < lo - abs(lo) * 1e-12 - 1e-300 or trial > hi + abs(hi) * 1e-12 + 1e-300:
            break
        gt = math.atan(trial) + t2 * trial - c
        if abs(gt) < abs(g):
            s = trial
            g = gt
        else:
            break
    return s


@njit
def exotic_solve(c, t):
    out = np.empty(c.shape[0])
    for i in range(c.shape[0]):
        out[i] = _exotic_solve1(c[i], t[i])
    return out


@njit
def exotic_invert(X):
    n = X.shape[0]
    Q = np.empty((n, 2))
    S = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    for i in range(n):
        x, y, t = X[i, 0], X[i, 1], X[i, 2]
        status[i] = OK
        if t == 0.0:
            Q[i, 0] = x
            Q[i, 1] = y
            if abs(x) < STRIP_HALF:
                S[i] = math.tan(x)
            else:
                S[i] = np.nan
                status[i] = BOUNDARY if abs(x) >= _HALF_PI else OUTSIDE
            continue
        s = _exotic_solve1(x + t * y, t)
        S[i] = s
        Q[i, 0] = math.atan(s)
        Q[i, 1] = y - t * s
    return Q, S, status


@njit
def line_pairs(bases, dirs, tol, parallel_tol=1e-12):
    n = bases.shape[0]
    m = n * (n - 1) // 2
    dist = np.empty(m)
    rel = np.empty(m, dtype=np.int8)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            d1x, d1y, d1z = dirs[i, 0], dirs[i, 1], dirs[i, 2]
            d2x, d2y, d2z = dirs[j, 0], dirs[j, 1], dirs[j, 2]
            wx = bases[i, 0] - bases[j, 0]
            wy = bases[i, 1] - bases[j, 1]
            wz = bases[i, 2] - bases[j, 2]
            nx = d1y * d2z - d1z * d2y
            ny = d1z * d2x - d1x * d2z
            nz = d1x * d2y - d1y * d2x
            nn = math.sqrt(nx * nx + ny * ny + nz * nz)
            if nn < parallel_tol:
                wd = wx * d2x + wy * d2y + wz * d2z
                px = wx - wd * d2x
                py = wy - wd * d2y
                pz = wz - wd * d2z
                dd = math.sqrt(px * px + py * py + pz * pz)
                same = d1x * d2x + d1y * d2y + d1z * d2z > 0
                rel[k] = REL_IDENTICAL if (dd <= tol and same) else REL_PARALLEL
            else:
                dd = abs(wx * nx + wy * ny + wz * nz) / nn
                rel[k] = REL_INTERSECTING if dd <= tol else REL_SKEW
            dist[k] = dd
            k += 1
    return dist, rel
