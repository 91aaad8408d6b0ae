"""Hot numeric kernels.

Each kernel has a loop implementation compiled with numba and a vectorized
numpy implementation. The numba path is used when numba imports and
``CURVYPLAN_NUMBA`` is not set to ``0``; the numpy path is always available
as ``<name>_numpy`` and the loop source as ``<name>_loops``.
"""

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CURVYPLAN_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

# columns of the per-candidate output of maneuver_batch
OUT_AY, OUT_YAW, OUT_BETA, OUT_DELTA, OUT_MIN_DIST = range(5)
N_OUT = 5


def _jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=False)(fn)
    return fn


# ---------------------------------------------------------------------------
# polyline projection


def project_polyline_loops(wp, cum_s, px, py):
    best = np.inf
    bs = 0.0
    bd = 0.0
    bfx = wp[0, 0]
    bfy = wp[0, 1]
    for i in range(wp.shape[0] - 1):
        ax = wp[i, 0]
        ay = wp[i, 1]
        ex = wp[i + 1, 0] - ax
        ey = wp[i + 1, 1] - ay
        seg2 = ex * ex + ey * ey
        u = ((px - ax) * ex + (py - ay) * ey) / seg2
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        fx = ax + u * ex
        fy = ay + u * ey
        dist = math.hypot(px - fx, py - fy)
        # strict improvement keeps the smallest-s candidate on ties
        if dist < best - 1e-12:
            best = dist
            seglen = math.sqrt(seg2)
            bs = cum_s[i] + u * seglen
            cross = ex * (py - fy) - ey * (px - fx)
            bd = dist if cross >= 0.0 else -dist
            bfx = fx
            bfy = fy
    return bs, bd, bfx, bfy


def project_polyline_numpy(wp, cum_s, px, py):
    a = wp[:-1]
    e = np.diff(wp, axis=0)
    seg2 = np.einsum("ij,ij->i", e, e)
    u = np.clip(((px - a[:, 0]) * e[:, 0] + (py - a[:, 1]) * e[:, 1]) / seg2, 0.0, 1.0)
    f = a + u[:, None] * e
    dist = np.hypot(px - f[:, 0], py - f[:, 1])
    dmin = dist.min()
    i = int(np.flatnonzero(dist < dmin + 1e-12)[0])
    cross = e[i, 0] * (py - f[i, 1]) - e[i, 1] * (px - f[i, 0])
    d = dist[i] if cross >= 0.0 else -dist[i]
    return cum_s[i] + u[i] * math.sqrt(seg2[i]), d, f[i, 0], f[i, 1]


project_polyline_jit = _jit(project_polyline_loops)
project_polyline = project_polyline_jit if USE_NUMBA else project_polyline_numpy


# ---------------------------------------------------------------------------
# quintic lane-change candidates


def quintic_coeffs_loops(d0, v0, a0, d1, v1, a1, T):
    """Shifted-time quintic through (d0, v0, a0) at 0 and (d1, v1, a1) at T."""
    c0 = d1 - d0 - v0 * T - 0.5 * a0 * T * T
    c1 = v1 - v0 - a0 * T
    c2 = a1 - a0
    T2 = T * T
    T3 = T2 * T
    a3 = (10.0 * c0 - 4.0 * c1 * T + 0.5 * c2 * T2) / T3
    a4 = (-15.0 * c0 + 7.0 * c1 * T - c2 * T2) / (T3 * T)
    a5 = (6.0 * c0 - 3.0 * c1 * T + 0.5 * c2 * T2) / (T3 * T2)
    return d0, v0, 0.5 * a0, a3, a4, a5


_quintic_coeffs = _jit(quintic_coeffs_loops)


def _maneuver_batch_loops(cand, bc, win, px, py, ph, pk, hdv, dt, veh, out):
    """Per-candidate extreme control magnitudes and clearance.

    cand: (N, 2) rows of (duration, arc-length advance)
    bc: (d0, dd0, ddd0, d_target, s0)
    win: (s_start, station_step)
    px, py, ph, pk: path samples on the window (ph unwrapped)
    hdv: (M, K, 2) predicted other-vehicle positions at k*dt
    veh: (wheelbase, rear-axle distance, mu*g)
    """
    quintic = _quintic_coeffs
    d0 = bc[0]
    s0 = bc[4]
    s_start = win[0]
    h = win[1]
    nwin = px.shape[0]
    L = veh[0]
    lr = veh[1]
    mug = veh[2]
    n_t = hdv.shape[1]
    for n in range(cand.shape[0]):
        T = cand[n, 0]
        ds = cand[n, 1]
        vm = ds / T
        c0, c1, c2, c3, c4, c5 = quintic(d0, bc[1], bc[2], bc[3], 0.0, 0.0, T)
        m_ay = 0.0
        m_yaw = 0.0
        m_beta = 0.0
        m_delta = 0.0
        m_dist = np.inf
        for k in range(n_t):
            t = k * dt
            if t <= T + 1e-9:
                d = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))))
                dd = c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)))
                ddd = 2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5))
                s = s0 + vm * t
                inside = True
            else:
                d = bc[3]
                dd = 0.0
                ddd = 0.0
                s = s0 + ds + vm * (t - T)
                inside = False
            q = (s - s_start) / h
            j = int(math.floor(q))
            if j < 0:
                j = 0
            if j > nwin - 2:
                j = nwin - 2
            w = q - j
            xp = px[j] + w * (px[j + 1] - px[j])
            yp = py[j] + w * (py[j + 1] - py[j])
            psi = ph[j] + w * (ph[j + 1] - ph[j])
            kap = pk[j] + w * (pk[j + 1] - pk[j])
            sp = math.sin(psi)
            cp = math.cos(psi)
            x = xp - d * sp
            y = yp + d * cp
            for m in range(hdv.shape[0]):
                dist = math.hypot(x - hdv[m, k, 0], y - hdv[m, k, 1])
                if dist < m_dist:
                    m_dist = dist
            if inside:
                om = 1.0 - kap * d
                vx = vm * om
                vxd = -vm * kap * dd
                k_road = kap / om
                den = (vx * vx + dd * dd) ** 1.5
                k_lat = (vx * ddd - dd * vxd) / den
                k_tot = k_road + k_lat
                ay = abs(vx * vx * k_tot)
                yaw = abs(vx * k_tot) / (mug / max(vx, 0.1))
                beta = abs(math.atan(lr * k_tot))
                delta = abs(math.atan(L * k_tot) - math.atan(L * k_road))
                if ay > m_ay:
                    m_ay = ay
                if yaw > m_yaw:
                    m_yaw = yaw
                if beta > m_beta:
                    m_beta = beta
                if delta > m_delta:
                    m_delta = delta
        out[n, 0] = m_ay
        out[n, 1] = m_yaw
        out[n, 2] = m_beta
        out[n, 3] = m_delta
        out[n, 4] = m_dist


_maneuver_batch_jit = _jit(_maneuver_batch_loops)


def maneuver_batch_numpy(cand, bc, win, px, py, ph, pk, hdv, dt, veh):
    cand = np.asarray(cand, dtype=float)
    T = cand[:, :1]
    ds = cand[:, 1:2]
    vm = ds / T
    c = np.stack(np.broadcast_arrays(*quintic_coeffs_loops(bc[0], bc[1], bc[2], bc[3], 0.0, 0.0, T[:, 0])), axis=-1)
    n_t = hdv.shape[1]
    t = np.arange(n_t)[None, :] * dt
    inside = t <= T + 1e-9
    tp = np.where(inside, t, 0.0)
    pw = tp[..., None] ** np.arange(6)
    d = np.einsum("nkp,np->nk", pw, c)
    dd = np.einsum("nkp,np->nk", pw[..., :5], c[:, 1:] * np.arange(1, 6))
    ddd = np.einsum("nkp,np->nk", pw[..., :4], c[:, 2:] * np.array([2.0, 6.0, 12.0, 20.0]))
    d = np.where(inside, d, bc[3])
    dd = np.where(inside, dd, 0.0)
    ddd = np.where(inside, ddd, 0.0)
    s = np.where(inside, bc[4] + vm * t, bc[4] + ds + vm * (t - T))
    q = (s - win[0]) / win[1]
    j = np.clip(np.floor(q).astype(np.int64), 0, len(px) - 2)
    w = q - j

    def lerp(a):
        return a[j] + w * (a[j + 1] - a[j])

    xp, yp, psi, kap = lerp(px), lerp(py), lerp(ph), lerp(pk)
    x = xp - d * np.sin(psi)
    y = yp + d * np.cos(psi)
    dist = np.hypot(x[:, None, :] - hdv[None, :, :, 0], y[:, None, :] - hdv[None, :, :, 1])
    m_dist = dist.min(axis=(1, 2)) if hdv.shape[0] else np.full(len(cand), np.inf)

    L, lr, mug = veh
    om = 1.0 - kap * d
    vx = vm * om
    vxd = -vm * kap * dd
    k_road = kap / om
    k_tot = k_road + (vx * ddd - dd * vxd) / (vx * vx + dd * dd) ** 1.5
    ay = np.abs(vx * vx * k_tot)
    yaw = np.abs(vx * k_tot) / (mug / np.maximum(vx, 0.1))
    beta = np.abs(np.arctan(lr * k_tot))
    delta = np.abs(np.arctan(L * k_tot) - np.arctan(L * k_road))
    out = np.empty((len(cand), N_OUT))
    for col, arr in ((OUT_AY, ay), (OUT_YAW, yaw), (OUT_BETA, beta), (OUT_DELTA, delta)):
        out[:, col] = np.where(inside, arr, 0.0).max(axis=1)
    out[:, OUT_MIN_DIST] = m_dist
    return out


def maneuver_batch_jit(cand, bc, win, px, py, ph, pk, hdv, dt, veh):
    cand = np.ascontiguousarray(cand, dtype=np.float64)
    out = np.empty((cand.shape[0], N_OUT))
    _maneuver_batch_jit(cand, np.asarray(bc, dtype=np.float64), np.asarray(win, dtype=np.float64),
                        px, py, ph, pk, hdv, float(dt), np.asarray(veh, dtype=np.float64), out)
    return out


maneuver_batch = maneuver_batch_jit if USE_NUMBA else maneuver_batch_numpy
