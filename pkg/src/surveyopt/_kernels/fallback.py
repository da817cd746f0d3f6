"""Pure-numpy reference implementation of the evaluation kernels.

The compiled backend in _core.pyx mirrors these routines operation for
operation, including the active-region skip tests, so that both backends
agree to floating-point roundoff.  Keep the two files in sync.
"""

import math

import numpy as np
from scipy.special import erfc

from ..sensor import (
    PACK_ATT_M,
    PACK_COS_BACK,
    PACK_EPS_HI,
    PACK_EPS_LO,
    PACK_FOM,
    PACK_HALF_ALPHA,
    PACK_HEIGHT,
    PACK_INV_SIG,
    PACK_LAM,
    PACK_P_ALPHA,
    PACK_P_EPS,
    PACK_R_FAR2,
    PACK_R_MIN,
    PACK_R_SKIP2,
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN10_20 = 20.0 / math.log(10.0)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _active_mask(dx, dy, c, s, sp):
    r2 = dx * dx + dy * dy
    keep = (r2 >= sp[PACK_R_SKIP2]) & (r2 <= sp[PACK_R_FAR2])
    if sp[PACK_COS_BACK] > -1.5:
        fwd = dx * c + dy * s
        keep &= fwd >= sp[PACK_COS_BACK] * np.sqrt(r2)
    return keep


def _rate_terms(dx, dy, c, s, sp):
    """Detection rate and its factors on active (already masked) offsets.

    Returns a dict so the backward pass can reuse the forward evaluation.
    """
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    rc = np.maximum(r, sp[PACK_R_MIN])
    tl = _LN10_20 * np.log(rc) + sp[PACK_ATT_M] * rc
    u = (sp[PACK_FOM] - tl) * sp[PACK_INV_SIG]
    p = 0.5 * erfc(-u * _INV_SQRT2)
    fwd = dx * c + dy * s
    lat = -dx * s + dy * c
    alpha = np.arctan2(lat, fwd)
    za = sp[PACK_P_ALPHA] * (alpha + sp[PACK_HALF_ALPHA])
    zb = sp[PACK_P_ALPHA] * (sp[PACK_HALF_ALPHA] - alpha)
    sa, sb = _sigmoid(za), _sigmoid(zb)
    fa = sa + sb - 1.0
    eps = np.arctan(-sp[PACK_HEIGHT] / rc)
    z1 = sp[PACK_P_EPS] * (eps - sp[PACK_EPS_LO])
    z2 = sp[PACK_P_EPS] * (sp[PACK_EPS_HI] - eps)
    s1, s2 = _sigmoid(z1), _sigmoid(z2)
    fe = s1 + s2 - 1.0
    gam = sp[PACK_LAM] * p * fa * fe
    return {
        "r": r, "r2": r2, "rc": rc, "u": u, "p": p, "fa": fa, "fe": fe,
        "sa": sa, "sb": sb, "s1": s1, "s2": s2, "gam": gam,
        "dx": dx, "dy": dy,
    }


def _trap_weights(m1, dt):
    w = np.full(m1, dt)
    w[0] = 0.5 * dt
    w[-1] = 0.5 * dt
    return w


def exposure_forward(states, pts, sp, dt):
    """Trapezoid-rule exposure of each point to a sampled trajectory.

    states: (m+1, >=3) rows (x, y, psi, ...) at uniform spacing dt.
    Returns E with shape (M,).
    """
    states = np.asarray(states, dtype=float)
    pts = np.asarray(pts, dtype=float)
    E = np.zeros(pts.shape[0])
    m1 = states.shape[0]
    if m1 < 2:
        return E
    w = _trap_weights(m1, dt)
    px, py = pts[:, 0], pts[:, 1]
    for i in range(m1):
        c = math.cos(states[i, 2])
        s = math.sin(states[i, 2])
        dx = px - states[i, 0]
        dy = py - states[i, 1]
        keep = _active_mask(dx, dy, c, s, sp)
        if not np.any(keep):
            continue
        t = _rate_terms(dx[keep], dy[keep], c, s, sp)
        E[keep] += w[i] * t["gam"]
    return E


def exposure_backward(states, pts, sp, dt, wE):
    """Adjoint of exposure_forward with respect to the trajectory samples.

    wE holds dM/dE per point; returns g_states of shape (m+1, 3) with
    dM/d(x_i, y_i, psi_i).
    """
    states = np.asarray(states, dtype=float)
    pts = np.asarray(pts, dtype=float)
    wE = np.asarray(wE, dtype=float)
    m1 = states.shape[0]
    g = np.zeros((m1, 3))
    if m1 < 2:
        return g
    w = _trap_weights(m1, dt)
    px, py = pts[:, 0], pts[:, 1]
    lam = sp[PACK_LAM]
    pa, pe = sp[PACK_P_ALPHA], sp[PACK_P_EPS]
    h, r_min = sp[PACK_HEIGHT], sp[PACK_R_MIN]
    for i in range(m1):
        c = math.cos(states[i, 2])
        s = math.sin(states[i, 2])
        dx = px - states[i, 0]
        dy = py - states[i, 1]
        keep = _active_mask(dx, dy, c, s, sp)
        if not np.any(keep):
            continue
        t = _rate_terms(dx[keep], dy[keep], c, s, sp)
        wk = wE[keep]
        r, r2, rc = t["r"], t["r2"], t["rc"]
        dxk, dyk = t["dx"], t["dy"]
        # d(p)/dr: Gaussian pdf times -TL'(r)/sigma; dead once r < r_min.
        phi = _INV_SQRT2PI * np.exp(-0.5 * t["u"] * t["u"])
        dtl = np.where(r > r_min, _LN10_20 / rc + sp[PACK_ATT_M], 0.0)
        dp_dr = -phi * dtl * sp[PACK_INV_SIG]
        dfa_da = pa * (t["sa"] * (1.0 - t["sa"]) - t["sb"] * (1.0 - t["sb"]))
        dfe_de = pe * (t["s1"] * (1.0 - t["s1"]) - t["s2"] * (1.0 - t["s2"]))
        deps_dr = np.where(r > r_min, h / (rc * rc + h * h), 0.0)
        # dr/dx = -dx/r etc. (vehicle position enters with a minus sign);
        # dalpha/dx = dy/r2, dalpha/dy = -dx/r2, dalpha/dpsi = -1.
        gr = (dp_dr * t["fa"] * t["fe"] + t["p"] * t["fa"] * dfe_de * deps_dr) * lam
        ga = t["p"] * dfa_da * t["fe"] * lam
        gx = gr * (-dxk / r) + ga * (dyk / r2)
        gy = gr * (-dyk / r) + ga * (-dxk / r2)
        gp = -ga
        g[i, 0] = w[i] * np.dot(wk, gx)
        g[i, 1] = w[i] * np.dot(wk, gy)
        g[i, 2] = w[i] * np.dot(wk, gp)
    return g


def _deriv(psi, r, d, V, K, Tn):
    return (V * math.cos(psi), V * math.sin(psi), r, (K * d - r) / Tn)


def simulate_rk4(y0, d_half, t_final, n, V, K, Tn):
    """Classic RK4 on the surge-Nomoto model with rudder given on the
    half-step grid: d_half[2i], d_half[2i+1], d_half[2i+2] are the rudder
    at t_i, t_{i+1/2}, t_{i+1}.  Returns states (n+1, 4)."""
    y0 = np.asarray(y0, dtype=float)
    d_half = np.asarray(d_half, dtype=float)
    if d_half.shape[0] != 2 * n + 1:
        raise ValueError("d_half must have 2*n+1 samples")
    out = np.empty((n + 1, 4))
    out[0] = y0
    dt = t_final / n
    h2 = 0.5 * dt
    x, y, psi, r = y0
    for i in range(n):
        da, db, dc = d_half[2 * i], d_half[2 * i + 1], d_half[2 * i + 2]
        k1 = _deriv(psi, r, da, V, K, Tn)
        k2 = _deriv(psi + h2 * k1[2], r + h2 * k1[3], db, V, K, Tn)
        k3 = _deriv(psi + h2 * k2[2], r + h2 * k2[3], db, V, K, Tn)
        k4 = _deriv(psi + dt * k3[2], r + dt * k3[3], dc, V, K, Tn)
        x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        psi += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        r += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        out[i + 1] = (x, y, psi, r)
    return out


def rk4_adjoint(states, d_half, t_final, n, V, K, Tn, lam_in):
    """Reverse sweep of simulate_rk4.

    lam_in (n+1, 4) carries dM/d(state_i) contributions injected at each
    grid index (exposure pullback plus terminal terms).  Returns
    (g_dhalf (2n+1,), g_tfinal) holding dM/d(rudder samples) and the
    gradient with respect to t_final through the step size.
    """
    states = np.asarray(states, dtype=float)
    d_half = np.asarray(d_half, dtype=float)
    lam_in = np.asarray(lam_in, dtype=float)
    g_d = np.zeros(2 * n + 1)
    dt = t_final / n
    h2 = 0.5 * dt
    g_tf = 0.0
    lx, ly, lp, lr = lam_in[n]
    for i in range(n - 1, -1, -1):
        xi, yi, pi_, ri = states[i]
        da, db, dc = d_half[2 * i], d_half[2 * i + 1], d_half[2 * i + 2]
        k1 = _deriv(pi_, ri, da, V, K, Tn)
        pa_ = pi_ + h2 * k1[2]
        ra = ri + h2 * k1[3]
        k2 = _deriv(pa_, ra, db, V, K, Tn)
        pb = pi_ + h2 * k2[2]
        rb = ri + h2 * k2[3]
        k3 = _deriv(pb, rb, db, V, K, Tn)
        pc = pi_ + dt * k3[2]
        rc = ri + dt * k3[3]
        k4 = _deriv(pc, rc, dc, V, K, Tn)

        g_dt = (lx * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                + ly * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                + lp * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
                + lr * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])) / 6.0
        w1 = dt / 6.0
        w2 = dt / 3.0

        g_pi = 0.0
        g_ri = 0.0
        # k4 at (pc, rc, dc)
        g_pc = -V * math.sin(pc) * (w1 * lx) + V * math.cos(pc) * (w1 * ly)
        g_rc = w1 * lp - (w1 * lr) / Tn
        g_d[2 * i + 2] += (w1 * lr) * K / Tn
        g_pi += g_pc
        g_ri += g_rc
        g_dt += g_pc * k3[2] + g_rc * k3[3]
        # k3 at (pb, rb, db); stage adjoint picks up dt * g_pc through pc.
        l3p = w2 * lp + dt * g_pc
        l3r = w2 * lr + dt * g_rc
        g_pb = -V * math.sin(pb) * (w2 * lx) + V * math.cos(pb) * (w2 * ly)
        g_rb = l3p - l3r / Tn
        g_d[2 * i + 1] += l3r * K / Tn
        g_pi += g_pb
        g_ri += g_rb
        g_dt += 0.5 * (g_pb * k2[2] + g_rb * k2[3])
        # k2 at (pa_, ra, db)
        l2p = w2 * lp + h2 * g_pb
        l2r = w2 * lr + h2 * g_rb
        g_pa = -V * math.sin(pa_) * (w2 * lx) + V * math.cos(pa_) * (w2 * ly)
        g_ra = l2p - l2r / Tn
        g_d[2 * i + 1] += l2r * K / Tn
        g_pi += g_pa
        g_ri += g_ra
        g_dt += 0.5 * (g_pa * k1[2] + g_ra * k1[3])
        # k1 at (pi_, ri, da)
        l1p = w1 * lp + h2 * g_pa
        l1r = w1 * lr + h2 * g_ra
        g_pi += -V * math.sin(pi_) * (w1 * lx) + V * math.cos(pi_) * (w1 * ly)
        g_ri += l1p - l1r / Tn
        g_d[2 * i] += l1r * K / Tn

        g_tf += g_dt / n
        lp = lp + g_pi + lam_in[i, 2]
        lr = lr + g_ri + lam_in[i, 3]
        lx = lx + lam_in[i, 0]
        ly = ly + lam_in[i, 1]
    return g_d, g_tf
