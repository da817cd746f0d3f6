# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation kernels.

Mirrors fallback.py operation for operation, including the active-region
skip tests.  Any change here must be made there as well.
"""

from libc.math cimport atan, atan2, cos, erfc, exp, log, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327
cdef double LN10_20 = 8.685889638065037  # 20 / ln(10)

# Pack layout; keep identical to sensor.py.
cdef enum:
    P_LAM = 0
    P_INV_SIG = 1
    P_FOM = 2
    P_ATT_M = 3
    P_HALF_ALPHA = 4
    P_P_ALPHA = 5
    P_EPS_LO = 6
    P_EPS_HI = 7
    P_P_EPS = 8
    P_HEIGHT = 9
    P_R_MIN = 10
    P_R_SKIP2 = 11
    P_R_FAR2 = 12
    P_COS_BACK = 13


cdef inline double sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def exposure_forward(double[:, ::1] states, double[:, ::1] pts,
                     double[::1] sp, double dt):
    cdef Py_ssize_t m1 = states.shape[0]
    cdef Py_ssize_t M = pts.shape[0]
    E_arr = np.zeros(M)
    cdef double[::1] E = E_arr
    if m1 < 2:
        return E_arr
    cdef double lam = sp[P_LAM], inv_sig = sp[P_INV_SIG], fom = sp[P_FOM]
    cdef double att = sp[P_ATT_M], half_a = sp[P_HALF_ALPHA], pa = sp[P_P_ALPHA]
    cdef double eps_lo = sp[P_EPS_LO], eps_hi = sp[P_EPS_HI], pe = sp[P_P_EPS]
    cdef double h = sp[P_HEIGHT], r_min = sp[P_R_MIN]
    cdef double rskip2 = sp[P_R_SKIP2], rfar2 = sp[P_R_FAR2], cb = sp[P_COS_BACK]
    cdef int do_back = cb > -1.5
    cdef Py_ssize_t i, j
    cdef double w, x, y, psi, c, s, dx, dy, r2, r, rc, fwd, lat
    cdef double tl, u, p, alpha, fa, eps, fe
    with nogil:
        for i in range(m1):
            w = dt if 0 < i < m1 - 1 else 0.5 * dt
            x = states[i, 0]
            y = states[i, 1]
            psi = states[i, 2]
            c = cos(psi)
            s = sin(psi)
            for j in range(M):
                dx = pts[j, 0] - x
                dy = pts[j, 1] - y
                r2 = dx * dx + dy * dy
                if r2 < rskip2 or r2 > rfar2:
                    continue
                r = sqrt(r2)
                fwd = dx * c + dy * s
                if do_back and fwd < cb * r:
                    continue
                rc = r if r > r_min else r_min
                tl = LN10_20 * log(rc) + att * rc
                u = (fom - tl) * inv_sig
                p = 0.5 * erfc(-u * INV_SQRT2)
                lat = -dx * s + dy * c
                alpha = atan2(lat, fwd)
                fa = sigmoid(pa * (alpha + half_a)) + sigmoid(pa * (half_a - alpha)) - 1.0
                eps = atan(-h / rc)
                fe = sigmoid(pe * (eps - eps_lo)) + sigmoid(pe * (eps_hi - eps)) - 1.0
                E[j] += w * lam * p * fa * fe
    return E_arr


def exposure_backward(double[:, ::1] states, double[:, ::1] pts,
                      double[::1] sp, double dt, double[::1] wE):
    cdef Py_ssize_t m1 = states.shape[0]
    cdef Py_ssize_t M = pts.shape[0]
    g_arr = np.zeros((m1, 3))
    cdef double[:, ::1] g = g_arr
    if m1 < 2:
        return g_arr
    cdef double lam = sp[P_LAM], inv_sig = sp[P_INV_SIG], fom = sp[P_FOM]
    cdef double att = sp[P_ATT_M], half_a = sp[P_HALF_ALPHA], pa = sp[P_P_ALPHA]
    cdef double eps_lo = sp[P_EPS_LO], eps_hi = sp[P_EPS_HI], pe = sp[P_P_EPS]
    cdef double h = sp[P_HEIGHT], r_min = sp[P_R_MIN]
    cdef double rskip2 = sp[P_R_SKIP2], rfar2 = sp[P_R_FAR2], cb = sp[P_COS_BACK]
    cdef int do_back = cb > -1.5
    cdef Py_ssize_t i, j
    cdef double w, x, y, psi, c, s, dx, dy, r2, r, rc, fwd, lat
    cdef double tl, u, p, alpha, sa, sb, fa, eps, s1, s2, fe
    cdef double phi, dtl, dp_dr, dfa_da, dfe_de, deps_dr, gr, ga, wk
    cdef double accx, accy, accp
    with nogil:
        for i in range(m1):
            w = dt if 0 < i < m1 - 1 else 0.5 * dt
            x = states[i, 0]
            y = states[i, 1]
            psi = states[i, 2]
            c = cos(psi)
            s = sin(psi)
            accx = 0.0
            accy = 0.0
            accp = 0.0
            for j in range(M):
                dx = pts[j, 0] - x
                dy = pts[j, 1] - y
                r2 = dx * dx + dy * dy
                if r2 < rskip2 or r2 > rfar2:
                    continue
                r = sqrt(r2)
                fwd = dx * c + dy * s
                if do_back and fwd < cb * r:
                    continue
                rc = r if r > r_min else r_min
                tl = LN10_20 * log(rc) + att * rc
                u = (fom - tl) * inv_sig
                p = 0.5 * erfc(-u * INV_SQRT2)
                lat = -dx * s + dy * c
                alpha = atan2(lat, fwd)
                sa = sigmoid(pa * (alpha + half_a))
                sb = sigmoid(pa * (half_a - alpha))
                fa = sa + sb - 1.0
                eps = atan(-h / rc)
                s1 = sigmoid(pe * (eps - eps_lo))
                s2 = sigmoid(pe * (eps_hi - eps))
                fe = s1 + s2 - 1.0
                phi = INV_SQRT2PI * exp(-0.5 * u * u)
                if r > r_min:
                    dtl = LN10_20 / rc + att
                    deps_dr = h / (rc * rc + h * h)
                else:
                    dtl = 0.0
                    deps_dr = 0.0
                dp_dr = -phi * dtl * inv_sig
                dfa_da = pa * (sa * (1.0 - sa) - sb * (1.0 - sb))
                dfe_de = pe * (s1 * (1.0 - s1) - s2 * (1.0 - s2))
                gr = (dp_dr * fa * fe + p * fa * dfe_de * deps_dr) * lam
                ga = p * dfa_da * fe * lam
                wk = wE[j]
                accx += wk * (gr * (-dx / r) + ga * (dy / r2))
                accy += wk * (gr * (-dy / r) + ga * (-dx / r2))
                accp += wk * (-ga)
            g[i, 0] = w * accx
            g[i, 1] = w * accy
            g[i, 2] = w * accp
    return g_arr


def simulate_rk4(double[::1] y0, double[::1] d_half, double t_final,
                 Py_ssize_t n, double V, double K, double Tn):
    if d_half.shape[0] != 2 * n + 1:
        raise ValueError("d_half must have 2*n+1 samples")
    out_arr = np.empty((n + 1, 4))
    cdef double[:, ::1] out = out_arr
    cdef double dt = t_final / n
    cdef double h2 = 0.5 * dt
    cdef double x = y0[0], y = y0[1], psi = y0[2], r = y0[3]
    cdef Py_ssize_t i
    cdef double da, db, dc
    cdef double k1x, k1y, k1p, k1r, k2x, k2y, k2p, k2r
    cdef double k3x, k3y, k3p, k3r, k4x, k4y, k4p, k4r
    cdef double pa_, ra, pb, rb, pc, rc_
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = psi
    out[0, 3] = r
    with nogil:
        for i in range(n):
            da = d_half[2 * i]
            db = d_half[2 * i + 1]
            dc = d_half[2 * i + 2]
            k1x = V * cos(psi); k1y = V * sin(psi); k1p = r; k1r = (K * da - r) / Tn
            pa_ = psi + h2 * k1p; ra = r + h2 * k1r
            k2x = V * cos(pa_); k2y = V * sin(pa_); k2p = ra; k2r = (K * db - ra) / Tn
            pb = psi + h2 * k2p; rb = r + h2 * k2r
            k3x = V * cos(pb); k3y = V * sin(pb); k3p = rb; k3r = (K * db - rb) / Tn
            pc = psi + dt * k3p; rc_ = r + dt * k3r
            k4x = V * cos(pc); k4y = V * sin(pc); k4p = rc_; k4r = (K * dc - rc_) / Tn
            x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            psi = psi + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            r = r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
            out[i + 1, 0] = x
            out[i + 1, 1] = y
            out[i + 1, 2] = psi
            out[i + 1, 3] = r
    return out_arr


def rk4_adjoint(double[:, ::1] states, double[::1] d_half, double t_final,
                Py_ssize_t n, double V, double K, double Tn,
                double[:, ::1] lam_in):
    g_arr = np.zeros(2 * n + 1)
    cdef double[::1] g_d = g_arr
    cdef double dt = t_final / n
    cdef double h2 = 0.5 * dt
    cdef double g_tf = 0.0
    cdef double lx = lam_in[n, 0], ly = lam_in[n, 1]
    cdef double lp = lam_in[n, 2], lr = lam_in[n, 3]
    cdef Py_ssize_t i
    cdef double pi_, ri, da, db, dc
    cdef double k1x, k1y, k1p, k1r, k2x, k2y, k2p, k2r
    cdef double k3x, k3y, k3p, k3r, k4x, k4y, k4p, k4r
    cdef double pa_, ra, pb, rb, pc, rc_
    cdef double g_dt, w1, w2, g_pi, g_ri
    cdef double g_pc, g_rc, g_pb, g_rb, g_pa, g_ra
    cdef double l3p, l3r, l2p, l2r, l1p, l1r
    with nogil:
        for i in range(n - 1, -1, -1):
            pi_ = states[i, 2]
            ri = states[i, 3]
            da = d_half[2 * i]
            db = d_half[2 * i + 1]
            dc = d_half[2 * i + 2]
            k1x = V * cos(pi_); k1y = V * sin(pi_); k1p = ri; k1r = (K * da - ri) / Tn
            pa_ = pi_ + h2 * k1p; ra = ri + h2 * k1r
            k2x = V * cos(pa_); k2y = V * sin(pa_); k2p = ra; k2r = (K * db - ra) / Tn
            pb = pi_ + h2 * k2p; rb = ri + h2 * k2r
            k3x = V * cos(pb); k3y = V * sin(pb); k3p = rb; k3r = (K * db - rb) / Tn
            pc = pi_ + dt * k3p; rc_ = ri + dt * k3r
            k4x = V * cos(pc); k4y = V * sin(pc); k4p = rc_; k4r = (K * dc - rc_) / Tn

            g_dt = (lx * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                    + ly * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                    + lp * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
                    + lr * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)) / 6.0
            w1 = dt / 6.0
            w2 = dt / 3.0

            g_pi = 0.0
            g_ri = 0.0
            g_pc = -V * sin(pc) * (w1 * lx) + V * cos(pc) * (w1 * ly)
            g_rc = w1 * lp - (w1 * lr) / Tn
            g_d[2 * i + 2] += (w1 * lr) * K / Tn
            g_pi += g_pc
            g_ri += g_rc
            g_dt += g_pc * k3p + g_rc * k3r

            l3p = w2 * lp + dt * g_pc
            l3r = w2 * lr + dt * g_rc
            g_pb = -V * sin(pb) * (w2 * lx) + V * cos(pb) * (w2 * ly)
            g_rb = l3p - l3r / Tn
            g_d[2 * i + 1] += l3r * K / Tn
            g_pi += g_pb
            g_ri += g_rb
            g_dt += 0.5 * (g_pb * k2p + g_rb * k2r)

            l2p = w2 * lp + h2 * g_pb
            l2r = w2 * lr + h2 * g_rb
            g_pa = -V * sin(pa_) * (w2 * lx) + V * cos(pa_) * (w2 * ly)
            g_ra = l2p - l2r / Tn
            g_d[2 * i + 1] += l2r * K / Tn
            g_pi += g_pa
            g_ri += g_ra
            g_dt += 0.5 * (g_pa * k1p + g_ra * k1r)

            l1p = w1 * lp + h2 * g_pa
            l1r = w1 * lr + h2 * g_ra
            g_pi += -V * sin(pi_) * (w1 * lx) + V * cos(pi_) * (w1 * ly)
            g_ri += l1p - l1r / Tn
            g_d[2 * i] += l1r * K / Tn

            g_tf += g_dt / n
            lp = lp + g_pi + lam_in[i, 2]
            lr = lr + g_ri + lam_in[i, 3]
            lx = lx + lam_in[i, 0]
            ly = ly + lam_in[i, 1]
    return g_arr, g_tf
