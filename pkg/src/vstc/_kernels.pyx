# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: simplex eta-file application and the bicycle-model
single-shooting objective with its adjoint gradient.

Semantics match ``vstc._kernels_py`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, tan

cnp.import_array()


def eta_ftran(double[::1] v, long[::1] rows, double[:, ::1] W, int count):
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t e, i, r
    cdef double vr
    with nogil:
        for e in range(count):
            r = rows[e]
            vr = v[r] / W[e, r]
            if vr != 0.0:
                for i in range(m):
                    v[i] -= vr * W[e, i]
            v[r] = vr


def eta_btran(double[::1] v, long[::1] rows, double[:, ::1] W, int count):
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t e, i, r
    cdef double s, vr
    with nogil:
        for e in range(count - 1, -1, -1):
            r = rows[e]
            vr = v[r]
            s = 0.0
            for i in range(m):
                s += W[e, i] * v[i]
            s -= W[e, r] * vr
            v[r] = (vr - s) / W[e, r]


cdef void _rollout(double[::1] s0, double[:, ::1] u, double dt, double L_w,
                   double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t t
    cdef double x = s0[0], y = s0[1], psi = s0[2], v = s0[3], a = s0[4]
    cdef double nx, ny, npsi, nv, na
    out[0, 0] = x; out[0, 1] = y; out[0, 2] = psi; out[0, 3] = v; out[0, 4] = a
    for t in range(n - 1):
        nx = x + v * cos(psi) * dt
        ny = y + v * sin(psi) * dt
        npsi = psi + v * tan(u[t, 1]) / L_w * dt
        nv = v + a * dt
        na = a + u[t, 0] * dt
        x = nx; y = ny; psi = npsi; v = nv; a = na
        out[t + 1, 0] = x; out[t + 1, 1] = y; out[t + 1, 2] = psi
        out[t + 1, 3] = v; out[t + 1, 4] = a


def rollout(s0, controls, double dt, double L_w):
    cdef double[::1] s = np.ascontiguousarray(s0, dtype=np.float64)
    cdef double[:, ::1] u = np.ascontiguousarray(controls, dtype=np.float64)
    out = np.empty((u.shape[0], 5))
    cdef double[:, ::1] o = out
    with nogil:
        _rollout(s, u, dt, L_w, o)
    return out


cdef inline double _al_term(double g, double lam, double rho, double* dg) noexcept nogil:
    cdef double s = lam + rho * g
    if s > 0.0:
        dg[0] = s
        return (s * s - lam * lam) / (2.0 * rho)
    dg[0] = 0.0
    return -lam * lam / (2.0 * rho)


def al_objective(controls, s0, double dt, double L_w, double w1, double w2,
                 box, limits, target, lam, mu, double rho, grad):
    cdef double[:, ::1] u = np.ascontiguousarray(controls, dtype=np.float64)
    cdef double[::1] s = np.ascontiguousarray(s0, dtype=np.float64)
    cdef double[:, ::1] bx = np.ascontiguousarray(box, dtype=np.float64)
    cdef double[::1] lim = np.ascontiguousarray(limits, dtype=np.float64)
    cdef double[::1] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef double[:, ::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] mm = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[:, ::1] g = grad
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t T = n - 1
    S_arr = np.empty((n, 5))
    gs_arr = np.zeros((n, 5))
    cdef double[:, ::1] S = S_arr
    cdef double[:, ::1] gs = gs_arr
    cdef Py_ssize_t t
    cdef double val = 0.0, jerk, a, dpsi, dphi, x, y, v, term, dgv
    cdef double a_lo = lim[0], a_hi = lim[1], v_lo = lim[2], v_hi = lim[3]
    cdef double hx, hy, px, py, ppsi, pv, pa, npx, npy, nppsi, npv, npa
    cdef double c, sn, tp, psi, phi
    with nogil:
        _rollout(s, u, dt, L_w, S)
        for t in range(n):
            g[t, 0] = 0.0
            g[t, 1] = 0.0
        for t in range(n):
            jerk = u[t, 0]
            a = S[t, 4]
            val += w1 * (jerk * jerk + a * a)
            g[t, 0] += 2.0 * w1 * jerk
            gs[t, 4] += 2.0 * w1 * a
            if t >= 1:
                dpsi = S[t, 2] - S[t - 1, 2]
                dphi = u[t, 1] - u[t - 1, 1]
                val += w2 * (dpsi * dpsi + dphi * dphi)
                gs[t, 2] += 2.0 * w2 * dpsi
                gs[t - 1, 2] -= 2.0 * w2 * dpsi
                g[t, 1] += 2.0 * w2 * dphi
                g[t - 1, 1] -= 2.0 * w2 * dphi
            x = S[t, 0]; y = S[t, 1]; v = S[t, 3]
            val += _al_term(bx[t, 0] - x, lm[t, 0], rho, &dgv); gs[t, 0] -= dgv
            val += _al_term(x - bx[t, 1], lm[t, 1], rho, &dgv); gs[t, 0] += dgv
            val += _al_term(bx[t, 2] - y, lm[t, 2], rho, &dgv); gs[t, 1] -= dgv
            val += _al_term(y - bx[t, 3], lm[t, 3], rho, &dgv); gs[t, 1] += dgv
            val += _al_term(a_lo - a, lm[t, 4], rho, &dgv); gs[t, 4] -= dgv
            val += _al_term(a - a_hi, lm[t, 5], rho, &dgv); gs[t, 4] += dgv
            val += _al_term(v_lo - v, lm[t, 6], rho, &dgv); gs[t, 3] -= dgv
            val += _al_term(v - v_hi, lm[t, 7], rho, &dgv); gs[t, 3] += dgv
        hx = S[T, 0] - tg[0]
        hy = S[T, 1] - tg[1]
        val += mm[0] * hx + 0.5 * rho * hx * hx + mm[1] * hy + 0.5 * rho * hy * hy
        gs[T, 0] += mm[0] + rho * hx
        gs[T, 1] += mm[1] + rho * hy

        px = gs[T, 0]; py = gs[T, 1]; ppsi = gs[T, 2]; pv = gs[T, 3]; pa = gs[T, 4]
        for t in range(T - 1, -1, -1):
            psi = S[t, 2]; v = S[t, 3]
            phi = u[t, 1]
            c = cos(psi); sn = sin(psi); tp = tan(phi)
            g[t, 0] += pa * dt
            g[t, 1] += ppsi * v * (1.0 + tp * tp) / L_w * dt
            npx = gs[t, 0] + px
            npy = gs[t, 1] + py
            nppsi = gs[t, 2] + ppsi - px * v * sn * dt + py * v * c * dt
            npv = gs[t, 3] + pv + px * c * dt + py * sn * dt + ppsi * tp / L_w * dt
            npa = gs[t, 4] + pa + pv * dt
            px = npx; py = npy; ppsi = nppsi; pv = npv; pa = npa
    return val
