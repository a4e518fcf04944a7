"""Pure-Python reference kernels.

Same signatures and semantics as the compiled ``_kernels`` extension;
used when the extension is unavailable or ``VSTC_PURE_PYTHON=1``.
"""

from __future__ import annotations

import math

import numpy as np

# ---------------------------------------------------------------- simplex eta file
#
# The basis inverse is kept as  B^-1 = E_k ... E_1 (LU)^-1  where each
# elementary matrix E differs from the identity in column r, built from
# the entering column w = B^-1 a_q:  E[r, r] = 1 / w[r],  E[i, r] = -w[i] / w[r].


def eta_ftran(v: np.ndarray, rows: np.ndarray, W: np.ndarray, count: int) -> None:
    """Apply E_1 .. E_count to ``v`` in place."""
    for e in range(count):
        r = rows[e]
        w = W[e]
        vr = v[r] / w[r]
        if vr != 0.0:
            v -= vr * w
        v[r] = vr


def eta_btran(v: np.ndarray, rows: np.ndarray, W: np.ndarray, count: int) -> None:
    """Apply E_count^T .. E_1^T to ``v`` in place."""
    for e in range(count - 1, -1, -1):
        r = rows[e]
        w = W[e]
        vr = v[r]
        s = float(np.dot(w, v)) - w[r] * vr
        v[r] = (vr - s) / w[r]


# ---------------------------------------------------------------- bicycle model


def rollout(s0: np.ndarray, controls: np.ndarray, dt: float, L_w: float) -> np.ndarray:
    """Discrete kinematic bicycle rollout; returns (T+1, 5) states x, y, psi, v, a."""
    n = controls.shape[0]
    out = np.empty((n, 5))
    x, y, psi, v, a = (float(s0[0]), float(s0[1]), float(s0[2]), float(s0[3]), float(s0[4]))
    out[0] = (x, y, psi, v, a)
    for t in range(n - 1):
        jerk = controls[t, 0]
        phi = controls[t, 1]
        nx = x + v * math.cos(psi) * dt
        ny = y + v * math.sin(psi) * dt
        npsi = psi + v * math.tan(phi) / L_w * dt
        nv = v + a * dt
        na = a + jerk * dt
        x, y, psi, v, a = nx, ny, npsi, nv, na
        out[t + 1] = (x, y, psi, v, a)
    return out


def _al_ineq(g: float, lam: float, rho: float) -> tuple[float, float]:
    """Augmented-Lagrangian term for g <= 0 and its derivative in g."""
    s = lam + rho * g
    if s > 0.0:
        return (s * s - lam * lam) / (2.0 * rho), s
    return -lam * lam / (2.0 * rho), 0.0


def al_objective(
    controls: np.ndarray,
    s0: np.ndarray,
    dt: float,
    L_w: float,
    w1: float,
    w2: float,
    box: np.ndarray,
    limits: np.ndarray,
    target: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
    rho: float,
    grad: np.ndarray,
) -> float:
    """Augmented-Lagrangian objective of the single-shooting trajectory problem.

    ``controls`` (T+1, 2) holds jerk and steering; ``box`` (T+1, 4) the
    per-step position bounds x_lo, x_hi, y_lo, y_hi; ``limits`` is
    (a_lo, a_hi, v_lo, v_hi).  ``lam`` (T+1, 8) are the inequality
    multipliers in the order x_lo, x_hi, y_lo, y_hi, a_lo, a_hi, v_lo, v_hi
    and ``mu`` (2,) the terminal-position multipliers.  Writes the exact
    gradient into ``grad`` (T+1, 2) and returns the value.
    """
    n = controls.shape[0]
    T = n - 1
    S = rollout(s0, controls, dt, L_w)
    # explicit partials of the objective w.r.t. the states
    gs = np.zeros((n, 5))
    grad[:, :] = 0.0
    val = 0.0
    a_lo, a_hi, v_lo, v_hi = limits
    for t in range(n):
        jerk = controls[t, 0]
        a = S[t, 4]
        val += w1 * (jerk * jerk + a * a)
        grad[t, 0] += 2.0 * w1 * jerk
        gs[t, 4] += 2.0 * w1 * a
        if t >= 1:
            dpsi = S[t, 2] - S[t - 1, 2]
            dphi = controls[t, 1] - controls[t - 1, 1]
            val += w2 * (dpsi * dpsi + dphi * dphi)
            gs[t, 2] += 2.0 * w2 * dpsi
            gs[t - 1, 2] -= 2.0 * w2 * dpsi
            grad[t, 1] += 2.0 * w2 * dphi
            grad[t - 1, 1] -= 2.0 * w2 * dphi
        # inequality constraints g <= 0
        x, y, v = S[t, 0], S[t, 1], S[t, 3]
        cons = (
            (box[t, 0] - x, 0, -1.0),
            (x - box[t, 1], 0, 1.0),
            (box[t, 2] - y, 1, -1.0),
            (y - box[t, 3], 1, 1.0),
            (a_lo - a, 4, -1.0),
            (a - a_hi, 4, 1.0),
            (v_lo - v, 3, -1.0),
            (v - v_hi, 3, 1.0),
        )
        for c, (g, comp, sign) in enumerate(cons):
            term, dg = _al_ineq(g, lam[t, c], rho)
            val += term
            if dg != 0.0:
                gs[t, comp] += dg * sign
    # terminal equality
    hx = S[T, 0] - target[0]
    hy = S[T, 1] - target[1]
    val += mu[0] * hx + 0.5 * rho * hx * hx + mu[1] * hy + 0.5 * rho * hy * hy
    gs[T, 0] += mu[0] + rho * hx
    gs[T, 1] += mu[1] + rho * hy

    # reverse sweep through the recurrence
    p = gs[T].copy()
    for t in range(T - 1, -1, -1):
        psi, v = S[t, 2], S[t, 3]
        phi = controls[t, 1]
        c, s = math.cos(psi), math.sin(psi)
        tp = math.tan(phi)
        px, py, ppsi, pv, pa = p
        grad[t, 0] += pa * dt
        grad[t, 1] += ppsi * v * (1.0 + tp * tp) / L_w * dt
        p = np.array(
            (
                gs[t, 0] + px,
                gs[t, 1] + py,
                gs[t, 2] + ppsi - px * v * s * dt + py * v * c * dt,
                gs[t, 3] + pv + px * c * dt + py * s * dt + ppsi * tp / L_w * dt,
                gs[t, 4] + pa + pv * dt,
            )
        )
    return float(val)
