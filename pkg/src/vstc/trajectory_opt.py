"""Trajectory generation inside a pruned corridor.

Single shooting over the controls (jerk, steering) of the discrete
kinematic bicycle model.  Box bounds on steering are handled by the
quasi-Newton inner solver (L-BFGS-B); acceleration, speed, per-step
corridor containment and the terminal position enter an augmented
Lagrangian outer loop.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import _core
from .corridor_model import Corridor
from .scenario import PlannerParams, VehicleSpec

__all__ = [
    "VehicleState",
    "ControlInput",
    "Trajectory",
    "NlpConfig",
    "TrajectoryError",
    "TRAJECTORY_COLUMNS",
    "rollout",
    "rollout_array",
    "assign_cube_schedule",
    "step_boxes",
    "penalized_objective",
    "objective_gradient",
    "composite_objective",
    "solve_trajectory",
    "trajectory_to_csv",
]

TRAJECTORY_COLUMNS = ("t", "x", "y", "psi", "v", "a", "jerk", "phi", "cube_index")


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float
    v: float
    a: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi, self.v, self.a], dtype=float)

    @classmethod
    def from_array(cls, s) -> "VehicleState":
        return cls(float(s[0]), float(s[1]), float(s[2]), float(s[3]), float(s[4]))


@dataclass(frozen=True)
class ControlInput:
    jerk: float
    phi: float


@dataclass(frozen=True)
class NlpConfig:
    delta_t: float = 0.1
    w1: float = 1.0
    w2: float = 1.0
    eps_c: float = 1e-4
    eps_pos: float = 0.1
    max_outer: int = 40
    max_inner: int = 400
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e9

    def __post_init__(self) -> None:
        if self.delta_t <= 0:
            raise TrajectoryError("delta_t must be positive")
        if self.eps_c <= 0 or self.eps_pos <= 0:
            raise TrajectoryError("tolerances must be positive")
        if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 <= 0:
            raise TrajectoryError("weights must be nonnegative and not both zero")
        if self.max_outer < 1 or self.max_inner < 1:
            raise TrajectoryError("iteration limits must be positive")


@dataclass
class Trajectory:
    """Sampled trajectory; ``states[t]`` is the rollout of ``controls`` to step t."""

    vehicle_id: int
    delta_t: float
    states: np.ndarray  # (T+1, 5): x, y, psi, v, a
    controls: np.ndarray  # (T+1, 2): jerk, phi
    cube_index: np.ndarray  # (T+1,) zero-based
    objective: float = math.nan
    max_violation: float = math.nan
    endpoint_error: float = math.nan
    feasible: bool = False
    outer_iterations: int = 0
    inner_iterations: int = 0
    violation_profile: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""

    @property
    def T(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.T + 1) * self.delta_t

    @property
    def horizon(self) -> float:
        return self.T * self.delta_t

    def state(self, t: int) -> VehicleState:
        return VehicleState.from_array(self.states[t])


def rollout_array(s0, controls, delta_t: float, L_w: float) -> np.ndarray:
    """(T+1, 5) states from ``s0`` under ``controls`` (T+1, 2); the last control is unused."""
    if delta_t <= 0:
        raise TrajectoryError("delta_t must be positive")
    u = np.ascontiguousarray(controls, dtype=float).reshape(-1, 2)
    s = np.ascontiguousarray(s0.as_array() if isinstance(s0, VehicleState) else s0, dtype=float)
    return _core.rollout(s, u, float(delta_t), float(L_w))


def rollout(
    s0: VehicleState, controls: Sequence[ControlInput], delta_t: float, L_w: float
) -> list[VehicleState]:
    """Apply the five bicycle-model difference equations step by step.

    ``controls`` has one entry per state; the entry at step t drives the
    transition to t+1, so T+1 controls give T+1 states.
    """
    u = np.array([[c.jerk, c.phi] for c in controls], dtype=float).reshape(-1, 2)
    return [VehicleState.from_array(r) for r in rollout_array(s0, u, delta_t, L_w)]


def assign_cube_schedule(corridor: Corridor, delta_t: float, T: int | None = None) -> list[int]:
    """Zero-based cube index for each step 0..T.

    Step t belongs to the cube whose half-open window [t_l, t_u) holds
    t * delta_t; a step on a junction goes to the later cube and the last
    step to the last cube.  ``T`` defaults to round(horizon / delta_t).
    """
    cubes = corridor.cubes
    if not cubes:
        raise TrajectoryError(f"vehicle {corridor.vehicle_id}: empty corridor")
    if delta_t <= 0:
        raise TrajectoryError("delta_t must be positive")
    scale = max(1.0, corridor.horizon)
    for k in range(1, len(cubes)):
        if abs(cubes[k].t_l - cubes[k - 1].t_u) > 1e-9 * scale:
            raise TrajectoryError(
                f"vehicle {corridor.vehicle_id}: time gap between cubes {k} and {k + 1}"
            )
    if T is None:
        T = int(round(corridor.horizon / delta_t))
    starts = np.array([c.t_l for c in cubes])
    tol = 1e-9 * scale
    out = []
    for t in range(T + 1):
        if t == T:
            out.append(len(cubes) - 1)
            continue
        tt = t * delta_t
        k = int(np.searchsorted(starts, tt + tol, side="right")) - 1
        out.append(min(max(k, 0), len(cubes) - 1))
    return out


def step_boxes(corridor: Corridor, schedule: Sequence[int], gamma_r: float) -> np.ndarray:
    """(T+1, 4) position bounds: each step's cube inset by gamma_r / 2."""
    h = 0.5 * gamma_r
    out = np.empty((len(schedule), 4))
    for t, k in enumerate(schedule):
        c = corridor.cubes[k]
        out[t] = (c.x_l + h, c.x_u - h, c.y_l + h, c.y_u - h)
    return out


@dataclass
class _Problem:
    s0: np.ndarray
    dt: float
    L_w: float
    w1: float
    w2: float
    box: np.ndarray
    limits: np.ndarray
    target: np.ndarray
    phi_bounds: tuple[float, float]
    schedule: list[int]

    @property
    def n(self) -> int:
        return len(self.box)


def _setup(
    corridor: Corridor, vehicle: VehicleSpec, params: PlannerParams, cfg: NlpConfig, normalize: bool = True
) -> _Problem:
    K = len(corridor.cubes)
    if K == 0:
        raise TrajectoryError(f"vehicle {vehicle.id}: empty corridor")
    H = corridor.horizon
    T = int(round(H / cfg.delta_t))
    if T < K or T < 1:
        raise TrajectoryError(f"vehicle {vehicle.id}: T >= K^i required (T={T}, K={K})")
    dt = H / T
    schedule = assign_cube_schedule(corridor, dt, T)
    box = step_boxes(corridor, schedule, params.gamma_r)
    s0 = np.array([vehicle.x_initial, vehicle.y_initial, vehicle.psi_initial, vehicle.v_initial, 0.0])
    limits = np.array([params.a_min, params.a_max, 0.0, params.v_max])
    # the minimizer only depends on the weight ratio; normalizing keeps the
    # penalty schedule independent of the overall weight scale
    scale = 0.5 * (cfg.w1 + cfg.w2) if normalize else 1.0
    return _Problem(
        s0, dt, params.L_w, cfg.w1 / scale, cfg.w2 / scale, box, limits,
        np.array(vehicle.target, dtype=float), (params.phi_min, params.phi_max), schedule,
    )


def _al(u: np.ndarray, prob: _Problem, lam: np.ndarray, mu: np.ndarray, rho: float) -> tuple[float, np.ndarray]:
    grad = np.zeros((prob.n, 2))
    u2 = np.ascontiguousarray(u.reshape(-1, 2))
    val = _core.al_objective(
        u2, prob.s0, prob.dt, prob.L_w, prob.w1, prob.w2, prob.box, prob.limits, prob.target, lam, mu, rho, grad
    )
    return val, grad.ravel()


def _constraints(prob: _Problem, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inequality values g (T+1, 8), g <= 0 feasible, and the terminal residual."""
    a_lo, a_hi, v_lo, v_hi = prob.limits
    x, y, v, a = S[:, 0], S[:, 1], S[:, 3], S[:, 4]
    g = np.stack(
        [prob.box[:, 0] - x, x - prob.box[:, 1], prob.box[:, 2] - y, y - prob.box[:, 3],
         a_lo - a, a - a_hi, v_lo - v, v - v_hi],
        axis=1,
    )
    return g, S[-1, :2] - prob.target


def penalized_objective(
    controls: np.ndarray,
    corridor: Corridor,
    vehicle: VehicleSpec,
    params: PlannerParams,
    cfg: NlpConfig,
    rho: float | None = None,
) -> tuple[float, np.ndarray]:
    """Value and gradient of comfort + smoothness + quadratic penalty ``rho``.

    The gradient is exact (reverse sweep through the rollout recurrence)
    and has the shape of ``controls`` (T+1, 2).  The weights are used as
    given, so both terms are linear in them.
    """
    prob = _setup(corridor, vehicle, params, cfg, normalize=False)
    u = np.asarray(controls, dtype=float).reshape(prob.n, 2)
    lam = np.zeros((prob.n, 8))
    val, g = _al(u, prob, lam, np.zeros(2), cfg.rho0 if rho is None else rho)
    return val, g.reshape(prob.n, 2)


def objective_gradient(controls, corridor, vehicle, params, cfg, rho: float | None = None) -> np.ndarray:
    return penalized_objective(controls, corridor, vehicle, params, cfg, rho)[1]


def composite_objective(states: np.ndarray, controls: np.ndarray, w1: float, w2: float) -> float:
    """w1 * sum(jerk^2 + a^2) + w2 * sum(dpsi^2 + dphi^2)."""
    comfort = float(np.sum(controls[:, 0] ** 2) + np.sum(states[:, 4] ** 2))
    smooth = float(np.sum(np.diff(states[:, 2]) ** 2) + np.sum(np.diff(controls[:, 1]) ** 2))
    return w1 * comfort + w2 * smooth


def _speed_profile_controls(prob: _Problem, vehicle: VehicleSpec, params: PlannerParams) -> np.ndarray:
    """Jerk sequence tracking a trapezoidal speed profile that covers the route in time.

    Accelerate (or decelerate, if allowed) at a constant rate after the
    first step, then hold the reached speed; the rate is chosen by
    bisection so the explicit update ends at the route length.
    """
    T, dt = prob.n - 1, prob.dt
    D = vehicle.route_length
    v0 = vehicle.v_initial

    def distance(rate: float) -> tuple[float, np.ndarray]:
        acc = np.zeros(T + 1)
        x, v, a = 0.0, v0, 0.0
        for t in range(T):
            x += v * dt
            v += a * dt
            v_next = min(max(v + rate * dt, 0.0), params.v_max)
            a = (v_next - v) / dt
            a = min(max(a, params.a_min), params.a_max)
            acc[t + 1] = a
        return x, acc

    lo, hi = params.a_min, params.a_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if distance(mid)[0] < D:
            lo = mid
        else:
            hi = mid
    acc = distance(0.5 * (lo + hi))[1]
    u = np.zeros((T + 1, 2))
    u[:-1, 0] = np.diff(acc) / dt
    return u


def _bounds(prob: _Problem) -> list[tuple[float | None, float | None]]:
    lo, hi = prob.phi_bounds
    out = []
    for t in range(prob.n):
        out.append((None, None))
        # steering starts at zero
        out.append((0.0, 0.0) if t == 0 else (lo, hi))
    return out


def solve_trajectory(
    corridor: Corridor, vehicle: VehicleSpec, params: PlannerParams, cfg: NlpConfig | None = None
) -> Trajectory:
    """Locally optimal trajectory inside ``corridor``; never raises on non-convergence.

    The result carries ``feasible`` and the violation profile; a failed
    solve returns the best iterate found.
    """
    cfg = cfg or NlpConfig()
    prob = _setup(corridor, vehicle, params, cfg)
    bounds = _bounds(prob)
    inner_total = 0
    outer_total = 0
    best = None

    def measure(u: np.ndarray) -> tuple[float, float, np.ndarray]:
        S = rollout_array(prob.s0, u.reshape(-1, 2), prob.dt, prob.L_w)
        g, hres = _constraints(prob, S)
        prof = np.maximum(g.max(axis=1), 0.0)
        return float(prof.max()), float(np.hypot(*hres)), prof

    def ok(viol: float, err: float) -> bool:
        return viol <= cfg.eps_c and err <= cfg.eps_pos

    def run(u0: np.ndarray, max_outer: int) -> tuple[np.ndarray, bool]:
        nonlocal inner_total, outer_total, best
        u = u0.ravel().copy()
        lam = np.zeros((prob.n, 8))
        mu = np.zeros(2)
        rho = cfg.rho0
        prev = math.inf
        for _ in range(max_outer):
            res = minimize(
                _al, u, args=(prob, lam, mu, rho), jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": cfg.max_inner, "ftol": 1e-15, "gtol": 1e-10},
            )
            u = res.x
            inner_total += int(res.nit)
            outer_total += 1
            S = rollout_array(prob.s0, u.reshape(-1, 2), prob.dt, prob.L_w)
            g, hres = _constraints(prob, S)
            lam = np.maximum(lam + rho * g, 0.0)
            mu = mu + rho * hres
            viol = float(max(np.maximum(g, 0.0).max(), 0.0))
            err = float(np.hypot(*hres))
            score = max(viol / cfg.eps_c, err / cfg.eps_pos)
            if best is None or score < best[0]:
                best = (score, u.copy())
            # terminal residual is driven well below its tolerance
            if viol <= 0.5 * cfg.eps_c and err <= 0.1 * cfg.eps_pos:
                return u, True
            if score > 0.25 * prev:
                rho = min(rho * cfg.rho_growth, cfg.rho_max)
            prev = score
        return u, False

    # a zero-control start; if one outer pass leaves it infeasible, restart
    # from a speed profile that covers the route in time
    u0 = np.zeros((prob.n, 2))
    u, done = run(u0, 1)
    if not done:
        u, done = run(_speed_profile_controls(prob, vehicle, params), cfg.max_outer)
    if not done and best is not None:
        u = best[1]
    u = u.reshape(-1, 2)
    S = rollout_array(prob.s0, u, prob.dt, prob.L_w)
    viol, err, prof = measure(u)
    obj = composite_objective(S, u, cfg.w1, cfg.w2)
    feasible = ok(viol, err)
    return Trajectory(
        vehicle_id=vehicle.id,
        delta_t=prob.dt,
        states=S,
        controls=u.copy(),
        cube_index=np.array(prob.schedule, dtype=np.int64),
        objective=float(obj),
        max_violation=viol,
        endpoint_error=err,
        feasible=feasible,
        outer_iterations=outer_total,
        inner_iterations=inner_total,
        violation_profile=prof,
        message="converged" if feasible else "constraint tolerance not reached",
    )


def trajectory_to_csv(traj: Trajectory) -> str:
    """Delimited table with header; one row per step, fixed column order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for t in range(traj.T + 1):
        x, y, psi, v, a = traj.states[t]
        jerk, phi = traj.controls[t]
        w.writerow([f"{t * traj.delta_t:.6f}"] + [f"{val:.9f}" for val in (x, y, psi, v, a, jerk, phi)]
                   + [int(traj.cube_index[t])])
    return buf.getvalue()
