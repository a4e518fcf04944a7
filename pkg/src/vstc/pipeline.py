"""End-to-end planning: corridors, pruning, trajectories and validation.

Stages run in order and each failure is reported with the name of the
stage it happened in.  Nothing here depends on wall-clock time unless a
time limit is given.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .baseline_stc import BaselineError, build_stc_model, waypoint_margins, waypoint_plan
from .corridor_model import (
    Corridor,
    CorridorError,
    Weights,
    build_vstc_model,
    extract_corridors,
    geometric_rounding,
    min_travel_time,
)
from .mip_solver import BnbConfig, solve_mip
from .mip_solver.backend import BackendError, ExternalBackend
from .pruning import PruningError, prune_corridor
from .scenario import Scenario
from .trajectory_opt import NlpConfig, Trajectory, TrajectoryError, solve_trajectory
from .validation import (
    ValidationReport,
    check_corridor_continuity,
    check_corridor_safety,
    check_endpoint_inclusion,
    check_trajectory,
    check_vehicle_separation,
)
from .warm_start import polish_corridors, prioritized_corridors, warm_start_vector

__all__ = ["METHODS", "PlanConfig", "PlanResult", "PlanningError", "plan", "plan_vstc", "plan_baseline"]

log = logging.getLogger(__name__)

METHODS = ("vstc", "stc-baseline")

# full-model branch-and-bound after construction only below this size
SMALL_MODEL_BINARIES = 3000


class PlanningError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class PlanConfig:
    K: int | None = None
    weights: Weights = field(default_factory=Weights)
    w1: float = 1.0
    w2: float = 1.0
    backend: ExternalBackend | None = None
    seed: int = 0
    time_limit: float | None = None
    node_limit: int = 2000
    envelope: bool = True
    workers: int = 4

    def nlp(self) -> NlpConfig:
        return NlpConfig(w1=self.w1, w2=self.w2)


@dataclass
class PlanResult:
    method: str
    ok: bool = False
    stage: str = ""
    message: str = ""
    solver_status: str = ""
    gap: float = math.inf
    corridors: list[Corridor] = field(default_factory=list)
    pruned: list[Corridor] = field(default_factory=list)
    trajectories: list[Trajectory] = field(default_factory=list)
    reports: list[ValidationReport] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return bool(self.corridors) and not self.stage

    @property
    def passed(self) -> bool:
        return self.feasible and all(r.passed for r in self.reports)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "status": "ok" if self.passed else ("infeasible" if not self.feasible else "validation-failed"),
            "failed_stage": self.stage or None,
            "message": self.message,
            "solver_status": self.solver_status,
            "gap": None if not math.isfinite(self.gap) else float(self.gap),
            "cubes": {c.vehicle_id: len(c.cubes) for c in self.corridors},
            "pruned_cubes": {c.vehicle_id: len(c.cubes) for c in self.pruned},
            "horizons": {c.vehicle_id: float(c.horizon) for c in self.pruned},
            "checks": {r.check: bool(r.passed) for r in self.reports},
        }


# ---------------------------------------------------------------- corridors


def _k_diagnosis(s: Scenario, K: int, envelope: bool) -> str:
    """Why a common cube count may be too small, if it is."""
    p = s.params
    worst = []
    for v in s.vehicles:
        t = min_travel_time(v.route_length, v.v_initial, p.a_max, p.v_max) if envelope else 0.0
        if t > K * p.t_max + 1e-9:
            worst.append((t, v.id))
    if not worst:
        return ""
    t, vid = max(worst)
    return f"; vehicle {vid} needs at least {t:.3f} s but K * t_max = {K * p.t_max:.3f} s"


def _solve_full(s: Scenario, cfg: PlanConfig, K, warm: np.ndarray | None = None, model=None):
    m = model if model is not None else build_vstc_model(s, K, cfg.weights, envelope=cfg.envelope)
    if cfg.backend is not None:
        sol = cfg.backend.solve(m)
    else:
        bnb = BnbConfig(node_limit=cfg.node_limit, time_limit=cfg.time_limit)
        sol = solve_mip(m.to_lp_problem(), bnb, warm_start=warm, heuristic=lambda z: geometric_rounding(m, z))
    return m, sol


def vstc_corridors(s: Scenario, cfg: PlanConfig) -> tuple[list[Corridor], str, float]:
    """Corridors from the variable-step model: (corridors, solver status, gap).

    With an external backend the full model is solved at the given cube
    count (default per-vehicle count when none is given).  Otherwise the
    corridors come from sequential construction and polishing; when the
    full model is small it is then improved by branch-and-bound from that
    incumbent.
    """
    if cfg.backend is not None:
        m, sol = _solve_full(s, cfg, cfg.K)
        if sol.x is None:
            raise PlanningError("corridor", f"external solver: {sol.status}" + (_k_diagnosis(s, cfg.K, cfg.envelope) if cfg.K else ""))
        return extract_corridors(m, sol), sol.status, sol.gap
    res = prioritized_corridors(s, K=cfg.K, weights=cfg.weights, envelope=cfg.envelope, time_limit=cfg.time_limit)
    if res is None:
        detail = _k_diagnosis(s, cfg.K, cfg.envelope) if cfg.K else ""
        raise PlanningError("corridor", "no feasible corridor set found" + detail)
    res = polish_corridors(s, res, cfg.weights, cfg.envelope)
    corridors, status, gap = res.corridors, "feasible-incumbent", math.inf
    m = build_vstc_model(s, res.K, cfg.weights, envelope=cfg.envelope)
    if m.n_binaries <= SMALL_MODEL_BINARIES and cfg.node_limit > 0:
        _, sol = _solve_full(s, cfg, res.K, warm=warm_start_vector(m, res), model=m)
        if sol.x is not None:
            corridors, status, gap = extract_corridors(m, sol), sol.status, sol.gap
    return corridors, status, gap


def baseline_corridors(s: Scenario, cfg: PlanConfig) -> tuple[list[Corridor], str, float, dict]:
    try:
        plan_ = waypoint_plan(s)
        m = build_stc_model(s, plan_, cfg.weights)
    except (BaselineError, CorridorError) as exc:
        raise PlanningError("corridor", str(exc)) from exc
    _, sol = _solve_full(s, cfg, None, model=m)
    if sol.x is None:
        raise PlanningError("corridor", f"baseline model: {sol.status}")
    return extract_corridors(m, sol), sol.status, sol.gap, plan_.waypoints


# ---------------------------------------------------------------- stages


def _prune(s: Scenario, corridors: Sequence[Corridor]) -> list[Corridor]:
    g = s.params.gamma_r
    try:
        return [prune_corridor(c, s.vehicle(c.vehicle_id).target, g) for c in corridors]
    except PruningError as exc:
        raise PlanningError("pruning", str(exc)) from exc


def _trajectories(s: Scenario, pruned: Sequence[Corridor], cfg: PlanConfig) -> list[Trajectory]:
    nlp = cfg.nlp()

    def one(c: Corridor) -> Trajectory:
        return solve_trajectory(c, s.vehicle(c.vehicle_id), s.params, nlp)

    try:
        if cfg.workers > 1 and len(pruned) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                # map keeps input order, so the output is independent of scheduling
                return list(pool.map(one, pruned))
        return [one(c) for c in pruned]
    except TrajectoryError as exc:
        raise PlanningError("trajectory", str(exc)) from exc


def _validate(s: Scenario, result: PlanResult, waypoints=None) -> list[ValidationReport]:
    p = s.params
    out = [check_corridor_safety(result.corridors, s.obstacles, p.gamma_x, p.gamma_y)]
    for c in result.pruned:
        v = s.vehicle(c.vehicle_id)
        cont = check_corridor_continuity(c, p.gamma_r, p.t_min, p.t_max)
        out.append(_tag(cont, c.vehicle_id))
        out.append(_tag(check_endpoint_inclusion(c, v.initial, v.target, p.gamma_r), c.vehicle_id))
        if waypoints is not None:
            out.append(_waypoint_report(c, waypoints[c.vehicle_id], p.gamma_r))
    for traj, c in zip(result.trajectories, result.pruned):
        v = s.vehicle(c.vehicle_id)
        out.append(_tag(check_trajectory(traj, c, v.target, p), c.vehicle_id))
    out.append(check_vehicle_separation(result.trajectories, p.l, p.w))
    return out


def _tag(r: ValidationReport, vid: int) -> ValidationReport:
    return replace(r, check=f"{r.check}[{vid}]")


def _waypoint_report(c: Corridor, waypoints, gamma_r: float, tol: float = 1e-6) -> ValidationReport:
    margins = waypoint_margins(c, waypoints[: len(c.cubes)], gamma_r)
    bad = [(c.vehicle_id, k + 1) for k, mg in enumerate(margins) if mg < -tol]
    margin = float(margins.min()) if margins.size else math.inf
    return ValidationReport(
        check=f"waypoint_inclusion[{c.vehicle_id}]",
        passed=margin >= -tol,
        margin=margin,
        entities=tuple(bad),
        messages=tuple(f"vehicle {vid}: cube {k} misses its waypoint" for vid, k in bad),
    )


def _run(method: str, s: Scenario, cfg: PlanConfig) -> PlanResult:
    result = PlanResult(method)
    waypoints = None
    try:
        try:
            if method == "vstc":
                result.corridors, result.solver_status, result.gap = vstc_corridors(s, cfg)
            else:
                result.corridors, result.solver_status, result.gap, waypoints = baseline_corridors(s, cfg)
        except BackendError as exc:
            raise PlanningError("corridor", str(exc)) from exc
        result.pruned = _prune(s, result.corridors)
        result.trajectories = _trajectories(s, result.pruned, cfg)
    except PlanningError as exc:
        result.stage = exc.stage
        result.message = str(exc)
        log.info("%s: %s", method, exc)
        return result
    result.reports = _validate(s, result, waypoints)
    result.ok = all(r.passed for r in result.reports)
    result.message = "all validations passed" if result.ok else "validation failed: " + ", ".join(
        r.check for r in result.reports if not r.passed
    )
    return result


def plan_vstc(s: Scenario, cfg: PlanConfig | None = None) -> PlanResult:
    return _run("vstc", s, cfg or PlanConfig())


def plan_baseline(s: Scenario, cfg: PlanConfig | None = None) -> PlanResult:
    return _run("stc-baseline", s, cfg or PlanConfig())


def plan(s: Scenario, method: str, cfg: PlanConfig | None = None) -> PlanResult:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    return _run(method, s, cfg or PlanConfig())
