"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (collected in the terminal
summary) and fails when its criterion does not hold.  Run alone with
``pytest tests/test_acceptance.py -v``.
"""

import functools
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import micro, random_mip, straight

from vstc.baseline_stc import build_stc_model, waypoint_plan
from vstc.cli import main
from vstc.corridor_model import (
    Corridor,
    Cube,
    assignment_from_corridors,
    build_vstc_model,
    extract_corridors,
    geometric_rounding,
)
from vstc.mip_solver import BnbConfig, enumerate_oracle, solve_mip
from vstc.mip_solver.backend import ENV_VAR, ExternalBackend
from vstc.pipeline import PlanConfig, plan_vstc
from vstc.pruning import PruningError, first_containing_index, prune_corridor, shrunk_rect
from vstc.scenario import builtin_scenario, dump_scenario
from vstc.trajectory_opt import NlpConfig, objective_gradient, penalized_objective, rollout_array, step_boxes
from vstc.validation import (
    check_corridor_continuity,
    check_corridor_safety,
    check_endpoint_inclusion,
    duration_report,
)
from vstc.warm_start import complete_assignment

ROOT = Path(__file__).resolve().parents[1]


@functools.lru_cache(maxsize=None)
def planned(name: str):
    """Embedded V-STC plan of a small scenario (construction only)."""
    s = {"micro": micro, "straight": straight}[name]()
    return s, plan_vstc(s, PlanConfig(node_limit=0))


# ---------------------------------------------------------------- 1


def test_1_mip_matches_enumeration(accept):
    rng = np.random.default_rng(20240601)
    worst, t0 = 0.0, time.perf_counter()
    for _ in range(20):
        p = random_mip(rng, int(rng.integers(2, 9)), int(rng.integers(1, 13)), int(rng.integers(3, 10)))
        a, b = solve_mip(p), enumerate_oracle(p)
        assert a.status == b.status == "optimal"
        worst = max(worst, abs(a.objective - b.objective))
    elapsed = time.perf_counter() - t0
    accept(1, "MIP oracle equivalence", worst <= 1e-6 and elapsed < 10.0,
           f"max |diff| {worst:.2e} over 20 instances in {elapsed:.2f} s")


# ---------------------------------------------------------------- 2


def test_2_micro_scenario_feasibility(accept):
    s = micro()
    p = s.params
    t0 = time.perf_counter()
    m = build_vstc_model(s, 4)
    sol = solve_mip(m.to_lp_problem(), BnbConfig(time_limit=45.0), heuristic=lambda z: geometric_rounding(m, z))
    elapsed = time.perf_counter() - t0
    assert sol.x is not None, sol.status
    cs = extract_corridors(m, sol)
    checks = [check_corridor_safety(cs, s.obstacles, p.gamma_x, p.gamma_y)]
    for c in cs:
        v = s.vehicle(c.vehicle_id)
        checks.append(check_corridor_continuity(c, p.gamma_r, p.t_min, p.t_max))
        checks.append(check_endpoint_inclusion(c, v.initial, v.target, p.gamma_r))
    # the duration variables themselves, compared without tolerance; the
    # cube intervals must agree with them up to subtraction rounding
    dts = [float(sol.x[j]) for vs in m.meta["vehicles"].values() for j in vs["dt"]]
    spans = [q.dt for c in cs for q in c.cubes]
    in_bounds = all(p.t_min <= d <= p.t_max for d in dts) and np.allclose(dts, spans, rtol=0, atol=1e-12)
    ok = sol.status in ("optimal", "time-limit", "node-limit") and all(r.passed for r in checks) and in_bounds
    accept(2, "micro-scenario feasibility", ok and elapsed < 60.0,
           f"status {sol.status}, objective {sol.objective:.3f}, dt in [{min(dts):.4f}, {max(dts):.4f}], "
           f"{sum(r.passed for r in checks)}/{len(checks)} checks, {elapsed:.1f} s")


# ---------------------------------------------------------------- 3


def _restriction(shift: float) -> tuple[float, float]:
    """Max corridor end time of the fixed-step baseline and of V-STC seeded with it."""
    s = micro(shift)
    mb = build_stc_model(s, waypoint_plan(s))
    sb = solve_mip(mb.to_lp_problem(), BnbConfig(time_limit=30.0), heuristic=lambda z: geometric_rounding(mb, z))
    cb = extract_corridors(mb, sb)
    # same weights, one cube per baseline cube
    mv = build_vstc_model(s, {c.vehicle_id: len(c.cubes) for c in cb})
    ws = complete_assignment(mv, assignment_from_corridors(mv, cb))
    sv = solve_mip(mv.to_lp_problem(), BnbConfig(node_limit=200), warm_start=ws,
                   heuristic=lambda z: geometric_rounding(mv, z))
    cv = extract_corridors(mv, sv)
    assert check_corridor_safety(cv, s.obstacles, s.params.gamma_x, s.params.gamma_y).passed
    return max(c.horizon for c in cb), max(c.horizon for c in cv)


@pytest.mark.slow
def test_3_variable_step_never_slower(accept):
    pairs = {d: _restriction(d) for d in (0.0, -5.0, 5.0)}
    never_worse = all(v <= b + 1e-6 for b, v in pairs.values())
    strict = any(v <= b - 0.1 + 1e-6 for b, v in pairs.values())
    detail = ", ".join(f"shift {d:+.0f}: baseline {b:.2f} s vs V-STC {v:.2f} s" for d, (b, v) in pairs.items())
    accept(3, "variable vs fixed time step", never_worse and strict, detail)


# ---------------------------------------------------------------- 4


def _chained(rng, n: int, gamma_r: float) -> Corridor:
    cubes, x, t = [], rng.uniform(-20, 20), 0.0
    for _ in range(n):
        w = rng.uniform(gamma_r, 4 * gamma_r)
        h = rng.uniform(gamma_r, 3 * gamma_r)
        y = rng.uniform(-1, 1)
        dt = rng.uniform(0.1, 1.0)
        cubes.append(Cube(x, x + w, y - h / 2, y + h / 2, t, t + dt))
        x, t = x + w - gamma_r, t + dt
    return Corridor(1, tuple(cubes))


def test_4_pruning(accept):
    g = math.hypot(4.8, 1.8)
    rng = np.random.default_rng(4)
    agree = idem = 0
    for _ in range(100):
        c = _chained(rng, int(rng.integers(1, 12)), g)
        k = int(rng.integers(0, len(c.cubes)))
        q = c.cubes[k]
        target = (rng.uniform(q.x_l + g / 2, q.x_u - g / 2), rng.uniform(q.y_l + g / 2, q.y_u - g / 2))
        brute = next(i for i, cube in enumerate(c.cubes) if shrunk_rect(cube, g).contains(target))
        out = prune_corridor(c, target, g)
        agree += len(out.cubes) == brute + 1 == first_containing_index(c, target, g) + 1
        idem += prune_corridor(out, target, g) == out
    c = _chained(rng, 3, g)
    try:
        prune_corridor(c, (1e6, 1e6), g)
        raised = False
    except PruningError as exc:
        raised = "no cube" in str(exc)
    accept(4, "minimum-cube pruning", agree == 100 and idem == 100 and raised,
           f"{agree}/100 match brute force, {idem}/100 idempotent, missing target raises: {raised}")


# ---------------------------------------------------------------- 5


def test_5_kinematic_rollout(accept):
    P = micro().params
    dt, T = 0.1, 40
    s0 = np.array([1.0, 2.0, 0.0, 12.0, 0.0])
    S = rollout_array(s0, np.zeros((T + 1, 2)), dt, P.L_w)
    t = np.arange(T + 1) * dt
    analytic = np.column_stack([1.0 + 12.0 * t, np.full(T + 1, 2.0), np.zeros(T + 1), np.full(T + 1, 12.0), np.zeros(T + 1)])
    e1 = float(np.max(np.abs(S - analytic)))
    j = 0.7
    u = np.zeros((T + 1, 2))
    u[:, 0] = j
    S = rollout_array(s0, u, dt, P.L_w)
    a = np.concatenate([[0.0], np.cumsum(np.full(T, j * dt))])
    v = 12.0 + np.concatenate([[0.0], np.cumsum(a[:-1] * dt)])
    x = 1.0 + np.concatenate([[0.0], np.cumsum(v[:-1] * dt)])
    e2 = float(max(np.max(np.abs(S[:, 4] - a)), np.max(np.abs(S[:, 3] - v)), np.max(np.abs(S[:, 0] - x))))
    accept(5, "kinematic rollout", e1 <= 1e-9 and e2 <= 1e-9,
           f"constant speed max error {e1:.1e}, constant jerk vs cumulative sums {e2:.1e}")


# ---------------------------------------------------------------- 6


def test_6_gradient_check(accept):
    s, r = planned("micro")
    c = r.pruned[0]
    v = s.vehicle(c.vehicle_id)
    cfg = NlpConfig()
    n = round(c.horizon / 0.1) + 1
    rng = np.random.default_rng(6)
    h, worst = 1e-6, 0.0
    for _ in range(5):
        u = np.column_stack([rng.normal(0, 1.0, n), rng.uniform(-0.3, 0.3, n)])
        g = objective_gradient(u, c, v, s.params, cfg)
        fd = np.zeros_like(u)
        for idx in np.ndindex(u.shape):
            up, um = u.copy(), u.copy()
            up[idx] += h
            um[idx] -= h
            fd[idx] = (penalized_objective(up, c, v, s.params, cfg)[0]
                       - penalized_objective(um, c, v, s.params, cfg)[0]) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd)))))
    accept(6, "gradient check", worst < 1e-5, f"max relative error {worst:.2e} at 5 control vectors ({n} steps)")


# ---------------------------------------------------------------- 7


def test_7_trajectory_contract(accept):
    parts, ok = [], True
    for name in ("straight", "micro"):
        s, r = planned(name)
        p = s.params
        assert r.passed, r.message
        for traj, c in zip(r.trajectories, r.pruned):
            S, u = traj.states, traj.controls
            box = step_boxes(c, [int(k) for k in traj.cube_index], p.gamma_r)
            contain = float(np.max(np.maximum.reduce(
                [box[:, 0] - S[:, 0], S[:, 0] - box[:, 1], box[:, 2] - S[:, 1], S[:, 1] - box[:, 3], np.zeros(len(S))])))
            ctrl = float(max(np.max(p.a_min - S[:, 4]), np.max(S[:, 4] - p.a_max),
                             np.max(np.abs(u[:, 1])) - p.phi_max, 0.0))
            end = float(np.hypot(*(S[-1, :2] - np.array(s.vehicle(c.vehicle_id).target))))
            self_c = float(np.max(np.abs(rollout_array(S[0], u, traj.delta_t, p.L_w) - S)))
            ok &= end <= 0.1 and contain <= 1e-4 and ctrl <= 1e-4 and self_c <= 1e-9
            parts.append(f"{name}/AV{c.vehicle_id} end {end:.3f} m, contain {contain:.1e}, "
                         f"ctrl {ctrl:.1e}, rollout {self_c:.1e}")
    accept(7, "trajectory contract", ok, "; ".join(parts))


# ---------------------------------------------------------------- 8


def test_8_end_to_end_determinism(accept, tmp_path):
    f = tmp_path / "micro.json"
    dump_scenario(micro(), f)
    codes = []
    for run in ("a", "b"):
        codes.append(main(["plan", "--scenario", str(f), "--method", "both", "--node-limit", "50",
                           "--seed", "7", "--out", str(tmp_path / run)]))
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = names == sorted(p.name for p in (tmp_path / "b").iterdir()) and all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    accept(8, "end-to-end determinism", same and codes[0] == codes[1],
           f"{len(names)} artifact files byte-identical: {same}; exit codes {codes}")


# ---------------------------------------------------------------- 9


@pytest.mark.slow
def test_9_full_intersection_embedded(accept):
    t0 = time.perf_counter()
    r = plan_vstc(builtin_scenario("intersection"))
    elapsed = time.perf_counter() - t0
    failed = [rep.check for rep in r.reports if not rep.passed]
    vmax = max((c.horizon for c in r.pruned), default=math.inf)
    accept(9, "full intersection, embedded solver", r.feasible and r.passed,
           f"solver {r.solver_status}, {len(r.reports)} checks, failed {failed or 'none'}, "
           f"V-STC max {vmax:.2f} s, {elapsed:.0f} s")


def _external() -> ExternalBackend:
    cmd = os.environ.get(ENV_VAR) or f"{sys.executable} {ROOT / 'tools' / 'highs_backend.py'}"
    return ExternalBackend(cmd, time_limit=float(os.environ.get("VSTC_ACCEPT_TIME_LIMIT", "300")), gap=1e-3)


@pytest.mark.slow
def test_9_full_intersection_external(accept):
    pytest.importorskip("scipy.optimize")
    r = plan_vstc(builtin_scenario("intersection"), PlanConfig(backend=_external(), time_limit=300.0))
    table = duration_report({"vstc": r.pruned if r.feasible else None})
    vmax = table.max_time("vstc") if r.feasible else math.inf
    ok = r.feasible and r.passed and r.gap <= 1e-3 and vmax < 8.0
    accept(9, "full intersection, external backend", ok,
           f"{r.message or r.solver_status}; gap {r.gap:.2e}, V-STC max {vmax:.2f} s, validations passed: {r.passed}")
