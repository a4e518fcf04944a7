import math

import numpy as np
import pytest

from vstc.corridor_model import Corridor, Cube
from vstc.scenario import PlannerParams, VehicleSpec
from vstc.trajectory_opt import (
    TRAJECTORY_COLUMNS,
    ControlInput,
    NlpConfig,
    TrajectoryError,
    VehicleState,
    assign_cube_schedule,
    objective_gradient,
    penalized_objective,
    rollout,
    rollout_array,
    solve_trajectory,
    trajectory_to_csv,
)
from vstc.validation import check_trajectory

P = PlannerParams()


def straight_case():
    v = VehicleSpec(1, 0.0, 0.0, 20.0, 0.0, 10.0, 0.0)
    c = Corridor(1, (Cube(-5.0, 25.0, -5.0, 5.0, 0.0, 2.0),))
    return v, c


# ---------------------------------------------------------------- rollout


def test_rollout_straight_line():
    s = rollout(VehicleState(0, 0, 0, 10, 0), [ControlInput(0, 0)] * 11, 0.1, 2.8)
    assert len(s) == 11
    assert s[-1].x == pytest.approx(10.0, abs=1e-12) and s[-1].y == 0.0 and s[-1].v == 10.0


def test_rollout_heading_up():
    s = rollout(VehicleState(0, 0, math.pi / 2, 10, 0), [ControlInput(0, 0)] * 6, 0.1, 2.8)
    assert s[-1].y == pytest.approx(5.0, abs=1e-12)
    assert s[-1].x == pytest.approx(0.0, abs=1e-12)


def test_rollout_constant_jerk_matches_cumulative_sums():
    T, dt = 30, 0.1
    S = rollout_array(np.zeros(5), np.column_stack([np.ones(T + 1), np.zeros(T + 1)]), dt, 2.8)
    a = np.concatenate([[0.0], np.cumsum(np.full(T, dt))])
    v = np.concatenate([[0.0], np.cumsum(a[:-1] * dt)])
    x = np.concatenate([[0.0], np.cumsum(v[:-1] * dt)])
    assert np.max(np.abs(S[:, 4] - a)) <= 1e-9
    assert np.max(np.abs(S[:, 3] - v)) <= 1e-9
    assert np.max(np.abs(S[:, 0] - x)) <= 1e-9


def test_rollout_rejects_bad_step():
    with pytest.raises(TrajectoryError):
        rollout_array(np.zeros(5), np.zeros((3, 2)), 0.0, 2.8)


# ---------------------------------------------------------------- schedule


def test_schedule_single_cube():
    c = Corridor(1, (Cube(0, 5, 0, 5, 0.0, 2.0),))
    assert assign_cube_schedule(c, 0.1) == [0] * 21


def test_schedule_junction_goes_to_later_cube():
    c = Corridor(1, (Cube(0, 5, 0, 5, 0.0, 1.0), Cube(0, 5, 0, 5, 1.0, 2.0)))
    assert assign_cube_schedule(c, 0.5) == [0, 0, 1, 1, 1]


def test_schedule_matches_scan():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = rng.uniform(0.1, 1.0, size=rng.integers(1, 8))
        t = np.concatenate([[0.0], np.cumsum(d)])
        c = Corridor(1, tuple(Cube(0, 5, 0, 5, t[k], t[k + 1]) for k in range(len(d))))
        dt = 0.1
        T = int(round(t[-1] / dt))
        sched = assign_cube_schedule(c, dt, T)
        for step, k in enumerate(sched):
            if step == T:
                assert k == len(d) - 1
                continue
            tt = step * dt
            inside = [j for j in range(len(d)) if t[j] - 1e-9 <= tt < t[j + 1] - 1e-9]
            assert k == inside[0]


def test_schedule_rejects_gap():
    c = Corridor(1, (Cube(0, 5, 0, 5, 0.0, 1.0), Cube(0, 5, 0, 5, 1.2, 2.0)))
    with pytest.raises(TrajectoryError, match="gap"):
        assign_cube_schedule(c, 0.1)


def test_horizon_shorter_than_cube_count_is_an_error():
    v = VehicleSpec(1, 0, 0, 1, 0, 10, 0)
    c = Corridor(1, (Cube(-5, 5, -5, 5, 0.0, 0.02),))
    with pytest.raises(TrajectoryError, match="T >= K"):
        solve_trajectory(c, v, P)


# ---------------------------------------------------------------- gradient


def test_gradient_matches_finite_differences():
    v, c = straight_case()
    cfg = NlpConfig()
    rng = np.random.default_rng(0)
    u = rng.normal(scale=0.3, size=(21, 2))
    g = objective_gradient(u, c, v, P, cfg)
    h = 1e-6
    fd = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        up, um = u.copy(), u.copy()
        up[idx] += h
        um[idx] -= h
        fd[idx] = (penalized_objective(up, c, v, P, cfg)[0] - penalized_objective(um, c, v, P, cfg)[0]) / (2 * h)
    assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd))) < 1e-5


def test_zero_controls_give_zero_smoothness_gradient():
    v, c = straight_case()
    g = objective_gradient(np.zeros((21, 2)), c, v, P, NlpConfig(w1=1e-12, w2=1.0), rho=0.0)
    assert np.all(g[:, 1] == 0.0)


def test_doubling_comfort_weight_doubles_its_gradient():
    v, c = straight_case()
    u = np.random.default_rng(1).normal(size=(21, 2))
    comfort = objective_gradient(u, c, v, P, NlpConfig(w1=1.0, w2=0.0), rho=0.0)
    doubled = objective_gradient(u, c, v, P, NlpConfig(w1=2.0, w2=0.0), rho=0.0)
    assert np.array_equal(doubled, 2.0 * comfort)


# ---------------------------------------------------------------- solve


def test_straight_solve_meets_contract():
    v, c = straight_case()
    tr = solve_trajectory(c, v, P)
    assert tr.feasible
    assert tr.endpoint_error <= 0.1
    assert np.all(np.abs(tr.controls[:, 1]) <= math.pi / 3 + 1e-4)
    assert np.max(np.abs(rollout_array(tr.states[0], tr.controls, tr.delta_t, P.L_w) - tr.states)) <= 1e-9
    assert check_trajectory(tr, c, v.target, P).passed


def test_weight_scaling_leaves_solution_unchanged():
    v, c = straight_case()
    a = solve_trajectory(c, v, P, NlpConfig(w1=1.0, w2=2.0))
    b = solve_trajectory(c, v, P, NlpConfig(w1=10.0, w2=20.0))
    assert np.max(np.abs(a.controls - b.controls)) <= 1e-4
    assert b.objective == pytest.approx(10 * a.objective, rel=1e-9)


def test_unreachable_target_is_flagged():
    v = VehicleSpec(1, 0.0, 0.0, 20.0, 0.0, 10.0, 0.0)
    c = Corridor(1, (Cube(-5.0, 12.0, -5.0, 5.0, 0.0, 2.0),))
    tr = solve_trajectory(c, v, P, NlpConfig(max_outer=8))
    assert not tr.feasible
    assert tr.violation_profile.shape == (tr.T + 1,)


def test_csv_layout():
    v, c = straight_case()
    tr = solve_trajectory(c, v, P)
    lines = trajectory_to_csv(tr).splitlines()
    assert lines[0].split(",") == list(TRAJECTORY_COLUMNS)
    assert len(lines) == tr.T + 2
