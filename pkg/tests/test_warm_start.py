import numpy as np
import pytest

from vstc.corridor_model import build_vstc_model
from vstc.mip_solver import solve_mip
from vstc.scenario import builtin_scenario
from vstc.warm_start import complete_assignment, conflict_order, fix_and_solve, reference_motion


def test_reference_motion_arrives_on_time(micro_scenario):
    p = micro_scenario.params
    v = micro_scenario.vehicle(1)
    for horizon in (5.0, 6.3):
        ref = reference_motion(v, horizon, p)
        assert ref is not None
        assert ref.distance[0] == 0.0
        assert ref.distance[-1] == pytest.approx(v.route_length, abs=1e-9)
        assert ref.times[-1] == pytest.approx(horizon)
        assert np.all(np.diff(ref.distance) >= -1e-12)
        assert ref.accel <= p.a_max and ref.cruise <= p.v_max


def test_reference_motion_rejects_impossible_horizons(micro_scenario):
    p = micro_scenario.params
    v = micro_scenario.vehicle(1)
    # too short to cover 70 m even at full acceleration; too long to not overshoot while coasting
    assert reference_motion(v, 3.0, p) is None
    assert reference_motion(v, 20.0, p) is None


def test_crossing_vehicles_are_planned_first():
    assert conflict_order(builtin_scenario("intersection")) == [5, 6, 1, 2, 3, 4]


def test_fix_and_solve(micro_scenario):
    m = build_vstc_model(micro_scenario, 2)
    p = m.to_lp_problem()
    sol = solve_mip(p)
    x = fix_and_solve(p, sol.x)
    assert x is not None and p.c @ x + p.offset == pytest.approx(sol.objective, abs=1e-6)
    # with the travel envelope two cubes of at most 1 s cannot cover 70 m
    q = build_vstc_model(micro_scenario, 2, envelope=True).to_lp_problem()
    assert fix_and_solve(q, np.zeros(q.A.shape[1])) is None


def test_complete_assignment_restores_auxiliaries(micro_scenario):
    m = build_vstc_model(micro_scenario, 2)
    p = m.to_lp_problem()
    sol = solve_mip(p)
    x = sol.x.copy()
    aux = [j for j, n in enumerate(m.var_names) if "_g" in n or "_z" in n]
    x[aux] = np.array(m.ub)[aux]
    y = complete_assignment(m, x)
    assert p.max_violation(y) <= 1e-9
