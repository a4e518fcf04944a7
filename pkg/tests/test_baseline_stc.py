import math

import numpy as np
import pytest

from vstc.baseline_stc import BaselineError, WaypointPlan, build_stc_model, generate_waypoints, waypoint_plan
from vstc.corridor_model import extract_corridors, geometric_rounding
from vstc.mip_solver import BnbConfig, solve_mip
from vstc.scenario import PlannerParams, Scenario, VehicleSpec
from vstc.validation import check_corridor_continuity, check_endpoint_inclusion

AV1 = VehicleSpec(1, -45.0, -2.0, 25.0, -2.0, 10.0, 0.0)


def test_waypoints_every_ten_meters():
    pts = generate_waypoints(AV1, 10.0)
    assert len(pts) == 8 == 1 + math.ceil(70 / 10)
    assert [x for x, _ in pts] == [-45, -35, -25, -15, -5, 5, 15, 25]
    assert all(y == -2.0 for _, y in pts)


def test_target_appended_when_off_grid():
    pts = generate_waypoints(VehicleSpec(1, 0, 0, 25, 0, 10, 0), 10.0)
    assert pts[-1] == (25.0, 0.0) and len(pts) == 1 + math.ceil(25 / 10)


def test_large_spacing_gives_endpoints():
    assert generate_waypoints(AV1, 500.0) == [AV1.initial, AV1.target]


def test_zero_length_route_raises():
    with pytest.raises(BaselineError):
        generate_waypoints(VehicleSpec(1, 0, 0, 0, 0, 10, 0), 10.0)


def test_plan_uses_scenario_waypoints():
    s = Scenario((AV1,), waypoints={1: ((-45, -2), (0, -2), (25, -2))})
    plan = waypoint_plan(s)
    assert plan.count(1) == 3 and plan.dt_fixed == 1.0


def test_plan_rejects_repeated_waypoint():
    with pytest.raises(BaselineError):
        WaypointPlan({1: ((0.0, 0.0), (0.0, 0.0))})


def test_model_has_fixed_durations_and_no_products():
    s = Scenario((AV1,), (), -100, 100, -100, 100, PlannerParams())
    m = build_stc_model(s, waypoint_plan(s))
    assert not any(n.endswith("_zx") or n.endswith("_zy") for n in m.var_names)
    dt = [j for j, n in enumerate(m.var_names) if n.endswith("_dt")]
    assert len(dt) == 8
    assert all(m.lb[j] == 1.0 and m.ub[j] == 1.0 for j in dt)


def test_single_vehicle_baseline_chains_waypoints():
    s = Scenario((AV1,), (), -100, 100, -100, 100, PlannerParams())
    plan = waypoint_plan(s)
    m = build_stc_model(s, plan)
    sol = solve_mip(m.to_lp_problem(), BnbConfig(node_limit=500), heuristic=lambda z: geometric_rounding(m, z))
    assert sol.status == "optimal"
    (c,) = extract_corridors(m, sol)
    assert c.horizon == 8.0
    assert all(q.dt == 1.0 for q in c.cubes)
    h = 0.5 * s.params.gamma_r
    for q, (x, y) in zip(c.cubes, plan.waypoints[1]):
        assert q.x_l + h - 1e-6 <= x <= q.x_u - h + 1e-6 and q.y_l + h - 1e-6 <= y <= q.y_u - h + 1e-6
    assert check_corridor_continuity(c, s.params.gamma_r, 0.1, 1.0).passed
    assert check_endpoint_inclusion(c, AV1.initial, AV1.target, s.params.gamma_r).passed
