import itertools
import math

import numpy as np
import pytest
from conftest import micro, scipy_milp

from vstc.corridor_model import (
    Corridor,
    CorridorError,
    Cube,
    Weights,
    assignment_from_corridors,
    build_vstc_model,
    default_k,
    extract_corridors,
    geometric_rounding,
    linearize_bilinear,
    min_travel_time,
)
from vstc.mip_solver import solve_mip
from vstc.mip_solver.lp import LE
from vstc.model import MipModel, ModelError
from vstc.scenario import ObstacleCube
from vstc.validation import check_corridor_continuity, check_corridor_safety, check_endpoint_inclusion
from vstc.warm_start import fix_and_solve


def test_big_m_is_extent_plus_reach(micro_scenario):
    s = micro_scenario
    for K in (3, 7):
        m = build_vstc_model(s, K)
        assert m.meta["M"] == pytest.approx(2 * s.world_extent + s.params.v_max * K * s.params.t_max)
        assert m.meta["Mt"] == pytest.approx(K * s.params.t_max)


def test_block_counts_without_pruning(micro_scenario):
    K = 3
    m = build_vstc_model(micro_scenario, K, prune=False)
    roles = [r for r, b in zip(m.roles, m.binary) if b]
    # two direction binaries per junction and vehicle, six per cube pair
    assert roles.count("cont_x") == roles.count("cont_y") == 2 * (K - 1)
    assert len(m.meta["pair_blocks"]) == K * K
    assert m.n_binaries == 4 * (K - 1) + 6 * K * K
    # one product auxiliary with four envelope rows per direction binary
    mc = [n for n in m.row_names if n.endswith(("_mc1", "_mc2", "_mc3", "_mc4"))]
    assert len(mc) == 4 * 4 * (K - 1)


def test_static_obstacle_blocks_have_four_binaries(micro_scenario):
    s = micro_scenario
    s = type(s)(s.vehicles, (ObstacleCube(30, 40, 30, 40),), s.x_min, s.x_max, s.y_min, s.y_max, s.params)
    m = build_vstc_model(s, 2, prune=False)
    assert len(m.meta["obstacle_blocks"]) == 4
    assert all(len(b[-1]) == 4 for b in m.meta["obstacle_blocks"])


@pytest.mark.parametrize("K", [2, 3])
def test_block_pruning_keeps_the_optimum(micro_scenario, K):
    a = scipy_milp(build_vstc_model(micro_scenario, K).to_lp_problem())
    b = scipy_milp(build_vstc_model(micro_scenario, K, prune=False).to_lp_problem())
    assert a[0] == b[0] == 0 and a[1] == pytest.approx(b[1], abs=1e-6)


@pytest.mark.parametrize("K", [2, 3])
def test_one_block_per_unordered_pair_suffices(micro_scenario, K):
    a = scipy_milp(build_vstc_model(micro_scenario, K).to_lp_problem())
    b = scipy_milp(build_vstc_model(micro_scenario, K, symmetric_pairs=True).to_lp_problem())
    assert a[1] == pytest.approx(b[1], abs=1e-6)


def test_embedded_optimum_matches_reference_and_validates(micro_scenario):
    s = micro_scenario
    m = build_vstc_model(s, 2)
    p = m.to_lp_problem()
    sol = solve_mip(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(scipy_milp(p)[1], abs=1e-6)
    cs = extract_corridors(m, sol)
    g = s.params
    assert check_corridor_safety(cs, [], g.gamma_x, g.gamma_y).passed
    for c in cs:
        v = s.vehicle(c.vehicle_id)
        assert check_corridor_continuity(c, g.gamma_r, g.t_min, g.t_max).passed
        assert check_endpoint_inclusion(c, v.initial, v.target, g.gamma_r).passed


def test_mccormick_rows_are_exact_at_integrality():
    from scipy.optimize import linprog

    for d, dt in itertools.product((0.0, 1.0), (0.1, 0.37, 1.0)):
        m = MipModel()
        dv = m.add_binary("d", "cont_x")
        tv = m.add_var("dt", 0.1, 1.0)
        z = linearize_bilinear(m, dv, tv, "z")
        p = m.to_lp_problem()
        lb, ub = p.lb.copy(), p.ub.copy()
        lb[dv] = ub[dv] = d
        lb[tv] = ub[tv] = dt
        A = p.A.toarray()
        rows = [(A[i] if s == LE else -A[i], p.b[i] if s == LE else -p.b[i]) for i, s in enumerate(p.sense)]
        A_ub = np.array([r for r, _ in rows])
        b_ub = np.array([b for _, b in rows])
        ext = []
        for sign in (1.0, -1.0):
            c = np.zeros(p.A.shape[1])
            c[z] = sign
            r = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=list(zip(lb, ub)))
            ext.append(r.x[z])
        assert ext[0] == pytest.approx(d * dt, abs=1e-9) and ext[1] == pytest.approx(d * dt, abs=1e-9)


def test_mccormick_needs_finite_bounds():
    m = MipModel()
    d = m.add_binary("d", "cont_x")
    t = m.add_var("t", 0.0, math.inf)
    with pytest.raises(CorridorError):
        linearize_bilinear(m, d, t, "z")


def test_extract_reads_cube_values(micro_scenario):
    m = build_vstc_model(micro_scenario, 2)
    cs = [
        Corridor(1, (Cube(-47, -30, -4, 0, 0, 0.5), Cube(-31, 27, -4, 0, 0.5, 1.5))),
        Corridor(5, (Cube(0, 4, -32, -10, 0, 0.5), Cube(0, 4, -11, 42, 0.5, 1.5))),
    ]
    x = assignment_from_corridors(m, cs)
    assert extract_corridors(m, x) == cs
    with pytest.raises(CorridorError):
        extract_corridors(m, None)


def test_geometric_rounding_repairs_to_a_feasible_point(micro_scenario):
    m = build_vstc_model(micro_scenario, 2)
    p = m.to_lp_problem()
    sol = solve_mip(p)
    y = geometric_rounding(m, sol.x)
    fixed = fix_and_solve(p, y)
    assert fixed is not None
    assert p.max_violation(fixed) <= 1e-6
    assert set(np.unique(y[p.binaries])) <= {0.0, 1.0}


def test_quadratic_goal_cost_is_rejected_by_the_linear_solver(micro_scenario):
    m = build_vstc_model(micro_scenario, 2, objective_mode="quadratic")
    assert m.is_quadratic
    with pytest.raises(ModelError):
        m.to_lp_problem()
    with pytest.raises(CorridorError):
        build_vstc_model(micro_scenario, 2, objective_mode="cubic")


def test_cube_count_and_weights_are_validated(micro_scenario):
    with pytest.raises(CorridorError):
        build_vstc_model(micro_scenario, 0)
    with pytest.raises(CorridorError):
        build_vstc_model(micro_scenario, {1: 3})
    with pytest.raises((ValueError, CorridorError)):
        Weights(goal=-1.0)


def test_minimum_travel_time():
    # 70 m from 10 m/s at 4 m/s^2 capped at 20 m/s: 2.5 s to 20 m/s covering 37.5 m
    assert min_travel_time(70.0, 10.0, 4.0, 20.0) == pytest.approx(2.5 + 32.5 / 20.0)
    assert min_travel_time(10.0, 10.0, 4.0, 20.0) == pytest.approx((-10 + math.sqrt(100 + 80)) / 4)
    assert min_travel_time(0.0, 10.0, 4.0, 20.0) == 0.0


def test_default_k_covers_the_minimum_travel_time(micro_scenario):
    p = micro_scenario.params
    for v in micro_scenario.vehicles:
        assert default_k(v, p) * p.t_max >= min_travel_time(v.route_length, v.v_initial, p.a_max, p.v_max)
