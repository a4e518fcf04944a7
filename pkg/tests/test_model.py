import numpy as np
import pytest

from vstc.corridor_model import build_vstc_model
from vstc.mip_solver import solve_mip
from vstc.mip_solver.lp import EQ, GE, LE
from vstc.model import MipModel, ModelError, format_lp, read_lp


def small() -> MipModel:
    m = MipModel("t")
    x = m.add_var("x", 0.0, 4.0)
    y = m.add_var("y", -2.0, 3.5)
    b = m.add_binary("b", "pick")
    m.add_row({x: 1.0, y: 2.0, b: -3.0}, LE, 4.0, "r1")
    m.add_row({x: 1.0, y: -1.0}, GE, -1.0, "r2")
    m.add_row({x: 1.0, b: 1.0}, EQ, 2.5, "r3")
    m.add_objective(x, -1.0)
    m.add_objective(y, -2.0)
    m.add_objective(b, 0.5)
    m.obj_offset = 1.25
    return m


def test_round_trip_preserves_problem():
    m = small()
    r = read_lp(format_lp(m))
    assert r.var_names == m.var_names
    assert r.binary == m.binary
    p, q = m.to_lp_problem(), r.to_lp_problem()
    assert np.allclose(p.A.toarray(), q.A.toarray())
    assert np.array_equal(p.sense, q.sense) and np.allclose(p.b, q.b)
    assert np.allclose(p.c, q.c) and p.offset == q.offset
    assert solve_mip(p).objective == pytest.approx(solve_mip(q).objective, abs=1e-12)


def test_round_trip_of_corridor_model(micro_scenario):
    m = build_vstc_model(micro_scenario, 3)
    r = read_lp(format_lp(m))
    p, q = m.to_lp_problem(), r.to_lp_problem()
    assert p.A.shape == q.A.shape
    assert np.array_equal(p.lb, q.lb) and np.array_equal(p.ub, q.ub)
    assert abs(p.A - q.A).max() == 0.0


def test_single_variable_rows_become_bounds():
    m = MipModel()
    x = m.add_var("x", 0, 10)
    m.add_row({x: 2.0}, LE, 6.0, "cap")
    p = m.to_lp_problem()
    assert p.A.shape[0] == 0 and p.ub[0] == 3.0


def test_duplicate_names_and_bad_bounds():
    m = MipModel()
    m.add_var("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_var("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_var("z", 2, 1)


def test_quadratic_objective_is_not_linearizable():
    m = small()
    m.add_quadratic(0, 0, 1.0)
    assert m.is_quadratic
    with pytest.raises(ModelError):
        m.to_lp_problem()
    assert read_lp(format_lp(m)).is_quadratic
