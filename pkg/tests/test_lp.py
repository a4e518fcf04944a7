import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_mip
from vstc.mip_solver.lp import EQ, GE, LE, LpProblem, Simplex, drop_redundant_rows, solve_lp


def _scipy(p: LpProblem):
    A = p.A.toarray()
    le = p.sense == LE
    ge = p.sense == GE
    eq = p.sense == EQ
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([p.b[le], -p.b[ge]])
    return linprog(p.c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                   A_eq=A[eq] if eq.any() else None, b_eq=p.b[eq] if eq.any() else None,
                   bounds=list(zip(p.lb, p.ub)), method="highs")


@pytest.mark.parametrize("seed", range(25))
def test_random_lp_matches_reference(seed):
    rng = np.random.default_rng(seed)
    p = random_mip(rng, 0, int(rng.integers(2, 12)), int(rng.integers(1, 10)))
    if seed % 3 == 0:
        # add an equality through the hidden point
        x = np.full(p.A.shape[1], 1.0)
        row = rng.normal(size=p.A.shape[1])
        p = LpProblem(p.c, np.vstack([p.A.toarray(), row]), np.append(p.sense, EQ), np.append(p.b, row @ x), p.lb, p.ub)
    r = solve_lp(p)
    ref = _scipy(p)
    if ref.status == 2:
        assert r.status == "infeasible"
        return
    assert r.ok
    assert r.objective == pytest.approx(ref.fun, abs=1e-7)
    assert p.max_violation(r.x) <= 1e-8


def test_infeasible_detected():
    p = LpProblem([1.0, 1.0], [[1.0, 1.0]], [GE], [5.0], [0, 0], [1, 1])
    assert solve_lp(p).status == "infeasible"


def test_degenerate_vertex():
    # many constraints tight at the optimum
    A = [[1, 0], [0, 1], [1, 1], [1, 2], [2, 1]]
    p = LpProblem([-1.0, -1.0], A, [LE] * 5, [1, 1, 2, 3, 3], [0, 0], [5, 5])
    r = solve_lp(p)
    assert r.ok and r.objective == pytest.approx(-2.0)


def test_reoptimize_after_bound_change_matches_cold_solve():
    rng = np.random.default_rng(42)
    p = random_mip(rng, 0, 8, 6)
    s = Simplex(p)
    assert s.solve().ok
    lb, ub = p.lb.copy(), p.ub.copy()
    ub[0] = 0.5
    lb[3] = 1.0
    s.set_bounds(lb, ub)
    warm = s.reoptimize()
    cold = solve_lp(p.with_bounds(lb, ub))
    assert warm.status == cold.status
    if cold.ok:
        assert warm.objective == pytest.approx(cold.objective, abs=1e-8)


def test_dropping_redundant_rows_keeps_optimum():
    rng = np.random.default_rng(9)
    p = random_mip(rng, 0, 6, 5)
    A = np.vstack([p.A.toarray(), np.ones(6)])
    q = LpProblem(p.c, A, np.append(p.sense, LE), np.append(p.b, 1e6), p.lb, p.ub)
    d = drop_redundant_rows(q)
    assert d.A.shape[0] < q.A.shape[0]
    assert solve_lp(d).objective == pytest.approx(solve_lp(q).objective, abs=1e-9)


def test_rejects_infinite_bounds():
    with pytest.raises(ValueError):
        LpProblem([1.0], [[1.0]], [LE], [1.0], [0.0], [np.inf])
