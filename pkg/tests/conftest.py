import math

import pytest

from vstc.scenario import PlannerParams, Scenario, VehicleSpec


def micro(shift: float = 0.0) -> Scenario:
    """Crossing pair from the intersection benchmark, AV5 moved along its lane by ``shift``."""
    vs = (
        VehicleSpec(1, -45.0, -2.0, 25.0, -2.0, 10.0, 0.0),
        VehicleSpec(5, 2.0, -30.0 + shift, 2.0, 40.0 + shift, 10.0, math.pi / 2),
    )
    return Scenario(vs, (), -100.0, 100.0, -100.0, 100.0, PlannerParams(), name="micro")


def straight() -> Scenario:
    v = VehicleSpec(1, 0.0, 0.0, 50.0, 0.0, 10.0, 0.0)
    return Scenario((v,), (), -20.0, 80.0, -30.0, 30.0, PlannerParams(), name="straight")


@pytest.fixture
def micro_scenario() -> Scenario:
    return micro()


@pytest.fixture
def straight_scenario() -> Scenario:
    return straight()


@pytest.fixture
def params() -> PlannerParams:
    return PlannerParams()


def random_mip(rng, n_bin: int, n_cont: int, m: int):
    """Random bounded MILP that is feasible at a hidden point."""
    import numpy as np

    from vstc.mip_solver.lp import GE, LE, LpProblem

    n = n_bin + n_cont
    xs = np.concatenate([rng.integers(0, 2, n_bin).astype(float), rng.uniform(0, 5, n_cont)])
    A = rng.normal(size=(m, n)).round(2)
    A[rng.uniform(size=A.shape) < 0.3] = 0.0
    ax = A @ xs
    sense = rng.choice([LE, GE], size=m)
    slack = rng.uniform(0, 2, m)
    b = np.where(sense == LE, ax + slack, ax - slack)
    lb = np.zeros(n)
    ub = np.concatenate([np.ones(n_bin), np.full(n_cont, 10.0)])
    c = rng.normal(size=n).round(2)
    return LpProblem(c, A, sense, b, lb, ub, 0.0, np.arange(n_bin))


def scipy_milp(p):
    """Reference optimum of an LpProblem from scipy's HiGHS interface: (status, objective)."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp

    from vstc.mip_solver.lp import EQ, GE, LE

    lo = np.where(p.sense == GE, p.b, np.where(p.sense == EQ, p.b, -np.inf))
    hi = np.where(p.sense == LE, p.b, np.where(p.sense == EQ, p.b, np.inf))
    integrality = np.zeros(p.A.shape[1])
    integrality[p.binaries] = 1
    cons = [LinearConstraint(p.A, lo, hi)] if p.A.shape[0] else []
    r = milp(p.c, constraints=cons, integrality=integrality, bounds=Bounds(p.lb, p.ub))
    return r.status, (r.fun + p.offset if r.status == 0 else None)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def accept():
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] #{number} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
