"""Exhaustive enumeration of binary assignments: a ground-truth MIP solver for tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .bnb import MipSolution
from .lp import LpProblem, Simplex

__all__ = ["MAX_ORACLE_BINARIES", "enumerate_oracle"]

MAX_ORACLE_BINARIES = 20


def enumerate_oracle(p: LpProblem) -> MipSolution:
    """Solve the LP for every 0/1 assignment of ``p.binaries`` and keep the best."""
    bins = np.asarray(p.binaries, dtype=np.int64)
    if bins.size > MAX_ORACLE_BINARIES:
        raise ValueError(f"enumeration oracle refuses {bins.size} binaries (limit {MAX_ORACLE_BINARIES})")
    simplex = Simplex(p)
    best_x, best_obj = None, math.inf
    count = 0
    for bits in itertools.product((0.0, 1.0), repeat=int(bins.size)):
        lb, ub = p.lb.copy(), p.ub.copy()
        vals = np.array(bits)
        if np.any(vals < lb[bins]) or np.any(vals > ub[bins]):
            continue
        lb[bins] = vals
        ub[bins] = vals
        if count == 0:
            simplex.set_bounds(lb, ub)
            r = simplex.solve()
        else:
            simplex.set_bounds(lb, ub)
            r = simplex.reoptimize()
        count += 1
        if r.ok and r.objective < best_obj - 1e-12:
            best_obj, best_x = r.objective, r.x.copy()
    if best_x is None:
        return MipSolution(status="infeasible", nodes=count, lp_iterations=simplex.iterations)
    return MipSolution(
        status="optimal", x=best_x, objective=best_obj, nodes=count, gap=0.0, bound=best_obj,
        lp_iterations=simplex.iterations,
    )
