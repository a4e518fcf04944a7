"""Best-bound branch-and-bound over the binary variables of an LpProblem."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lp import LpProblem, LpSolution, Simplex

__all__ = ["BnbConfig", "MipSolution", "solve_mip", "polish"]

Heuristic = Callable[[np.ndarray], "np.ndarray | None"]


@dataclass(frozen=True)
class BnbConfig:
    int_tol: float = 1e-6
    gap_tol: float = 1e-4
    node_limit: int | None = 100_000
    time_limit: float | None = None
    branching: str = "most-fractional"
    node_order: str = "best-bound"
    dive: bool = True
    heuristic_every: int = 50

    def __post_init__(self) -> None:
        if self.int_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.branching != "most-fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_order != "best-bound":
            raise ValueError(f"unknown node order {self.node_order!r}")


@dataclass
class MipSolution:
    status: str  # optimal | feasible-incumbent | infeasible | node-limit | time-limit
    x: np.ndarray | None = None
    objective: float = math.inf
    nodes: int = 0
    gap: float = math.inf
    bound: float = -math.inf
    lp_iterations: int = 0
    trace: list[tuple[int, int, float, float]] = field(default_factory=list)
    incumbents: list[tuple[int, float, str]] = field(default_factory=list)
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def _gap(inc: float, bound: float) -> float:
    if not math.isfinite(inc):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    return max(inc - bound, 0.0) / max(abs(inc), 1.0)


def polish(simplex: Simplex, binaries: np.ndarray, values: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> LpSolution:
    """Fix ``binaries`` to the rounded ``values`` and re-solve the continuous part."""
    flb, fub = lb.copy(), ub.copy()
    r = np.clip(np.round(values), lb[binaries], ub[binaries])
    flb[binaries] = r
    fub[binaries] = r
    simplex.set_bounds(flb, fub)
    return simplex.reoptimize()


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    parent: int = field(compare=False, default=-1)


def solve_mip(
    p: LpProblem,
    cfg: BnbConfig | None = None,
    warm_start: np.ndarray | None = None,
    heuristic: Heuristic | None = None,
) -> MipSolution:
    """Minimize ``p`` with ``p.binaries`` restricted to {0, 1}.

    ``warm_start`` is a full-length vector whose binary entries (rounded)
    seed the incumbent after a continuous re-solve.  ``heuristic`` maps an
    LP relaxation point to a candidate vector (or None); candidates are
    treated the same way.  The search is deterministic.
    """
    cfg = cfg or BnbConfig()
    t0 = time.perf_counter()
    deadline = None if cfg.time_limit is None else t0 + cfg.time_limit
    bins = np.asarray(p.binaries, dtype=np.int64)
    if np.any(p.lb[bins] < -1e-12) or np.any(p.ub[bins] > 1 + 1e-12):
        raise ValueError("binary variables must have bounds within [0, 1]")
    simplex = Simplex(p)
    simplex.deadline = deadline
    sol = MipSolution(status="infeasible")
    inc_x: np.ndarray | None = None
    inc_obj = math.inf
    unresolved = False

    def offer(values: np.ndarray, source: str, node: int) -> None:
        nonlocal inc_x, inc_obj
        if bins.size == 0:
            return
        r = polish(simplex, bins, values[bins], p.lb, p.ub)
        if r.ok and r.objective < inc_obj - 1e-12:
            x = r.x.copy()
            x[bins] = np.round(x[bins])
            if p.max_violation(x) <= 1e-6:
                inc_x, inc_obj = x, r.objective
                sol.incumbents.append((node, inc_obj, source))

    def timed_out() -> bool:
        return deadline is not None and time.perf_counter() > deadline

    root = simplex.solve()
    sol.nodes = 1
    if root.status == "infeasible":
        sol.lp_iterations = simplex.iterations
        return sol
    if not root.ok:
        # time limit or numerical failure at the root: fall back to the warm start
        sol.lp_iterations = simplex.iterations
        sol.message = f"root relaxation: {root.status}"
        if warm_start is not None:
            simplex.deadline = None
            offer(np.asarray(warm_start, dtype=float), "warm-start", 0)
        if inc_x is not None:
            sol.x, sol.objective = inc_x, inc_obj
        if root.status == "time-limit":
            sol.status = "time-limit"
        else:
            sol.status = "feasible-incumbent" if inc_x is not None else "infeasible"
        return sol
    sol.trace.append((0, -1, root.objective, inc_obj))

    if warm_start is not None:
        offer(np.asarray(warm_start, dtype=float), "warm-start", 0)
    if heuristic is not None:
        cand = heuristic(root.x)
        if cand is not None:
            offer(np.asarray(cand, dtype=float), "heuristic", 0)

    seq = 0
    heap: list[_Node] = []
    dive: list[_Node] = []
    heapq.heappush(heap, _Node(root.objective, seq, 0, p.lb.copy(), p.ub.copy()))
    best_bound = root.objective
    first_node = True
    status = None
    nodes = 0
    # the root LP result is reused for the first node
    pending: dict[int, LpSolution] = {0: root}

    while heap or dive:
        if timed_out():
            status = "time-limit"
            break
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            status = "node-limit"
            break
        open_bounds = [n.bound for n in heap] + [n.bound for n in dive]
        best_bound = min(open_bounds) if open_bounds else best_bound
        if inc_x is not None and _gap(inc_obj, best_bound) <= cfg.gap_tol:
            heap.clear()
            dive.clear()
            break
        if dive and (inc_x is None):
            node = dive.pop()
        else:
            if dive:
                for n in dive:
                    heapq.heappush(heap, n)
                dive.clear()
            node = heapq.heappop(heap)
        if inc_x is not None and node.bound >= inc_obj - 1e-9 * max(abs(inc_obj), 1.0):
            continue
        nodes += 1
        if first_node:
            r = pending.pop(0)
            first_node = False
        else:
            simplex.set_bounds(node.lb, node.ub)
            r = simplex.reoptimize()
        if r.status == "time-limit":
            status = "time-limit"
            break
        if r.status == "infeasible":
            continue
        if not r.ok:
            unresolved = True
            continue
        sol.trace.append((node.seq, node.parent, r.objective, inc_obj))
        if inc_x is not None and r.objective >= inc_obj - 1e-9 * max(abs(inc_obj), 1.0):
            continue
        xb = r.x[bins]
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        frac_mask = frac > cfg.int_tol
        if not np.any(frac_mask):
            x = r.x.copy()
            x[bins] = np.round(xb)
            if r.objective < inc_obj:
                inc_x, inc_obj = x, r.objective
                sol.incumbents.append((nodes, inc_obj, "branch"))
            continue
        if heuristic is not None and cfg.heuristic_every and nodes % cfg.heuristic_every == 0:
            cand = heuristic(r.x)
            if cand is not None:
                offer(np.asarray(cand, dtype=float), "heuristic", nodes)
        k = int(np.argmax(np.where(frac_mask, frac, -1.0)))
        j = int(bins[k])
        children = []
        for val in (0.0, 1.0):
            lb = node.lb.copy()
            ub = node.ub.copy()
            lb[j] = ub[j] = val
            seq += 1
            children.append(_Node(r.objective, seq, node.depth + 1, lb, ub, node.seq))
        # dive toward the nearer integer first
        near_up = xb[k] >= 0.5
        if cfg.dive and inc_x is None:
            first, second = (children[1], children[0]) if near_up else (children[0], children[1])
            dive.append(second)
            dive.append(first)
        else:
            for c in children:
                heapq.heappush(heap, c)

    sol.nodes = nodes
    sol.lp_iterations = simplex.iterations
    open_bounds = [n.bound for n in heap] + [n.bound for n in dive]
    if status is None:
        best_bound = inc_obj if inc_x is not None else math.inf
    else:
        best_bound = min(open_bounds + ([inc_obj] if inc_x is not None else []), default=best_bound)
    sol.bound = best_bound
    if inc_x is not None:
        sol.x = inc_x
        sol.objective = inc_obj
        sol.gap = _gap(inc_obj, best_bound) if status else 0.0
    if status is not None:
        sol.status = status
    elif inc_x is None:
        sol.status = "infeasible"
    else:
        sol.status = "feasible-incumbent" if unresolved else "optimal"
    return sol
