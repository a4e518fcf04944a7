"""Constructive incumbents for the corridor MIP.

Branch-and-bound on the full multi-vehicle model rarely finds a feasible
point by itself: the big-M relaxation lets every cube overlap every other.
This module builds one vehicle at a time instead.  Each vehicle gets a
fixed time step, so its cube time windows are known, and the cubes of the
vehicles planned before it enter as timed obstacles.  The binaries of the
single-vehicle problem are read off a reference motion along the route
and the remaining LP is solved; a small branch-and-bound is the fallback.
The assembled corridors are a feasible point of the full model.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corridor_model import (
    Corridor,
    Weights,
    assignment_from_corridors,
    build_model,
    extract_corridors,
    geometric_rounding,
    min_travel_time,
)
from .mip_solver import BnbConfig, solve_mip
from .mip_solver.lp import EQ, GE, LE, LpProblem, drop_redundant_rows, solve_lp
from .model import MipModel
from .scenario import Scenario, VehicleSpec

__all__ = [
    "ConstructionResult",
    "fix_and_solve",
    "complete_assignment",
    "ReferenceMotion",
    "plan_vehicle",
    "reference_motion",
    "vehicle_model",
    "conflict_order",
    "elastic_point",
    "polish_corridors",
    "prioritized_corridors",
    "warm_start_vector",
]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6


@dataclass
class ConstructionResult:
    corridors: list[Corridor]
    K: dict[int, int]
    dt: dict[int, float]
    order: list[int]
    continuity: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    delay: dict[int, float] = field(default_factory=dict)
    attempts: int = 0


def fix_and_solve(
    p: LpProblem,
    values: np.ndarray,
    cost: np.ndarray | None = None,
    extra_fixed: Mapping[int, float] | None = None,
    deadline: float | None = None,
) -> np.ndarray | None:
    """Fix the binaries of ``p`` to ``values`` and solve the remaining LP.

    ``cost`` replaces the objective; ``extra_fixed`` pins further columns.
    Returns the full solution vector, or None when the fixed LP has no
    feasible point.
    """
    lb = p.lb.copy()
    ub = p.ub.copy()
    b = p.binaries
    lb[b] = ub[b] = np.clip(np.round(values[b]), lb[b], ub[b])
    for j, val in (extra_fixed or {}).items():
        lb[j] = ub[j] = min(max(val, p.lb[j]), p.ub[j])
    q = LpProblem(p.c if cost is None else cost, p.A, p.sense, p.b, lb, ub, p.offset, p.binaries, p.var_names)
    r = solve_lp(drop_redundant_rows(q), deadline=deadline)
    if not r.ok:
        return None
    if p.with_bounds(lb, ub).max_violation(r.x) > FEAS_TOL:
        return None
    return r.x


def _fixed(p: LpProblem, values: np.ndarray) -> LpProblem:
    lb = p.lb.copy()
    ub = p.ub.copy()
    b = p.binaries
    lb[b] = ub[b] = np.clip(np.round(values[b]), lb[b], ub[b])
    return drop_redundant_rows(p.with_bounds(lb, ub))


def elastic_point(p: LpProblem, values: np.ndarray) -> np.ndarray | None:
    """Point minimizing the total row violation with the binaries fixed.

    Every row of the fixed problem gets a nonnegative slack (two for
    equalities); the LP minimizes their sum.  The geometry of the result
    shows which separation choices are worth changing.
    """
    q = _fixed(p, values)
    m, n = q.A.shape
    cols = []
    for i, sense in enumerate(q.sense):
        if sense in (LE, EQ):
            cols.append((i, -1.0))
        if sense in (GE, EQ):
            cols.append((i, 1.0))
    S = sp.csr_matrix(
        ([c for _, c in cols], ([i for i, _ in cols], np.arange(len(cols)))), shape=(m, len(cols))
    )
    big = float(np.max(np.abs(q.b), initial=1.0)) * 10.0 + 1e3
    e = LpProblem(
        np.concatenate([np.zeros(n), np.ones(len(cols))]),
        sp.hstack([q.A, S]).tocsr(),
        q.sense,
        q.b,
        np.concatenate([q.lb, np.zeros(len(cols))]),
        np.concatenate([q.ub, np.full(len(cols), big)]),
    )
    r = solve_lp(e)
    return r.x[:n] if r.ok else None


def complete_assignment(model: MipModel, x: np.ndarray) -> np.ndarray:
    """Set goal-distance and product auxiliaries consistent with ``x``.

    Binaries and cube variables are kept; the result is feasible for the
    model whenever the cube geometry and binaries are.
    """
    y = np.array(x, dtype=float)
    idx = model._index
    for vid, vs in model.meta["vehicles"].items():
        K = len(vs["xl"])
        for k in range(K):
            for ax, lo, hi in (("x", vs["xl"], vs["xu"]), ("y", vs["yl"], vs["yu"])):
                name = f"v{vid}_k{k + 1}_g{ax}"
                if name in idx:
                    tgt = vs["target"][0 if ax == "x" else 1]
                    y[idx[name]] = abs(0.5 * (y[lo[k]] + y[hi[k]]) - tgt)
            if k < K - 1:
                for ax, d in (("x", vs["dx"]), ("y", vs["dy"])):
                    name = f"v{vid}_k{k + 1}_z{ax}"
                    if name in idx:
                        y[idx[name]] = y[d[k]] * y[vs["dt"][k]]
    return y


@dataclass(frozen=True)
class ReferenceMotion:
    """Drivable speed profile along the straight route, sampled on a grid.

    The first step keeps the initial speed (acceleration starts at zero),
    then the vehicle accelerates at ``accel`` up to ``cruise`` and holds
    it, arriving at the target exactly at the horizon.  Positions follow
    the same explicit update as the trajectory rollout.
    """

    times: np.ndarray
    distance: np.ndarray
    accel: float
    cruise: float

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.distance))


def _profile_distance(v0: float, accel: float, cruise: float, dt: float, T: int, start: int = 0) -> np.ndarray:
    d = np.zeros(T + 1)
    vel, acc = v0, 0.0
    for t in range(T):
        d[t + 1] = d[t] + vel * dt
        vel = vel + acc * dt
        acc = min(accel, max(cruise - vel, 0.0) / dt) if t + 1 >= start else 0.0
    return d


# the reference keeps some acceleration and speed in reserve so that the
# trajectory stage has room to satisfy containment
ACCEL_FRACTIONS = (0.5, 0.75)
SPEED_HEADROOM = 1.0


def reference_motion(
    v: VehicleSpec, horizon: float, p, step: float = 0.1, delay: float = 0.0
) -> ReferenceMotion | None:
    """Profile covering the route in exactly ``horizon`` seconds, or None.

    The vehicle coasts for the fraction ``delay`` of the horizon before
    accelerating.  Gentle accelerations are tried first; the cruise speed
    is found by bisection.  None when even coasting overshoots or full
    acceleration falls short.
    """
    T = max(1, int(round(horizon / step)))
    dt = horizon / T
    D = v.route_length
    v0 = v.v_initial
    times = np.linspace(0.0, horizon, T + 1)
    start = int(round(delay * T))
    if _profile_distance(v0, 0.0, v0, dt, T)[-1] > D + 1e-9:
        return None
    top = max(v0, p.v_max - SPEED_HEADROOM)
    for frac in ACCEL_FRACTIONS:
        accel = frac * p.a_max
        if _profile_distance(v0, accel, top, dt, T, start)[-1] < D - 1e-9:
            continue
        lo, hi = v0, top
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _profile_distance(v0, accel, mid, dt, T, start)[-1] < D:
                lo = mid
            else:
                hi = mid
        d = _profile_distance(v0, accel, hi, dt, T, start)
        d *= D / d[-1] if d[-1] > 0 else 1.0
        return ReferenceMotion(times, d, accel, hi)
    return None


# slack around the reference motion along the route, and the lateral band
# the cube inset must reach
TUBE_MARGIN = 0.3
LATERAL_BAND = 0.6


def _dominant(v: VehicleSpec) -> str:
    return "x" if abs(v.x_target - v.x_initial) >= abs(v.y_target - v.y_initial) else "y"


def _reference_boxes(v: VehicleSpec, ref: ReferenceMotion, K: int, h: float, half: float) -> list[tuple[float, ...]]:
    """Per window, the route segment swept by the reference with margin.

    Entries are (x_lo, x_hi, y_lo, y_hi, t_l, t_u) of the swept segment
    itself, not yet padded by the inset.
    """
    D = v.route_length
    ux = (v.x_target - v.x_initial) / D
    uy = (v.y_target - v.y_initial) / D
    out = []
    for k in range(K):
        s0 = ref.at(k * h) - TUBE_MARGIN
        s1 = ref.at((k + 1) * h) + TUBE_MARGIN
        xs = (v.x_initial + ux * s0, v.x_initial + ux * s1)
        ys = (v.y_initial + uy * s0, v.y_initial + uy * s1)
        out.append((min(xs), max(xs), min(ys), max(ys), k * h, (k + 1) * h))
    return out


def _padded(v: VehicleSpec, box: tuple[float, ...], half: float) -> tuple[float, ...]:
    """Reference box grown to a cube that satisfies the tube rows."""
    xl, xu, yl, yu, tl, tu = box
    return (xl - half, xu + half, yl - half, yu + half, tl, tu)


def _add_tube(m: MipModel, v: VehicleSpec, boxes, half: float) -> None:
    """Tie the cubes to the reference motion.

    Along the dominant travel axis the inset covers the swept segment, so
    the reference timing fits.  Across it the inset only has to reach a
    band around the route, which leaves room to sidestep neighbours.  No
    cube before the last may hold the target, so pruning keeps the
    reference arrival time.
    """
    vs = m.meta["vehicles"][v.id]
    K = len(boxes)
    along = _dominant(v)
    for k, (xl, xu, yl, yu, _, _) in enumerate(boxes):
        tag = f"v{v.id}_k{k + 1}_tube"
        for axis, lo, hi in (("x", xl, xu), ("y", yl, yu)):
            lo_i = vs[axis + "l"][k]
            hi_i = vs[axis + "u"][k]
            if axis == along:
                m.add_row({lo_i: 1.0}, LE, lo - half, f"{tag}_{axis}l")
                m.add_row({hi_i: 1.0}, GE, hi + half, f"{tag}_{axis}u")
            else:
                m.add_row({lo_i: 1.0}, LE, hi + LATERAL_BAND - half, f"{tag}_{axis}l")
                m.add_row({hi_i: 1.0}, GE, lo - LATERAL_BAND + half, f"{tag}_{axis}u")
    if along == "x":
        lo, hi, tgt, d = vs["xl"], vs["xu"], v.x_target, v.x_target - v.x_initial
    else:
        lo, hi, tgt, d = vs["yl"], vs["yu"], v.y_target, v.y_target - v.y_initial
    for k in range(K - 1):
        if d > 0:
            m.add_row({hi[k]: 1.0}, LE, tgt + half - 0.01, f"v{v.id}_k{k + 1}_early")
        else:
            m.add_row({lo[k]: 1.0}, GE, tgt - half + 0.01, f"v{v.id}_k{k + 1}_early")


def vehicle_model(
    s: Scenario, v: VehicleSpec, K: int, h: float, weights: Weights, envelope: bool = True, delay: float = 0.0
) -> tuple[MipModel, list[tuple[float, ...]]] | None:
    """Single-vehicle model with fixed step ``h`` and the reference tube rows.

    None when no drivable profile arrives in K * h.
    """
    ref = reference_motion(v, K * h, s.params, delay=delay)
    if ref is None:
        return None
    sub = dataclasses.replace(s, vehicles=(v,))
    m = build_model(sub, {v.id: K}, weights, envelope=envelope, fixed_dt={v.id: h}, name=f"vehicle{v.id}")
    boxes = _reference_boxes(v, ref, K, h, 0.5 * s.params.gamma_r)
    _add_tube(m, v, boxes, 0.5 * s.params.gamma_r)
    return m, boxes


def _reference_continuity(v: VehicleSpec, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Direction binaries: travel direction on moving axes, alternating otherwise."""
    out = []
    for d in (v.x_target - v.x_initial, v.y_target - v.y_initial):
        if abs(d) > 1e-9:
            out.append(np.full(K - 1, 1.0 if d > 0 else 0.0))
        else:
            out.append(np.array([1.0 if k % 2 == 0 else 0.0 for k in range(K - 1)]))
    return out[0], out[1]


def _size_cost(model: MipModel, n: int) -> np.ndarray:
    c = np.zeros(n)
    for vs in model.meta["vehicles"].values():
        for k in range(len(vs["xl"])):
            c[vs["xu"][k]] += 1.0
            c[vs["xl"][k]] -= 1.0
            c[vs["yu"][k]] += 1.0
            c[vs["yl"][k]] -= 1.0
    return c


def plan_vehicle(
    s: Scenario,
    v: VehicleSpec,
    K: int,
    h: float,
    weights: Weights,
    envelope: bool = True,
    node_limit: int = 0,
    pump_rounds: int = 8,
    delay: float = 0.0,
) -> tuple[Corridor, tuple[np.ndarray, np.ndarray]] | None:
    """Corridor for ``v`` alone among the obstacles of ``s`` with step ``h``.

    Timed obstacles in ``s`` stand for vehicles already planned.  The
    binaries come from the reference motion.  When that assignment is
    infeasible, up to ``pump_rounds`` times the binaries are re-read from
    the least-violating point under the current ones.  With ``node_limit``
    > 0 a small branch-and-bound is the last resort.
    Returns the corridor and its direction binaries, or None.
    """
    built = vehicle_model(s, v, K, h, weights, envelope, delay)
    if built is None:
        return None
    m, ref = built
    p = m.to_lp_problem()
    vs = m.meta["vehicles"][v.id]
    x = np.array(p.lb, dtype=float)
    for k, box in enumerate(ref):
        xl, xu, yl, yu, tl, tu = _padded(v, box, 0.5 * s.params.gamma_r)
        for key, val in (("xl", xl), ("xu", xu), ("yl", yl), ("yu", yu), ("tl", tl), ("tu", tu), ("dt", h)):
            x[vs[key][k]] = val
    y = geometric_rounding(m, x)
    dx, dy = _reference_continuity(v, K)
    y[vs["dx"]] = dx
    y[vs["dy"]] = dy
    sol = fix_and_solve(p, y)
    seen = {tuple(np.round(y[p.binaries]).astype(int))}
    for _ in range(pump_rounds if sol is None else 0):
        z = elastic_point(p, y)
        if z is None:
            break
        y = geometric_rounding(m, z)
        key = tuple(np.round(y[p.binaries]).astype(int))
        if key in seen:
            break
        seen.add(key)
        sol = fix_and_solve(p, y)
        if sol is not None:
            break
    if sol is None and node_limit > 0 and m.n_binaries:
        r = solve_mip(
            p,
            BnbConfig(node_limit=node_limit),
            heuristic=lambda z: geometric_rounding(m, z),
        )
        sol = r.x
    if sol is None:
        return None
    # keep the cubes as small as the constraints allow so that vehicles
    # planned later find room
    small = fix_and_solve(p, sol, cost=_size_cost(m, len(p.c)))
    if small is not None:
        sol = small
    corridor = extract_corridors(m, sol)[0]
    return corridor, (np.round(sol[vs["dx"]]), np.round(sol[vs["dy"]]))


def _arrival_window(v: VehicleSpec, s: Scenario, envelope: bool) -> tuple[float, float]:
    p = s.params
    dist = v.route_length
    if not envelope:
        return 0.0, math.inf
    fast = min_travel_time(dist, v.v_initial, p.a_max, p.v_max)
    slow = dist / v.v_initial if p.a_min >= 0 and v.v_initial > 0 else math.inf
    return fast, slow


DELAYS = (0.0, 0.3, 0.6)


def _candidates(
    v: VehicleSpec,
    s: Scenario,
    K: int | None,
    envelope: bool,
    k_range: tuple[int, int],
    steps: Sequence[float] | None = None,
    horizon_step: float = 0.4,
) -> list[tuple[int, float, float]]:
    """(cube count, step, acceleration delay) triples to try.

    Steps come in the given order (smallest first by default): small
    steps give narrow cubes, as the reach rows make every cube at least
    (v_max - v_min) * dt wide, which leaves room for vehicles planned
    later.  For each step the horizons run from the earliest arrival
    upward in increments of about ``horizon_step`` seconds.
    """
    p = s.params
    fast, slow = _arrival_window(v, s, envelope)
    if steps is None:
        steps = np.linspace(p.t_min, p.t_max, 10)
    steps = [float(h) for h in steps]
    out = []
    for h in steps:
        if K is not None:
            ks = [K]
        else:
            lo = max(k_range[0], math.ceil(fast / h - 1e-9))
            hi = min(k_range[1], math.floor(slow / h + 1e-9) if math.isfinite(slow) else k_range[1])
            stride = max(1, int(round(horizon_step / h)))
            ks = list(range(lo, hi + 1, stride))
        for k in ks:
            if envelope and not (fast - 1e-9 <= k * h <= slow + 1e-9):
                continue
            out.extend((k, h, d) for d in DELAYS)
    if K is not None and envelope:
        # a given count may need a step off the grid to fit the window
        h_lo = max(p.t_min, fast / K)
        if h_lo <= p.t_max and all(abs(h - h_lo) > 1e-9 for _, h, _ in out):
            out.extend((K, h_lo, d) for d in DELAYS)
    return out


def conflict_order(s: Scenario) -> list[int]:
    """Vehicle ids, most route conflicts first (ties by id order).

    Two routes conflict when their straight segments, grown by half a
    vehicle width, overlap: crossings count, neighbouring parallel lanes
    do not.  Vehicles that cross many others are the hardest to fit in
    later, so they are planned first.
    """
    g = 0.5 * s.params.w
    boxes = {}
    for v in s.vehicles:
        boxes[v.id] = (
            min(v.x_initial, v.x_target) - g, max(v.x_initial, v.x_target) + g,
            min(v.y_initial, v.y_target) - g, max(v.y_initial, v.y_target) + g,
        )
    count = {}
    for v in s.vehicles:
        a = boxes[v.id]
        count[v.id] = sum(
            1 for w in s.vehicles
            if w.id != v.id and a[0] < boxes[w.id][1] and boxes[w.id][0] < a[1]
            and a[2] < boxes[w.id][3] and boxes[w.id][2] < a[3]
        )
    rank = {v.id: i for i, v in enumerate(s.vehicles)}
    return sorted(count, key=lambda vid: (-count[vid], rank[vid]))


def prioritized_corridors(
    s: Scenario,
    K: int | Mapping[int, int] | None = None,
    weights: Weights | None = None,
    envelope: bool = True,
    order: Sequence[int] | None = None,
    k_range: tuple[int, int] = (2, 90),
    steps: Sequence[float] | None = None,
    node_limit: int = 0,
    time_limit: float | None = None,
) -> ConstructionResult | None:
    """Plan vehicles in priority order; each avoids the cubes of the earlier ones.

    ``K`` fixes the cube count (per vehicle or common); when omitted, counts
    and steps are searched with the smallest step first.  If a
    vehicle finds no corridor it is moved to the front of the order and
    planning restarts, at most once per vehicle.  The default order puts
    the vehicles with the most route conflicts first.  ``time_limit``
    bounds the whole search (seconds); None is returned when it runs out.
    """
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    weights = weights or Weights()
    ids = list(order) if order is not None else conflict_order(s)
    if isinstance(K, Mapping):
        k_fixed = {vid: int(K[vid]) for vid in ids}
    elif K is not None:
        k_fixed = {vid: int(K) for vid in ids}
    else:
        k_fixed = {}
    attempts = 0
    promoted: set[int] = set()
    while True:
        res = ConstructionResult([], {}, {}, list(ids))
        obstacles = list(s.obstacles)
        failed = None
        for vid in ids:
            v = s.vehicle(vid)
            env = dataclasses.replace(s, obstacles=tuple(obstacles))
            found = None
            for k, h, delay in _candidates(v, s, k_fixed.get(vid), envelope, k_range, steps):
                if deadline is not None and time.perf_counter() > deadline:
                    log.info("construction time limit reached")
                    return None
                attempts += 1
                out = plan_vehicle(env, v, k, h, weights, envelope, node_limit, delay=delay)
                if out is not None:
                    found = (k, h, delay, out)
                    break
            if found is None:
                failed = vid
                break
            k, h, delay, (corridor, cont) = found
            log.debug("vehicle %d: K=%d dt=%.3f", vid, k, h)
            res.corridors.append(corridor)
            res.K[vid] = k
            res.dt[vid] = h
            res.delay[vid] = delay
            res.continuity[vid] = cont
            obstacles.extend(c.as_obstacle() for c in corridor.cubes)
        res.attempts = attempts
        if failed is None:
            by_id = {c.vehicle_id: c for c in res.corridors}
            res.corridors = [by_id[v.id] for v in s.vehicles]
            return res
        if failed in promoted or ids[0] == failed:
            log.info("no corridor for vehicle %d in any tried order", failed)
            return None
        promoted.add(failed)
        ids.remove(failed)
        ids.insert(0, failed)


def warm_start_vector(model: MipModel, result: ConstructionResult) -> np.ndarray:
    """Feasible point of ``model`` placing the constructed corridors."""
    x = assignment_from_corridors(model, result.corridors, result.continuity)
    return complete_assignment(model, x)


def polish_corridors(
    s: Scenario,
    result: ConstructionResult,
    weights: Weights | None = None,
    envelope: bool = True,
    rounds: int = 1,
) -> ConstructionResult:
    """Re-optimize each vehicle's cubes with the others held fixed.

    Construction leaves every cube as small as possible.  Here each
    vehicle in planning order re-solves its own LP under the true
    objective, with the binaries read from its current corridor and all
    other corridors as timed obstacles.  The current corridor is feasible
    for that LP, so no vehicle gets worse and the joint point stays
    feasible.
    """
    weights = weights or Weights()
    by_id = {c.vehicle_id: c for c in result.corridors}
    for _ in range(rounds):
        for vid in result.order:
            v = s.vehicle(vid)
            others = [cube.as_obstacle() for oid, c in by_id.items() if oid != vid for cube in c.cubes]
            env = dataclasses.replace(s, obstacles=tuple(s.obstacles) + tuple(others))
            built = vehicle_model(env, v, result.K[vid], result.dt[vid], weights, envelope, result.delay[vid])
            if built is None:
                continue
            m = built[0]
            x = assignment_from_corridors(m, [by_id[vid]], {vid: result.continuity[vid]})
            sol = fix_and_solve(m.to_lp_problem(), complete_assignment(m, x))
            if sol is None:
                log.debug("polish kept vehicle %d unchanged", vid)
                continue
            by_id[vid] = extract_corridors(m, sol)[0]
    return dataclasses.replace(result, corridors=[by_id[v.id] for v in s.vehicles])
