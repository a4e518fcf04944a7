"""Independent geometric and kinematic checkers.

Nothing here reads optimization-model internals: every check works from
extracted geometry (cubes, sampled states) with plain interval arithmetic,
so the results can serve as ground truth for the disjunctive encodings.

Conventions
-----------
* Two time intervals overlap iff their intersection has positive length;
  intervals touching at a point impose no spatial requirement.
* Footprints touching with zero gap pass with margin 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DurationTable",
    "ValidationReport",
    "check_corridor_continuity",
    "check_corridor_safety",
    "check_endpoint_inclusion",
    "check_trajectory",
    "check_vehicle_separation",
    "duration_report",
    "footprint_clearance",
    "reports_to_csv",
    "reports_to_json",
]

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of one check.

    ``margin`` is the signed worst-case slack (meters or seconds); the
    check passes iff ``margin >= -tol``.  ``entities`` lists offenders.
    """

    check: str
    passed: bool
    margin: float
    entities: tuple = ()
    messages: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed

    @property
    def violations(self) -> tuple[str, ...]:
        return self.messages

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": "pass" if self.passed else "fail",
            "margin": _jsonable(self.margin),
            "entities": [str(e) for e in self.entities],
            "messages": list(self.messages),
        }


def _jsonable(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _finish(check: str, margin: float, tol: float, entities: list, messages: list) -> ValidationReport:
    return ValidationReport(check, margin >= -tol, margin, tuple(entities), tuple(messages))


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# ---------------------------------------------------------------- corridors


def _time_overlap(a_l: float, a_u: float, b_l: float, b_u: float) -> float:
    return min(a_u, b_u) - max(a_l, b_l)


def _spatial_slack(a, b, gamma_x: float, gamma_y: float) -> float:
    """Largest separation slack over the two axes (>= 0 means separated)."""
    sx = max(a.x_l - b.x_u, b.x_l - a.x_u) - gamma_x
    sy = max(a.y_l - b.y_u, b.y_l - a.y_u) - gamma_y
    return max(sx, sy)


def check_corridor_safety(
    corridors: Sequence,
    obstacles: Iterable = (),
    gamma_x: float = 0.1,
    gamma_y: float = 0.1,
    tol: float = DEFAULT_TOL,
    time_tol: float = 1e-9,
) -> ValidationReport:
    """Brute-force disjointness check over all cube pairs.

    Cubes of different vehicles whose time intervals overlap with positive
    length must be separated by at least ``gamma_x`` in x or ``gamma_y`` in
    y.  Every vehicle cube must be likewise separated from every obstacle
    it shares time with (static obstacles exist at all times).
    """
    margin = math.inf
    entities: list = []
    messages: list[str] = []
    corridors = list(corridors)
    for a_idx in range(len(corridors)):
        ca = corridors[a_idx]
        for b_idx in range(a_idx + 1, len(corridors)):
            cb = corridors[b_idx]
            for m, p in enumerate(ca.cubes):
                for n, q in enumerate(cb.cubes):
                    if _time_overlap(p.t_l, p.t_u, q.t_l, q.t_u) <= time_tol:
                        continue
                    s = _spatial_slack(p, q, gamma_x, gamma_y)
                    margin = min(margin, s)
                    if s < -tol:
                        entities.append((ca.vehicle_id, m + 1, cb.vehicle_id, n + 1))
                        messages.append(
                            f"vehicle {ca.vehicle_id} cube {m + 1} conflicts with vehicle "
                            f"{cb.vehicle_id} cube {n + 1} (margin {_fmt(s)})"
                        )
    for o_idx, o in enumerate(obstacles):
        for c in corridors:
            for m, p in enumerate(c.cubes):
                if o.t_l is not None and _time_overlap(p.t_l, p.t_u, o.t_l, o.t_u) <= time_tol:
                    continue
                s = _spatial_slack(p, o, gamma_x, gamma_y)
                margin = min(margin, s)
                if s < -tol:
                    entities.append((c.vehicle_id, m + 1, f"obstacle {o_idx}"))
                    messages.append(
                        f"vehicle {c.vehicle_id} cube {m + 1} intersects obstacle {o_idx} (margin {_fmt(s)})"
                    )
    return _finish("corridor_safety", margin, tol, entities, messages)


def check_corridor_continuity(
    corridor,
    gamma_r: float,
    t_min: float,
    t_max: float,
    tol: float = DEFAULT_TOL,
) -> ValidationReport:
    """Overlap of consecutive cubes, cube sizes, durations and time chaining."""
    margin = math.inf
    entities: list = []
    messages: list[str] = []
    vid = corridor.vehicle_id

    def record(value: float, what: str, ent) -> None:
        nonlocal margin
        margin = min(margin, value)
        if value < -tol:
            entities.append(ent)
            messages.append(f"vehicle {vid} {what} (margin {_fmt(value)})")

    cubes = list(corridor.cubes)
    for k, c in enumerate(cubes, start=1):
        record(c.x_u - c.x_l - gamma_r, f"cube {k}: x-size below gamma_r", (vid, k))
        record(c.y_u - c.y_l - gamma_r, f"cube {k}: y-size below gamma_r", (vid, k))
        dur = c.t_u - c.t_l
        record(dur - t_min, f"cube {k}: duration {_fmt(dur)} below t_min", (vid, k))
        record(t_max - dur, f"cube {k}: duration {_fmt(dur)} above t_max", (vid, k))
    if cubes:
        record(-abs(cubes[0].t_l), "cube 1: does not start at t=0", (vid, 1))
    for k in range(len(cubes) - 1):
        a, b = cubes[k], cubes[k + 1]
        ox = min(a.x_u, b.x_u) - max(a.x_l, b.x_l)
        oy = min(a.y_u, b.y_u) - max(a.y_l, b.y_l)
        record(ox - gamma_r, f"cubes {k + 1}-{k + 2}: x-overlap {_fmt(ox)} below gamma_r", (vid, k + 1))
        record(oy - gamma_r, f"cubes {k + 1}-{k + 2}: y-overlap {_fmt(oy)} below gamma_r", (vid, k + 1))
        record(-abs(b.t_l - a.t_u), f"cubes {k + 1}-{k + 2}: time gap", (vid, k + 1))
    return _finish("corridor_continuity", margin, tol, entities, messages)


def _inset_slack(c, point: tuple[float, float], gamma_r: float) -> float:
    h = gamma_r / 2
    x, y = point
    return min(x - (c.x_l + h), (c.x_u - h) - x, y - (c.y_l + h), (c.y_u - h) - y)


def check_endpoint_inclusion(corridor, initial, target, gamma_r: float, tol: float = DEFAULT_TOL) -> ValidationReport:
    """First cube holds the initial position, last cube the target, with gamma_r/2 margin."""
    vid = corridor.vehicle_id
    cubes = list(corridor.cubes)
    entities: list = []
    messages: list[str] = []
    s0 = _inset_slack(cubes[0], initial, gamma_r)
    s1 = _inset_slack(cubes[-1], target, gamma_r)
    if s0 < -tol:
        entities.append((vid, 1))
        messages.append(f"vehicle {vid}: initial position outside first cube inset (margin {_fmt(s0)})")
    if s1 < -tol:
        entities.append((vid, len(cubes)))
        messages.append(f"vehicle {vid}: target outside last cube inset (margin {_fmt(s1)})")
    return _finish("endpoint_inclusion", min(s0, s1), tol, entities, messages)


# ---------------------------------------------------------------- trajectories


def _cube_at(cubes, t: float, time_tol: float = 1e-9) -> int:
    """Index of the cube holding time ``t`` (junctions go to the later cube)."""
    for k in range(len(cubes) - 1, -1, -1):
        if t >= cubes[k].t_l - time_tol:
            return k
    return 0


def check_trajectory(
    trajectory,
    corridor,
    target: tuple[float, float],
    params,
    eps_c: float = 1e-4,
    eps_pos: float = 0.1,
) -> ValidationReport:
    """Containment in the gamma_r/2-inset cubes, a/phi/v bounds and the endpoint.

    The cube holding each sample is recomputed here from the corridor time
    intervals rather than taken from the trajectory.
    """
    vid = corridor.vehicle_id
    cubes = list(corridor.cubes)
    h = params.gamma_r / 2
    states = np.asarray(trajectory.states, dtype=float)
    controls = np.asarray(trajectory.controls, dtype=float)
    times = np.asarray(trajectory.times, dtype=float)
    margin = math.inf
    entities: list = []
    messages: list[str] = []

    def record(value: float, what: str, ent) -> None:
        nonlocal margin
        margin = min(margin, value)
        if value < -eps_c:
            entities.append(ent)
            messages.append(f"vehicle {vid} {what} (margin {_fmt(value)})")

    worst_contain = math.inf
    worst_step = -1
    for t_idx, t in enumerate(times):
        c = cubes[_cube_at(cubes, t)]
        x, y = states[t_idx, 0], states[t_idx, 1]
        s = min(x - (c.x_l + h), (c.x_u - h) - x, y - (c.y_l + h), (c.y_u - h) - y)
        if s < worst_contain:
            worst_contain, worst_step = s, t_idx
    record(worst_contain, f"step {worst_step}: outside corridor inset", (vid, worst_step))

    a = states[:, 4]
    v = states[:, 3]
    phi = controls[:, 1]
    record(float(np.min(a - params.a_min)), "acceleration below a_min", (vid, "a"))
    record(float(np.min(params.a_max - a)), "acceleration above a_max", (vid, "a"))
    record(float(np.min(phi - params.phi_min)), "steering below phi_min", (vid, "phi"))
    record(float(np.min(params.phi_max - phi)), "steering above phi_max", (vid, "phi"))
    record(float(np.min(v)), "negative speed", (vid, "v"))
    record(float(np.min(params.v_max - v)), "speed above v_max", (vid, "v"))

    err = math.hypot(states[-1, 0] - target[0], states[-1, 1] - target[1])
    end_margin = eps_pos - err
    margin = min(margin, end_margin)
    if end_margin < 0:
        entities.append((vid, "endpoint"))
        messages.append(f"vehicle {vid}: endpoint error {_fmt(err)} m exceeds {eps_pos}")
        passed = False
    else:
        passed = margin >= -eps_c
    return ValidationReport("trajectory", passed and margin >= -eps_c, margin, tuple(entities), tuple(messages))


def _rect_corners(x: float, y: float, psi: float, l: float, w: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    hl, hw = l / 2, w / 2
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def footprint_clearance(p: Sequence[float], q: Sequence[float], l: float, w: float) -> float:
    """Separating-axis clearance between two l x w rectangles.

    ``p`` and ``q`` are (x, y, psi).  Returns the largest projected gap
    over the four candidate axes: positive when separated, zero when
    touching, negative (minus the smallest penetration) when overlapping.
    """
    A = _rect_corners(p[0], p[1], p[2], l, w)
    B = _rect_corners(q[0], q[1], q[2], l, w)
    axes = []
    for psi in (p[2], q[2]):
        axes.append((math.cos(psi), math.sin(psi)))
        axes.append((-math.sin(psi), math.cos(psi)))
    best = -math.inf
    for ax in axes:
        axv = np.asarray(ax)
        pa = A @ axv
        pb = B @ axv
        gap = max(pb.min() - pa.max(), pa.min() - pb.max())
        best = max(best, gap)
    return float(best)


def _resample(times: np.ndarray, states: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = np.empty((len(grid), 3))
    out[:, 0] = np.interp(grid, times, states[:, 0])
    out[:, 1] = np.interp(grid, times, states[:, 1])
    out[:, 2] = np.interp(grid, times, np.unwrap(states[:, 2]))
    return out


def check_vehicle_separation(trajectories: Sequence, l: float, w: float, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Pairwise footprint separation at every common timestamp.

    Pairs are compared over their common time window on the union of both
    sample grids; a trajectory is linearly interpolated where it has no
    sample of its own.
    """
    margin = math.inf
    entities: list = []
    messages: list[str] = []
    trajs = list(trajectories)
    for a in range(len(trajs)):
        ta = np.asarray(trajs[a].times, float)
        sa = np.asarray(trajs[a].states, float)
        for b in range(a + 1, len(trajs)):
            tb = np.asarray(trajs[b].times, float)
            sb = np.asarray(trajs[b].states, float)
            end = min(ta[-1], tb[-1])
            grid = np.union1d(ta[ta <= end + 1e-12], tb[tb <= end + 1e-12])
            grid = grid[grid <= end + 1e-12]
            pa = _resample(ta, sa, grid)
            pb = _resample(tb, sb, grid)
            worst = math.inf
            worst_t = None
            for g in range(len(grid)):
                c = footprint_clearance(pa[g], pb[g], l, w)
                if c < worst:
                    worst, worst_t = c, g
            margin = min(margin, worst)
            if worst < -tol:
                va, vb = trajs[a].vehicle_id, trajs[b].vehicle_id
                entities.append((va, vb, worst_t))
                messages.append(
                    f"vehicles {va} and {vb} collide at t={grid[worst_t]:.3f}s (clearance {_fmt(worst)})"
                )
    return _finish("vehicle_separation", margin, tol, entities, messages)


# ---------------------------------------------------------------- durations


@dataclass
class DurationTable:
    """Per-vehicle completion times t_u(K^i) for each method."""

    times: dict[str, dict[int, float]] = field(default_factory=dict)
    failed: dict[str, str] = field(default_factory=dict)

    def max_time(self, method: str) -> float:
        return max(self.times[method].values())

    def methods(self) -> list[str]:
        return list(self.times) + [m for m in self.failed if m not in self.times]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["method", "vehicle", "completion_time"])
        for method in self.methods():
            if method in self.failed:
                wr.writerow([method, "max", "infeasible"])
                continue
            for vid, t in sorted(self.times[method].items()):
                wr.writerow([method, vid, repr(float(t))])
            wr.writerow([method, "max", repr(float(self.max_time(method)))])
        return buf.getvalue()

    def format(self) -> str:
        """Plain-text table in the layout of a duration comparison."""
        vids = sorted({v for t in self.times.values() for v in t})
        head = ["method", "max"] + [f"AV{v}" for v in vids]
        rows = [head]
        for method in self.methods():
            if method in self.failed:
                rows.append([method, "infeasible"] + ["-"] * len(vids))
                continue
            t = self.times[method]
            rows.append([method, f"{self.max_time(method):.2f}"] + [f"{t[v]:.2f}" if v in t else "-" for v in vids])
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        return "\n".join("  ".join(cell.rjust(widths[c]) for c, cell in enumerate(r)) for r in rows)


def _completion_time(item) -> float:
    if hasattr(item, "cubes"):
        return float(item.cubes[-1].t_u)
    return float(item.times[-1])


def duration_report(results: Mapping[str, Sequence | None]) -> DurationTable:
    """Completion times per vehicle and method.

    ``results`` maps a method name to its corridors or trajectories; a
    value of ``None`` marks the method as infeasible.
    """
    table = DurationTable()
    for method, items in results.items():
        if items is None:
            table.failed[method] = "infeasible"
            continue
        table.times[method] = {it.vehicle_id: _completion_time(it) for it in items}
    return table


# ---------------------------------------------------------------- export


def reports_to_csv(reports: Iterable[ValidationReport]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["check", "status", "margin", "entities"])
    for r in reports:
        wr.writerow([r.check, "pass" if r.passed else "fail", repr(float(r.margin)), ";".join(map(str, r.entities))])
    return buf.getvalue()


def reports_to_json(reports: Iterable[ValidationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
