"""Corridor MIP: cubes, corridors, the model builder and solution extraction.

Each vehicle gets K cubes ``[x_l, x_u] x [y_l, y_u] x [t_l, t_u]`` stacked
in time.  Binary variables select, for every pair of cubes that might
coexist in time, which side separates them (or that they are disjoint in
time), and for every consecutive pair the direction of travel used in the
reachability constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .mip_solver.lp import EQ, GE, LE
from .model import MipModel
from .scenario import ObstacleCube, PlannerParams, Scenario, VehicleSpec

__all__ = [
    "Cube",
    "Corridor",
    "Weights",
    "CorridorError",
    "OBJECTIVE_MODES",
    "default_k",
    "min_travel_time",
    "envelope_rates",
    "build_vstc_model",
    "build_model",
    "linearize_bilinear",
    "extract_corridors",
    "geometric_rounding",
    "assignment_from_corridors",
]

OBJECTIVE_MODES = ("l1", "quadratic")


class CorridorError(ValueError):
    pass


@dataclass(frozen=True)
class Cube:
    x_l: float
    x_u: float
    y_l: float
    y_u: float
    t_l: float
    t_u: float

    @property
    def x_c(self) -> float:
        return 0.5 * (self.x_l + self.x_u)

    @property
    def y_c(self) -> float:
        return 0.5 * (self.y_l + self.y_u)

    @property
    def dt(self) -> float:
        return self.t_u - self.t_l

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.x_l, self.x_u, self.y_l, self.y_u, self.t_l, self.t_u)

    def as_obstacle(self) -> ObstacleCube:
        return ObstacleCube(self.x_l, self.x_u, self.y_l, self.y_u, self.t_l, self.t_u)


@dataclass(frozen=True)
class Corridor:
    vehicle_id: int
    cubes: tuple[Cube, ...]

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def horizon(self) -> float:
        return self.cubes[-1].t_u if self.cubes else 0.0


@dataclass(frozen=True)
class Weights:
    """Objective weights: goal attraction, cube size reward, duration penalty."""

    goal: float = 1.0
    size: float = 0.2
    time: float = 2.0

    def __post_init__(self) -> None:
        if min(self.goal, self.size, self.time) <= 0:
            raise CorridorError("objective weights must be positive")


def default_k(v: VehicleSpec, p: PlannerParams) -> int:
    """ceil(route / (0.5 v_max t_max)) + 1, clamped to [2, 10]."""
    k = math.ceil(v.route_length / (0.5 * p.v_max * p.t_max)) + 1
    return int(min(max(k, 2), 10))


def min_travel_time(distance: float, v0: float, a_max: float, v_max: float) -> float:
    """Shortest time to cover ``distance`` from speed v0 under a <= a_max, v <= v_max."""
    if distance <= 0:
        return 0.0
    if a_max <= 0 or v0 >= v_max:
        return distance / max(v0, 1e-12)
    t_sat = (v_max - v0) / a_max
    d_sat = v0 * t_sat + 0.5 * a_max * t_sat**2
    if distance <= d_sat:
        return (-v0 + math.sqrt(v0 * v0 + 2 * a_max * distance)) / a_max
    return t_sat + (distance - d_sat) / v_max


def envelope_rates(v: VehicleSpec, p: PlannerParams) -> dict[str, tuple[float, float, float]]:
    """Per moving axis: (direction sign, chord rate, slow rate) in m/s.

    The chord rate covers the route in the shortest feasible time, so no
    cube reaches further than a maximally accelerating vehicle could.  The
    slow rate is the speed a vehicle keeps when it cannot brake (a_min >= 0)
    or v_min otherwise.  Both are projected onto the axis.
    """
    dist = v.route_length
    h_min = min_travel_time(dist, v.v_initial, p.a_max, p.v_max)
    v_slow = v.v_initial if p.a_min >= 0 else p.v_min
    out = {}
    for axis, d in (("x", v.x_target - v.x_initial), ("y", v.y_target - v.y_initial)):
        if abs(d) <= 1e-9:
            continue
        u = abs(d) / dist
        out[axis] = (math.copysign(1.0, d), abs(d) / h_min, v_slow * u)
    return out


# --------------------------------------------------------------------- builder


def linearize_bilinear(m: MipModel, delta: int, dt: int, name: str) -> int:
    """Add z = delta * dt exactly (at integrality) via the four McCormick rows.

    ``dt`` must have finite bounds [lo, hi]; z is bounded by
    [min(lo, 0), max(hi, 0)].
    """
    lo, hi = m.lb[dt], m.ub[dt]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise CorridorError(f"{name}: duration bounds must be finite")
    z = m.add_var(name, min(lo, 0.0), max(hi, 0.0))
    # z >= lo d ; z <= hi d ; z <= dt - lo (1 - d) ; z >= dt - hi (1 - d)
    m.add_row({z: 1.0, delta: -lo}, GE, 0.0, f"{name}_mc1")
    m.add_row({z: 1.0, delta: -hi}, LE, 0.0, f"{name}_mc2")
    m.add_row({z: 1.0, dt: -1.0, delta: -lo}, LE, -lo, f"{name}_mc3")
    m.add_row({z: 1.0, dt: -1.0, delta: -hi}, GE, -hi, f"{name}_mc4")
    return z


@dataclass
class _VehicleVars:
    vehicle: VehicleSpec
    K: int
    fixed_dt: float | None
    xl: list[int] = field(default_factory=list)
    xu: list[int] = field(default_factory=list)
    yl: list[int] = field(default_factory=list)
    yu: list[int] = field(default_factory=list)
    tl: list[int] = field(default_factory=list)
    tu: list[int] = field(default_factory=list)
    dt: list[int] = field(default_factory=list)
    dx: list[int] = field(default_factory=list)
    dy: list[int] = field(default_factory=list)
    # bounding box and time window implied by the variable bounds
    box: list[tuple[float, float, float, float]] = field(default_factory=list)
    twin: list[tuple[float, float, float, float]] = field(default_factory=list)


def _separable(a, b, gx: float, gy: float) -> bool:
    """Boxes (x_l, x_u, y_l, y_u) are already apart by the safe distance on some axis."""
    return b[0] - a[1] >= gx or a[0] - b[1] >= gx or b[2] - a[3] >= gy or a[2] - b[3] >= gy


def _time_disjoint(wa, wb) -> bool:
    """Windows (tl_lo, tl_hi, tu_lo, tu_hi) leave no positive-length overlap."""
    return wa[3] <= wb[0] or wb[3] <= wa[0]


class _Builder:
    def __init__(
        self,
        s: Scenario,
        Ks: Mapping[int, int],
        weights: Weights,
        objective_mode: str = "l1",
        envelope: bool = False,
        prune: bool = True,
        symmetric_pairs: bool = False,
        fixed_dt: float | Mapping[int, float] | None = None,
        waypoints: Mapping[int, Sequence[tuple[float, float]]] | None = None,
        name: str = "vstc",
    ):
        if objective_mode not in OBJECTIVE_MODES:
            raise CorridorError(f"objective_mode must be one of {OBJECTIVE_MODES}")
        self.s = s
        self.p = s.params
        self.Ks = dict(Ks)
        for vid, K in self.Ks.items():
            if K < 1:
                raise CorridorError(f"vehicle {vid}: K must be at least 1")
        self.w = weights
        self.mode = objective_mode
        self.envelope = envelope
        self.prune = prune
        self.symmetric = symmetric_pairs
        if fixed_dt is None or isinstance(fixed_dt, Mapping):
            self.fixed = dict(fixed_dt or {})
        else:
            self.fixed = {v.id: float(fixed_dt) for v in s.vehicles}
        for vid, h in self.fixed.items():
            if not h > 0:
                raise CorridorError(f"vehicle {vid}: fixed time step must be positive")
        self.waypoints = waypoints
        self.t_cap = max(self.Ks[v.id] * self.fixed.get(v.id, self.p.t_max) for v in s.vehicles)
        self.M = 2.0 * s.world_extent + self.p.v_max * self.t_cap
        self.Mt = self.t_cap
        self.m = MipModel(name=name)
        self.m.meta.update(
            M=self.M,
            Mt=self.Mt,
            weights=(weights.goal, weights.size, weights.time),
            objective_mode=objective_mode,
            envelope=envelope,
            fixed_dt=dict(self.fixed),
            gamma=(self.p.gamma_x, self.p.gamma_y, self.p.gamma_r),
            v_range=(self.p.v_min, self.p.v_max),
            K={v.id: self.Ks[v.id] for v in s.vehicles},
            vehicles={},
            pair_blocks=[],
            obstacle_blocks=[],
            pruned_blocks=0,
            obstacles=[(o.x_l, o.x_u, o.y_l, o.y_u, o.t_l, o.t_u) for o in s.obstacles],
        )
        self.vv: dict[int, _VehicleVars] = {}

    # -------------------------------------------------------------- per vehicle

    def vehicle(self, v: VehicleSpec) -> None:
        m, p, s = self.m, self.p, self.s
        K = self.Ks[v.id]
        g = p.gamma_r
        half = 0.5 * g
        fixed = self.fixed.get(v.id)
        vv = _VehicleVars(v, K, fixed)
        dt_lo, dt_hi = (fixed, fixed) if fixed is not None else (p.t_min, p.t_max)
        rates = envelope_rates(v, p) if self.envelope else {}
        for k in range(K):
            tag = f"v{v.id}_k{k + 1}"
            tl_lo, tl_hi = k * dt_lo, k * dt_hi
            tu_lo, tu_hi = (k + 1) * dt_lo, (k + 1) * dt_hi
            # [lower edge lo, hi, upper edge lo, hi] per axis
            bounds = {"x": [s.x_min, s.x_max, s.x_min, s.x_max], "y": [s.y_min, s.y_max, s.y_min, s.y_max]}
            # bounds implied by the envelope rows below (bound tightening)
            for axis, (sg, chord, slow) in rates.items():
                b = bounds[axis]
                o = v.x_initial if axis == "x" else v.y_initial
                if sg > 0:
                    b[3] = min(b[3], o + half + chord * tu_hi)
                    b[2] = max(b[2], o + half + slow * tu_lo)
                    b[1] = min(b[1], o - half + chord * tl_hi)
                else:
                    b[0] = max(b[0], o - half - chord * tu_hi)
                    b[1] = min(b[1], o - half - slow * tu_lo)
                    b[2] = max(b[2], o + half - chord * tl_hi)
            for b in bounds.values():
                # leave contradictions to the rows so the solver reports them
                if b[0] > b[1] or b[2] > b[3]:
                    b[:] = [min(b[0], b[1]), max(b[0], b[1]), min(b[2], b[3]), max(b[2], b[3])]
            bx, by = bounds["x"], bounds["y"]
            xl = m.add_var(f"{tag}_xl", bx[0], bx[1])
            xu = m.add_var(f"{tag}_xu", bx[2], bx[3])
            yl = m.add_var(f"{tag}_yl", by[0], by[1])
            yu = m.add_var(f"{tag}_yu", by[2], by[3])
            tl = m.add_var(f"{tag}_tl", tl_lo, tl_hi)
            tu = m.add_var(f"{tag}_tu", tu_lo, tu_hi)
            dt = m.add_var(f"{tag}_dt", dt_lo, dt_hi)
            for lst, idx in ((vv.xl, xl), (vv.xu, xu), (vv.yl, yl), (vv.yu, yu), (vv.tl, tl), (vv.tu, tu), (vv.dt, dt)):
                lst.append(idx)
            vv.box.append((bx[0], bx[3], by[0], by[3]))
            vv.twin.append((tl_lo, tl_hi, tu_lo, tu_hi))
            m.add_row({dt: 1.0, tu: -1.0, tl: 1.0}, EQ, 0.0, f"{tag}_dur")
            m.add_row({xu: 1.0, xl: -1.0}, GE, g, f"{tag}_sizex")
            m.add_row({yu: 1.0, yl: -1.0}, GE, g, f"{tag}_sizey")
            if k == 0:
                m.add_row({tl: 1.0}, EQ, 0.0, f"{tag}_t0")
            else:
                m.add_row({tl: 1.0, vv.tu[k - 1]: -1.0}, EQ, 0.0, f"{tag}_chain")
            for axis, (sg, chord, slow) in rates.items():
                lo_i, hi_i = (xl, xu) if axis == "x" else (yl, yu)
                o = v.x_initial if axis == "x" else v.y_initial
                if sg > 0:
                    # forward edge no further than the fastest vehicle, no
                    # closer than the slowest; rear edge reachable at entry
                    m.add_row({hi_i: 1.0, tu: -chord}, LE, o + half, f"{tag}_envfar{axis}")
                    m.add_row({hi_i: 1.0, tu: -slow}, GE, o + half, f"{tag}_envslow{axis}")
                    m.add_row({lo_i: 1.0, tl: -chord}, LE, o - half, f"{tag}_envnear{axis}")
                else:
                    m.add_row({lo_i: 1.0, tu: chord}, GE, o - half, f"{tag}_envfar{axis}")
                    m.add_row({lo_i: 1.0, tu: slow}, LE, o - half, f"{tag}_envslow{axis}")
                    m.add_row({hi_i: 1.0, tl: chord}, GE, o + half, f"{tag}_envnear{axis}")
        self._inclusion(vv, 0, v.initial, "init")
        self._inclusion(vv, K - 1, v.target, "goal")
        if self.waypoints is not None:
            wps = self.waypoints[v.id]
            if len(wps) != K:
                raise CorridorError(f"vehicle {v.id}: {len(wps)} waypoints for {K} cubes")
            for k, wp in enumerate(wps):
                self._inclusion(vv, k, wp, f"k{k + 1}_wp")
        self._continuity(vv)
        self._objective(vv)
        self.vv[v.id] = vv
        m.meta["vehicles"][v.id] = {
            "xl": vv.xl, "xu": vv.xu, "yl": vv.yl, "yu": vv.yu,
            "tl": vv.tl, "tu": vv.tu, "dt": vv.dt, "dx": vv.dx, "dy": vv.dy,
            "target": v.target,
        }

    def _inclusion(self, vv: _VehicleVars, k: int, point: tuple[float, float], tag: str) -> None:
        m, half, vid = self.m, 0.5 * self.p.gamma_r, vv.vehicle.id
        px, py = point
        m.add_row({vv.xl[k]: 1.0}, LE, px - half, f"v{vid}_{tag}_xl")
        m.add_row({vv.xu[k]: 1.0}, GE, px + half, f"v{vid}_{tag}_xu")
        m.add_row({vv.yl[k]: 1.0}, LE, py - half, f"v{vid}_{tag}_yl")
        m.add_row({vv.yu[k]: 1.0}, GE, py + half, f"v{vid}_{tag}_yu")

    def _continuity(self, vv: _VehicleVars) -> None:
        m, p = self.m, self.p
        g = p.gamma_r
        vmin, vmax = p.v_min, p.v_max
        fixed = vv.fixed_dt
        for k in range(vv.K - 1):
            tag = f"v{vv.vehicle.id}_k{k + 1}"
            for axis, lo, hi in (("x", vv.xl, vv.xu), ("y", vv.yl, vv.yu)):
                d = m.add_binary(f"{tag}_d{axis}", role=f"cont_{axis}")
                (vv.dx if axis == "x" else vv.dy).append(d)
                # lower edge of k+1 <= centroid + dt [vmin d + vmax (d - 1)]
                row1 = {lo[k + 1]: 1.0, lo[k]: -0.5, hi[k]: -0.5}
                # upper edge of k+1 >= centroid + dt [vmax d + vmin (d - 1)]
                row2 = {hi[k + 1]: 1.0, lo[k]: -0.5, hi[k]: -0.5}
                if fixed is None:
                    z = linearize_bilinear(m, d, vv.dt[k], f"{tag}_z{axis}")
                    row1.update({z: -(vmin + vmax), vv.dt[k]: vmax})
                    row2.update({z: -(vmax + vmin), vv.dt[k]: vmin})
                    rhs1 = rhs2 = 0.0
                else:
                    # the duration is a constant, so the product is linear
                    row1[d] = -(vmin + vmax) * fixed
                    row2[d] = -(vmax + vmin) * fixed
                    rhs1, rhs2 = -vmax * fixed, -vmin * fixed
                m.add_row(row1, LE, rhs1, f"{tag}_reach{axis}_lo")
                m.add_row(row2, GE, rhs2, f"{tag}_reach{axis}_hi")
                m.add_row({hi[k]: 1.0, lo[k + 1]: -1.0}, GE, g, f"{tag}_ovl{axis}1")
                m.add_row({hi[k + 1]: 1.0, lo[k]: -1.0}, GE, g, f"{tag}_ovl{axis}2")

    def _objective(self, vv: _VehicleVars) -> None:
        m, w, v = self.m, self.w, vv.vehicle
        ext = 2.0 * self.s.world_extent
        for k in range(vv.K):
            tag = f"v{v.id}_k{k + 1}"
            for lo, hi, tgt, ax in ((vv.xl[k], vv.xu[k], v.x_target, "x"), (vv.yl[k], vv.yu[k], v.y_target, "y")):
                if self.mode == "l1":
                    gv = m.add_var(f"{tag}_g{ax}", 0.0, ext)
                    # g >= |centroid - target|
                    m.add_row({gv: 1.0, lo: -0.5, hi: -0.5}, GE, -tgt, f"{tag}_goal{ax}p")
                    m.add_row({gv: 1.0, lo: 0.5, hi: 0.5}, GE, tgt, f"{tag}_goal{ax}n")
                    m.add_objective(gv, w.goal)
                else:
                    # (centroid - target)^2 expanded
                    m.add_quadratic(lo, lo, 0.25 * w.goal)
                    m.add_quadratic(lo, hi, 0.5 * w.goal)
                    m.add_quadratic(hi, hi, 0.25 * w.goal)
                    m.add_objective(lo, -tgt * w.goal)
                    m.add_objective(hi, -tgt * w.goal)
                    m.obj_offset += w.goal * tgt * tgt
                m.add_objective(hi, -w.size)
                m.add_objective(lo, w.size)
            if vv.fixed_dt is None:
                m.add_objective(vv.dt[k], w.time)

    # -------------------------------------------------------------- blocks

    def pair(self, i: int, j: int) -> None:
        p, m = self.p, self.m
        a, b = self.vv[i], self.vv[j]
        M, Mt = self.M, self.Mt
        for mi in range(a.K):
            for nj in range(b.K):
                if self.prune and (
                    _time_disjoint(a.twin[mi], b.twin[nj]) or _separable(a.box[mi], b.box[nj], p.gamma_x, p.gamma_y)
                ):
                    m.meta["pruned_blocks"] += 1
                    continue
                tag = f"p{i}_{j}_m{mi + 1}_n{nj + 1}"
                bx1 = m.add_binary(f"{tag}_bx1", "pair_x_ij")
                bx2 = m.add_binary(f"{tag}_bx2", "pair_x_ji")
                by1 = m.add_binary(f"{tag}_by1", "pair_y_ij")
                by2 = m.add_binary(f"{tag}_by2", "pair_y_ji")
                wa, wb = a.twin[mi], b.twin[nj]
                if self.prune and wa[0] == wa[1] and wa[2] == wa[3] and wb[0] == wb[1] and wb[2] == wb[3]:
                    # both windows fixed and overlapping: only space can separate
                    m.add_row({a.xl[mi]: 1.0, b.xu[nj]: -1.0, bx1: M}, GE, p.gamma_x, f"{tag}_x1")
                    m.add_row({b.xl[nj]: 1.0, a.xu[mi]: -1.0, bx2: M}, GE, p.gamma_x, f"{tag}_x2")
                    m.add_row({a.yl[mi]: 1.0, b.yu[nj]: -1.0, by1: M}, GE, p.gamma_y, f"{tag}_y1")
                    m.add_row({b.yl[nj]: 1.0, a.yu[mi]: -1.0, by2: M}, GE, p.gamma_y, f"{tag}_y2")
                    m.add_row({bx1: 1.0, bx2: 1.0, by1: 1.0, by2: 1.0}, LE, 3.0, f"{tag}_sel")
                    m.meta["pair_blocks"].append((i, j, mi, nj, (bx1, bx2, by1, by2)))
                    continue
                bt = m.add_binary(f"{tag}_bt", "pair_t")
                bo = m.add_binary(f"{tag}_bo", "pair_order")
                m.add_row({a.xl[mi]: 1.0, b.xu[nj]: -1.0, bx1: M, bt: M}, GE, p.gamma_x, f"{tag}_x1")
                m.add_row({b.xl[nj]: 1.0, a.xu[mi]: -1.0, bx2: M, bt: M}, GE, p.gamma_x, f"{tag}_x2")
                m.add_row({a.yl[mi]: 1.0, b.yu[nj]: -1.0, by1: M, bt: M}, GE, p.gamma_y, f"{tag}_y1")
                m.add_row({b.yl[nj]: 1.0, a.yu[mi]: -1.0, by2: M, bt: M}, GE, p.gamma_y, f"{tag}_y2")
                m.add_row({bx1: 1.0, bx2: 1.0, by1: 1.0, by2: 1.0, bt: -1.0}, LE, 3.0, f"{tag}_sel")
                # bt = 1: the time intervals are disjoint; bo = 0 puts i first
                m.add_row({a.tu[mi]: 1.0, b.tl[nj]: -1.0, bt: Mt, bo: -Mt}, LE, Mt, f"{tag}_t1")
                m.add_row({b.tu[nj]: 1.0, a.tl[mi]: -1.0, bt: Mt, bo: Mt}, LE, 2 * Mt, f"{tag}_t2")
                m.meta["pair_blocks"].append((i, j, mi, nj, (bx1, bx2, by1, by2, bt, bo)))

    def obstacle(self, oi: int, o: ObstacleCube) -> None:
        p, m = self.p, self.m
        box_o = (o.x_l, o.x_u, o.y_l, o.y_u)
        M = self.M
        for vid, a in self.vv.items():
            for k in range(a.K):
                if self.prune and _separable(a.box[k], box_o, p.gamma_x, p.gamma_y):
                    m.meta["pruned_blocks"] += 1
                    continue
                timed = not o.is_static
                if timed and self.prune:
                    win = a.twin[k]
                    if _time_disjoint(win, (o.t_l, o.t_l, o.t_u, o.t_u)):
                        m.meta["pruned_blocks"] += 1
                        continue
                    if win[0] == win[1] and win[2] == win[3]:
                        # fixed window that overlaps: only space can separate
                        timed = False
                tag = f"o{oi}_v{vid}_k{k + 1}"
                role = "hv" if not o.is_static else "obs"
                b1 = m.add_binary(f"{tag}_bx1", f"{role}_x_io")
                b2 = m.add_binary(f"{tag}_bx2", f"{role}_x_oi")
                b3 = m.add_binary(f"{tag}_by1", f"{role}_y_io")
                b4 = m.add_binary(f"{tag}_by2", f"{role}_y_oi")
                if not timed:
                    m.add_row({a.xl[k]: 1.0, b1: M}, GE, o.x_u + p.gamma_x, f"{tag}_x1")
                    m.add_row({a.xu[k]: -1.0, b2: M}, GE, p.gamma_x - o.x_l, f"{tag}_x2")
                    m.add_row({a.yl[k]: 1.0, b3: M}, GE, o.y_u + p.gamma_y, f"{tag}_y1")
                    m.add_row({a.yu[k]: -1.0, b4: M}, GE, p.gamma_y - o.y_l, f"{tag}_y2")
                    m.add_row({b1: 1.0, b2: 1.0, b3: 1.0, b4: 1.0}, LE, 3.0, f"{tag}_sel")
                    m.meta["obstacle_blocks"].append((oi, vid, k, (b1, b2, b3, b4)))
                    continue
                bt = m.add_binary(f"{tag}_bt", "hv_t")
                bo = m.add_binary(f"{tag}_bo", "hv_order")
                Mt = self.Mt + o.t_u
                m.add_row({a.xl[k]: 1.0, b1: M, bt: M}, GE, o.x_u + p.gamma_x, f"{tag}_x1")
                m.add_row({a.xu[k]: -1.0, b2: M, bt: M}, GE, p.gamma_x - o.x_l, f"{tag}_x2")
                m.add_row({a.yl[k]: 1.0, b3: M, bt: M}, GE, o.y_u + p.gamma_y, f"{tag}_y1")
                m.add_row({a.yu[k]: -1.0, b4: M, bt: M}, GE, p.gamma_y - o.y_l, f"{tag}_y2")
                m.add_row({b1: 1.0, b2: 1.0, b3: 1.0, b4: 1.0, bt: -1.0}, LE, 3.0, f"{tag}_sel")
                # bt = 1: cube before (bo = 0) or after (bo = 1) the occupancy
                m.add_row({a.tu[k]: 1.0, bt: Mt, bo: -Mt}, LE, Mt + o.t_l, f"{tag}_t1")
                m.add_row({a.tl[k]: -1.0, bt: Mt, bo: Mt}, LE, 2 * Mt - o.t_u, f"{tag}_t2")
                m.meta["obstacle_blocks"].append((oi, vid, k, (b1, b2, b3, b4, bt, bo)))

    def build(self) -> MipModel:
        for v in self.s.vehicles:
            self.vehicle(v)
        ids = [v.id for v in self.s.vehicles]
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                self.pair(ids[a], ids[b])
                if self.symmetric:
                    self.pair(ids[b], ids[a])
        for oi, o in enumerate(self.s.obstacles):
            self.obstacle(oi, o)
        return self.m


def _resolve_k(s: Scenario, K: int | Mapping[int, int] | None) -> dict[int, int]:
    if K is None:
        return {v.id: default_k(v, s.params) for v in s.vehicles}
    if isinstance(K, Mapping):
        missing = [v.id for v in s.vehicles if v.id not in K]
        if missing:
            raise CorridorError(f"no cube count for vehicle {missing[0]}")
        return {v.id: int(K[v.id]) for v in s.vehicles}
    return {v.id: int(K) for v in s.vehicles}


def build_model(
    s: Scenario,
    K: int | Mapping[int, int] | None = None,
    weights: Weights | None = None,
    objective_mode: str = "l1",
    envelope: bool = False,
    prune: bool = True,
    symmetric_pairs: bool = False,
    fixed_dt: float | Mapping[int, float] | None = None,
    waypoints: Mapping[int, Sequence[tuple[float, float]]] | None = None,
    name: str = "vstc",
) -> MipModel:
    """Shared builder behind the variable and fixed time-step models.

    ``fixed_dt`` (one value or per vehicle) pins every cube duration of
    the named vehicles; their duration cost is then constant and left out,
    and reachability needs no product linearization.  ``waypoints`` require
    cube k of each vehicle to contain its k-th waypoint.
    """
    Ks = _resolve_k(s, K)
    b = _Builder(
        s, Ks, weights or Weights(), objective_mode, envelope, prune, symmetric_pairs, fixed_dt, waypoints, name
    )
    return b.build()


def build_vstc_model(
    s: Scenario,
    K: int | Mapping[int, int] | None = None,
    weights: Weights | None = None,
    objective_mode: str = "l1",
    envelope: bool = False,
    prune: bool = True,
    symmetric_pairs: bool = False,
) -> MipModel:
    """Build the variable-time-step corridor MIP for scenario ``s``.

    ``K`` is a common cube count or a per-vehicle mapping (default
    :func:`default_k`).  ``envelope`` adds rows tying each cube's extent
    along the route to the distance the vehicle can cover by then; the
    planning pipeline enables them, the bare model does not.  ``prune``
    skips pair and obstacle blocks whose cubes are kept apart by implied
    bounds or cannot share time.  ``symmetric_pairs`` builds each vehicle
    pair in both orders (used to test the i < j reduction).
    """
    return build_model(s, K, weights, objective_mode, envelope, prune, symmetric_pairs)


# --------------------------------------------------------------------- solutions


def extract_corridors(model: MipModel, x) -> list[Corridor]:
    """Read one corridor per vehicle from solution values.

    ``x`` is a value vector or any object with an ``x`` attribute (such as
    a MipSolution); binaries are ignored.
    """
    status = getattr(x, "status", None)
    values = getattr(x, "x", x)
    if values is None:
        raise CorridorError(f"no solution to extract corridors from (status {status})")
    vals = np.asarray(values, dtype=float)
    out = []
    for vid, vs in model.meta["vehicles"].items():
        cubes = tuple(
            Cube(
                float(vals[vs["xl"][k]]), float(vals[vs["xu"][k]]), float(vals[vs["yl"][k]]),
                float(vals[vs["yu"][k]]), float(vals[vs["tl"][k]]), float(vals[vs["tu"][k]]),
            )
            for k in range(len(vs["xl"]))
        )
        out.append(Corridor(int(vid), cubes))
    return out


def _best_option(slacks: Sequence[float]) -> int:
    """Index of the largest slack; ties go to the first."""
    best, arg = -math.inf, 0
    for idx, slack in enumerate(slacks):
        if slack > best + 1e-12:
            best, arg = slack, idx
    return arg


def _set_block(y: np.ndarray, bins: tuple[int, ...], choice: int) -> None:
    if choice < 4:
        for c, bidx in enumerate(bins[:4]):
            y[bidx] = 0.0 if c == choice else 1.0
        if len(bins) == 6:
            y[bins[4]] = 0.0
            y[bins[5]] = 0.0
    else:
        for bidx in bins[:4]:
            y[bidx] = 1.0
        y[bins[4]] = 1.0
        y[bins[5]] = 0.0 if choice == 4 else 1.0


def _reach_violation(x, lo, hi, k: int, dt: float, d: float, vmin: float, vmax: float) -> float:
    c = 0.5 * (x[lo[k]] + x[hi[k]])
    z = d * dt
    r1 = x[lo[k + 1]] - c - (vmin + vmax) * z + vmax * dt  # must be <= 0
    r2 = x[hi[k + 1]] - c - (vmin + vmax) * z + vmin * dt  # must be >= 0
    return max(r1, 0.0) + max(-r2, 0.0)


def geometric_rounding(model: MipModel, x: np.ndarray) -> np.ndarray:
    """Set every binary from the geometry in ``x``.

    Each separation block takes the option with the most slack: spatial
    gap minus the safe distance, or time gap converted to meters at v_max.
    Continuity binaries take the direction that violates reachability
    least, falling back to the direction between consecutive centroids.
    Continuous entries are copied unchanged.
    """
    meta = model.meta
    y = np.array(x, dtype=float)
    gx, gy, _ = meta["gamma"]
    vmin, vmax = meta["v_range"]
    vehicles = meta["vehicles"]
    for vid, vs in vehicles.items():
        for k in range(len(vs["dx"])):
            dt = x[vs["dt"][k]]
            for lo, hi, d in ((vs["xl"], vs["xu"], vs["dx"]), (vs["yl"], vs["yu"], vs["dy"])):
                v0 = _reach_violation(x, lo, hi, k, dt, 0.0, vmin, vmax)
                v1 = _reach_violation(x, lo, hi, k, dt, 1.0, vmin, vmax)
                if abs(v0 - v1) > 1e-9:
                    y[d[k]] = 1.0 if v1 < v0 else 0.0
                else:
                    c0 = 0.5 * (x[lo[k]] + x[hi[k]])
                    c1 = 0.5 * (x[lo[k + 1]] + x[hi[k + 1]])
                    y[d[k]] = 1.0 if c0 <= c1 else 0.0
    for i, j, mi, nj, bins in meta["pair_blocks"]:
        a, b = vehicles[i], vehicles[j]
        slacks = [
            x[a["xl"][mi]] - x[b["xu"][nj]] - gx,
            x[b["xl"][nj]] - x[a["xu"][mi]] - gx,
            x[a["yl"][mi]] - x[b["yu"][nj]] - gy,
            x[b["yl"][nj]] - x[a["yu"][mi]] - gy,
            vmax * (x[b["tl"][nj]] - x[a["tu"][mi]]),
            vmax * (x[a["tl"][mi]] - x[b["tu"][nj]]),
        ][: len(bins)]
        _set_block(y, bins, _best_option(slacks))
    for oi, vid, k, bins in meta["obstacle_blocks"]:
        a = vehicles[vid]
        o = meta["obstacles"][oi]
        slacks = [
            x[a["xl"][k]] - o[1] - gx,
            o[0] - x[a["xu"][k]] - gx,
            x[a["yl"][k]] - o[3] - gy,
            o[2] - x[a["yu"][k]] - gy,
        ]
        if len(bins) == 6:
            slacks += [vmax * (o[4] - x[a["tu"][k]]), vmax * (x[a["tl"][k]] - o[5])]
        _set_block(y, bins, _best_option(slacks))
    return y


def assignment_from_corridors(
    model: MipModel,
    corridors: Sequence[Corridor],
    continuity: Mapping[int, tuple[Sequence[float], Sequence[float]]] | None = None,
) -> np.ndarray:
    """Full variable vector placing the given cubes, binaries read from geometry.

    ``continuity`` optionally supplies the (x, y) direction binaries per
    vehicle, overriding the geometric choice.  Auxiliary variables stay at
    their lower bounds; re-solve the continuous part with the binaries
    fixed to get a feasible point.
    """
    x = np.array(model.lb, dtype=float)
    x = np.where(np.isfinite(x), x, 0.0)
    by_id = {c.vehicle_id: c for c in corridors}
    for vid, vs in model.meta["vehicles"].items():
        c = by_id[vid]
        if len(c.cubes) != len(vs["xl"]):
            raise CorridorError(f"vehicle {vid}: corridor has {len(c.cubes)} cubes, model {len(vs['xl'])}")
        for k, cube in enumerate(c.cubes):
            x[vs["xl"][k]], x[vs["xu"][k]] = cube.x_l, cube.x_u
            x[vs["yl"][k]], x[vs["yu"][k]] = cube.y_l, cube.y_u
            x[vs["tl"][k]], x[vs["tu"][k]] = cube.t_l, cube.t_u
            x[vs["dt"][k]] = cube.dt
    y = geometric_rounding(model, x)
    if continuity:
        for vid, (dx, dy) in continuity.items():
            vs = model.meta["vehicles"][vid]
            y[vs["dx"]] = np.asarray(dx, dtype=float)
            y[vs["dy"]] = np.asarray(dy, dtype=float)
    return y
