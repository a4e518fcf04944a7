"""Fixed-time-step, waypoint-anchored corridor baseline.

The baseline is the corridor model with two restrictions: every cube
lasts a fixed step (1 s by default) and cube k must contain waypoint k of
its vehicle.  Waypoints are spaced along the straight route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .corridor_model import CorridorError, Weights, build_model
from .model import MipModel
from .scenario import Scenario, VehicleSpec

__all__ = ["BaselineError", "WaypointPlan", "DEFAULT_SPACING", "DEFAULT_STEP", "generate_waypoints", "waypoint_plan", "build_stc_model"]

DEFAULT_SPACING = 10.0
DEFAULT_STEP = 1.0


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class WaypointPlan:
    waypoints: Mapping[int, tuple[tuple[float, float], ...]]
    dt_fixed: float = DEFAULT_STEP

    def __post_init__(self) -> None:
        if not self.dt_fixed > 0:
            raise BaselineError("fixed time step must be positive")
        for vid, pts in self.waypoints.items():
            if len(pts) < 1:
                raise BaselineError(f"vehicle {vid}: no waypoints")
            for a, b in zip(pts[:-1], pts[1:]):
                if math.hypot(b[0] - a[0], b[1] - a[1]) <= 0:
                    raise BaselineError(f"vehicle {vid}: repeated waypoint {tuple(a)}")

    def count(self, vid: int) -> int:
        return len(self.waypoints[vid])


def generate_waypoints(vehicle: VehicleSpec, spacing: float = DEFAULT_SPACING) -> list[tuple[float, float]]:
    """Points every ``spacing`` meters from initial to target, both included.

    The last regular point is dropped when it would coincide with the
    target, so the count is 1 + ceil(L / spacing).
    """
    if not spacing > 0:
        raise BaselineError("waypoint spacing must be positive")
    L = vehicle.route_length
    if L <= 0:
        raise BaselineError(f"vehicle {vehicle.id}: zero-length route")
    n = max(1, math.ceil(L / spacing - 1e-9))
    ux = (vehicle.x_target - vehicle.x_initial) / L
    uy = (vehicle.y_target - vehicle.y_initial) / L
    pts = [(vehicle.x_initial + ux * spacing * k, vehicle.y_initial + uy * spacing * k) for k in range(n)]
    pts.append(vehicle.target)
    return [(float(x), float(y)) for x, y in pts]


def waypoint_plan(s: Scenario, spacing: float = DEFAULT_SPACING, dt_fixed: float = DEFAULT_STEP) -> WaypointPlan:
    """Waypoints from the scenario's ``waypoints`` key, generated where absent."""
    given = dict(s.waypoints or {})
    out = {}
    for v in s.vehicles:
        if v.id in given:
            out[v.id] = tuple((float(x), float(y)) for x, y in given[v.id])
        else:
            out[v.id] = tuple(generate_waypoints(v, spacing))
    return WaypointPlan(out, dt_fixed)


def build_stc_model(
    s: Scenario,
    plan: WaypointPlan,
    weights: Weights | None = None,
    objective_mode: str = "l1",
    envelope: bool = False,
    prune: bool = True,
) -> MipModel:
    """Corridor MIP with one fixed-duration cube per waypoint.

    With durations constant the duration cost drops out and reachability
    is linear, so no product auxiliaries are created.
    """
    missing = [v.id for v in s.vehicles if v.id not in plan.waypoints]
    if missing:
        raise BaselineError(f"no waypoints for vehicle {missing[0]}")
    Ks = {v.id: plan.count(v.id) for v in s.vehicles}
    try:
        return build_model(
            s, Ks, weights or Weights(), objective_mode, envelope, prune,
            fixed_dt=plan.dt_fixed, waypoints=plan.waypoints, name="stc",
        )
    except CorridorError as exc:
        raise BaselineError(str(exc)) from exc


def waypoint_margins(corridor, waypoints, gamma_r: float) -> np.ndarray:
    """Inset slack of each cube around its waypoint (>= 0 means contained)."""
    h = 0.5 * gamma_r
    out = []
    for c, (x, y) in zip(corridor.cubes, waypoints):
        out.append(min(x - (c.x_l + h), (c.x_u - h) - x, y - (c.y_l + h), (c.y_u - h) - y))
    return np.array(out)
