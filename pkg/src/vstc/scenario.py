"""Planning-problem data model, scenario files and the built-in benchmarks.

Scenario files are YAML or JSON documents with the top-level keys
``params``, ``vehicles``, ``obstacles``, ``world`` and ``waypoints``.
All quantities are SI: meters, seconds, radians.

Example::

    params: {v_max: 20.0, t_max: 1.0}
    world: {x: [-50, 50], y: [-45, 45]}
    vehicles:
      - {id: 1, initial: [-45, -2], target: [25, -2], v_initial: 10.0}
    obstacles:
      - {x: [-30, -20], y: [-24, -16]}            # static
      - {x: [38, 44], y: [0.8, 3.2], t: [0, 1]}   # timed occupancy
    waypoints:
      1: [[-45, -2], [-35, -2], [25, -2]]

``gamma_r`` is never read from a file; it is always derived from the
vehicle length and width.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from .validation import ValidationReport

__all__ = [
    "ObstacleCube",
    "PlannerParams",
    "Scenario",
    "ScenarioError",
    "ScenarioParseError",
    "ScenarioValidationError",
    "VehicleSpec",
    "builtin_scenario",
    "dump_scenario",
    "load_scenario",
    "scenario_to_dict",
    "scenario_from_dict",
    "validate_scenario",
    "BUILTIN_IDS",
    "ROAD_SHOULDER",
    "LANE_WIDTH",
]

LANE_WIDTH = 4.0
# Extra drivable width beyond the outermost lane edge.  Corridor cubes are
# at least gamma_r = 4.47 m wide, wider than a 4 m lane, so four vehicles
# abreast on the four-lane road need 4 * gamma_r + 3 * gamma_x = 18.19 m
# against 16 m of lanes.  1.5 m on each side leaves some slack.
ROAD_SHOULDER = 1.5


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The file could not be read or is not a well-formed document."""


class ScenarioValidationError(ScenarioError):
    """A field has a wrong type or violates an invariant.

    ``path`` names the offending field, e.g. ``vehicles[0].v_initial``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class VehicleSpec:
    id: int
    x_initial: float
    y_initial: float
    x_target: float
    y_target: float
    v_initial: float
    psi_initial: float

    @property
    def initial(self) -> tuple[float, float]:
        return (self.x_initial, self.y_initial)

    @property
    def target(self) -> tuple[float, float]:
        return (self.x_target, self.y_target)

    @property
    def route_length(self) -> float:
        return math.hypot(self.x_target - self.x_initial, self.y_target - self.y_initial)


@dataclass(frozen=True)
class ObstacleCube:
    """Axis-aligned obstacle; ``t_l``/``t_u`` unset means present at all times."""

    x_l: float
    x_u: float
    y_l: float
    y_u: float
    t_l: float | None = None
    t_u: float | None = None

    @property
    def is_static(self) -> bool:
        return self.t_l is None


@dataclass(frozen=True)
class PlannerParams:
    gamma_x: float = 0.1
    gamma_y: float = 0.1
    v_min: float = 0.0
    v_max: float = 20.0
    a_min: float = 0.0
    a_max: float = 4.0
    phi_min: float = -math.pi / 3
    phi_max: float = math.pi / 3
    t_min: float = 0.1
    t_max: float = 1.0
    l: float = 4.0
    w: float = 2.0
    L_w: float = 2.8

    @property
    def gamma_r(self) -> float:
        return math.hypot(self.l, self.w)


@dataclass(frozen=True)
class Scenario:
    vehicles: tuple[VehicleSpec, ...]
    obstacles: tuple[ObstacleCube, ...] = ()
    x_min: float = -100.0
    x_max: float = 100.0
    y_min: float = -100.0
    y_max: float = 100.0
    params: PlannerParams = field(default_factory=PlannerParams)
    waypoints: Mapping[int, tuple[tuple[float, float], ...]] | None = None
    name: str = "custom"

    def vehicle(self, vid: int) -> VehicleSpec:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)

    @property
    def world_extent(self) -> float:
        return max(self.x_max - self.x_min, self.y_max - self.y_min)

    def with_params(self, **changes: float) -> "Scenario":
        return replace(self, params=replace(self.params, **changes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    def __hash__(self) -> int:
        return hash(json.dumps(scenario_to_dict(self), sort_keys=True))


# ---------------------------------------------------------------- headings


def default_heading(initial: tuple[float, float], target: tuple[float, float], snap: bool) -> float:
    """Heading of the initial->target vector, optionally snapped to a multiple of pi/2."""
    ang = math.atan2(target[1] - initial[1], target[0] - initial[0])
    if snap:
        ang = (math.pi / 2) * round(ang / (math.pi / 2))
        # keep the representation in (-pi, pi]
        if ang <= -math.pi:
            ang += 2 * math.pi
    return ang


# ---------------------------------------------------------------- validation


def validate_scenario(s: Scenario) -> ValidationReport:
    """Collect every invariant violation of ``s``; never raises."""
    problems: list[str] = []
    entities: list[str] = []
    p = s.params

    if not s.x_min < s.x_max:
        problems.append("world: empty x-extent")
        entities.append("world")
    if not s.y_min < s.y_max:
        problems.append("world: empty y-extent")
        entities.append("world")

    if not p.t_min < p.t_max:
        problems.append("params: t_min must be < t_max")
        entities.append("params")
    if not p.v_min < p.v_max:
        problems.append("params: v_min must be < v_max")
        entities.append("params")
    if not p.a_min <= p.a_max:
        problems.append("params: a_min must be <= a_max")
        entities.append("params")
    if not p.phi_min < p.phi_max:
        problems.append("params: phi_min must be < phi_max")
        entities.append("params")
    if p.t_min <= 0:
        problems.append("params: t_min must be positive")
        entities.append("params")
    for name in ("gamma_x", "gamma_y"):
        if getattr(p, name) < 0:
            problems.append(f"params: {name} must be non-negative")
            entities.append("params")
    for name in ("l", "w", "L_w"):
        if getattr(p, name) <= 0:
            problems.append(f"params: {name} must be positive")
            entities.append("params")

    seen: set[int] = set()
    for v in s.vehicles:
        tag = f"vehicle {v.id}"
        if v.id in seen:
            problems.append(f"{tag}: duplicate id")
            entities.append(tag)
        seen.add(v.id)
        if v.initial == v.target:
            problems.append(f"{tag}: initial position equals target")
            entities.append(tag)
        if not (p.v_min <= v.v_initial <= p.v_max):
            problems.append(f"{tag}: v_initial {v.v_initial} outside [{p.v_min}, {p.v_max}]")
            entities.append(tag)
        for label, (x, y) in (("initial", v.initial), ("target", v.target)):
            if not (s.x_min <= x <= s.x_max and s.y_min <= y <= s.y_max):
                problems.append(f"{tag}: {label} position outside world bounds")
                entities.append(tag)

    for k, o in enumerate(s.obstacles):
        tag = f"obstacle {k}"
        if not o.x_l < o.x_u:
            problems.append(f"{tag}: empty x-extent")
            entities.append(tag)
        if not o.y_l < o.y_u:
            problems.append(f"{tag}: empty y-extent")
            entities.append(tag)
        if (o.t_l is None) != (o.t_u is None):
            problems.append(f"{tag}: time interval needs both ends")
            entities.append(tag)
        elif o.t_l is not None and not o.t_l < o.t_u:
            problems.append(f"{tag}: empty t-extent")
            entities.append(tag)

    if s.waypoints:
        for vid, pts in s.waypoints.items():
            if vid not in seen:
                problems.append(f"waypoints {vid}: unknown vehicle id")
                entities.append(f"waypoints {vid}")
            if len(pts) < 2:
                problems.append(f"waypoints {vid}: need at least two points")
                entities.append(f"waypoints {vid}")

    return ValidationReport(
        check="scenario",
        passed=not problems,
        margin=0.0 if not problems else -math.inf,
        entities=tuple(entities),
        messages=tuple(problems),
    )


# ---------------------------------------------------------------- (de)serialization


_PARAM_NAMES = tuple(f.name for f in fields(PlannerParams))


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    params = {n: getattr(s.params, n) for n in _PARAM_NAMES}
    out: dict[str, Any] = {
        "name": s.name,
        "params": params,
        "world": {"x": [s.x_min, s.x_max], "y": [s.y_min, s.y_max]},
        "vehicles": [
            {
                "id": v.id,
                "initial": [v.x_initial, v.y_initial],
                "target": [v.x_target, v.y_target],
                "v_initial": v.v_initial,
                "psi_initial": v.psi_initial,
            }
            for v in s.vehicles
        ],
        "obstacles": [],
    }
    for o in s.obstacles:
        d: dict[str, Any] = {"x": [o.x_l, o.x_u], "y": [o.y_l, o.y_u]}
        if o.t_l is not None:
            d["t"] = [o.t_l, o.t_u]
        out["obstacles"].append(d)
    if s.waypoints:
        out["waypoints"] = {
            int(k): [[float(x), float(y)] for x, y in pts] for k, pts in sorted(s.waypoints.items())
        }
    return out


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioValidationError(path, "must be finite")
    return float(value)


def _pair(value: Any, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioValidationError(path, f"expected a pair [a, b], got {value!r}")
    return (_num(value[0], f"{path}[0]"), _num(value[1], f"{path}[1]"))


def _mapping(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ScenarioValidationError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def scenario_from_dict(doc: Mapping[str, Any], snap_headings: bool = False) -> Scenario:
    """Build and validate a Scenario from a parsed document.

    Omitted parameters take the PlannerParams defaults.  Raises
    ScenarioValidationError naming the first bad field.
    """
    doc = _mapping(doc, "<root>")
    unknown = set(doc) - {"name", "params", "world", "vehicles", "obstacles", "waypoints"}
    if unknown:
        raise ScenarioValidationError(sorted(unknown)[0], "unknown top-level key")

    raw_params = dict(_mapping(doc.get("params", {}) or {}, "params"))
    raw_params.pop("gamma_r", None)  # always derived
    kwargs = {}
    for key, val in raw_params.items():
        if key not in _PARAM_NAMES:
            raise ScenarioValidationError(f"params.{key}", "unknown parameter")
        kwargs[key] = _num(val, f"params.{key}")
    params = PlannerParams(**kwargs)

    world = _mapping(doc.get("world", {}) or {}, "world")
    x_min, x_max = _pair(world.get("x", [-100.0, 100.0]), "world.x")
    y_min, y_max = _pair(world.get("y", [-100.0, 100.0]), "world.y")

    raw_vehicles = doc.get("vehicles")
    if not isinstance(raw_vehicles, list) or not raw_vehicles:
        raise ScenarioValidationError("vehicles", "expected a non-empty list")
    vehicles = []
    for k, rv in enumerate(raw_vehicles):
        path = f"vehicles[{k}]"
        rv = _mapping(rv, path)
        vid = rv.get("id", k + 1)
        if isinstance(vid, bool) or not isinstance(vid, int):
            raise ScenarioValidationError(f"{path}.id", "expected an integer")
        if "initial" not in rv or "target" not in rv:
            raise ScenarioValidationError(path, "initial and target are required")
        xi, yi = _pair(rv["initial"], f"{path}.initial")
        xt, yt = _pair(rv["target"], f"{path}.target")
        if (xi, yi) == (xt, yt):
            raise ScenarioValidationError(f"{path}.target", "target equals initial position")
        v0 = _num(rv.get("v_initial", 10.0), f"{path}.v_initial")
        if not params.v_min <= v0 <= params.v_max:
            raise ScenarioValidationError(
                f"{path}.v_initial", f"{v0} outside [{params.v_min}, {params.v_max}]"
            )
        if rv.get("psi_initial") is None:
            psi = default_heading((xi, yi), (xt, yt), snap_headings)
        else:
            psi = _num(rv["psi_initial"], f"{path}.psi_initial")
        vehicles.append(VehicleSpec(vid, xi, yi, xt, yt, v0, psi))

    obstacles = []
    for k, ro in enumerate(doc.get("obstacles", []) or []):
        path = f"obstacles[{k}]"
        ro = _mapping(ro, path)
        xl, xu = _pair(ro.get("x"), f"{path}.x")
        yl, yu = _pair(ro.get("y"), f"{path}.y")
        tl = tu = None
        if ro.get("t") is not None:
            tl, tu = _pair(ro["t"], f"{path}.t")
        obstacles.append(ObstacleCube(xl, xu, yl, yu, tl, tu))

    waypoints = None
    if doc.get("waypoints"):
        waypoints = {}
        for key, pts in _mapping(doc["waypoints"], "waypoints").items():
            try:
                vid = int(key)
            except (TypeError, ValueError):
                raise ScenarioValidationError(f"waypoints.{key}", "expected a vehicle id") from None
            if not isinstance(pts, list):
                raise ScenarioValidationError(f"waypoints.{key}", "expected a list of [x, y]")
            waypoints[vid] = tuple(_pair(p, f"waypoints.{key}[{n}]") for n, p in enumerate(pts))

    s = Scenario(
        vehicles=tuple(vehicles),
        obstacles=tuple(obstacles),
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        params=params,
        waypoints=waypoints,
        name=str(doc.get("name", "custom")),
    )
    report = validate_scenario(s)
    if not report.passed:
        first = report.messages[0]
        raise ScenarioValidationError(_message_path(first, s), first)
    return s


def _message_path(message: str, s: Scenario) -> str:
    head = message.split(":", 1)[0]
    if head.startswith("vehicle "):
        vid = int(head.split()[1])
        idx = next(k for k, v in enumerate(s.vehicles) if v.id == vid)
        return f"vehicles[{idx}]"
    if head.startswith("obstacle "):
        return f"obstacles[{head.split()[1]}]"
    return head


def load_scenario(path: str | Path) -> Scenario:
    """Read a YAML/JSON scenario file and return the validated Scenario."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: malformed document: {exc}") from exc
    if doc is None:
        raise ScenarioParseError(f"{path}: empty document")
    return scenario_from_dict(doc)


def dump_scenario(s: Scenario, path: str | Path) -> None:
    """Write ``s`` as JSON (a YAML subset, so load_scenario reads it back)."""
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- built-ins


def _vehicles(rows: Iterable[tuple[int, tuple[float, float], tuple[float, float]]], v0: float, snap: bool):
    return tuple(
        VehicleSpec(vid, ini[0], ini[1], tgt[0], tgt[1], v0, default_heading(ini, tgt, snap))
        for vid, ini, tgt in rows
    )


def _intersection() -> Scenario:
    # origin at the intersection center
    rows = [
        (1, (-45.0, -2.0), (25.0, -2.0)),
        (2, (-30.0, -6.0), (40.0, -6.0)),
        (3, (35.0, 2.0), (-35.0, 2.0)),
        (4, (45.0, 6.0), (-25.0, 6.0)),
        (5, (2.0, -30.0), (2.0, 40.0)),
        (6, (-2.0, 35.0), (-2.0, -35.0)),
    ]
    # Four-lane horizontal road (lanes at y = -6, -2, 2, 6) and two-lane
    # vertical road (lanes at x = -2, 2); the four corner blocks are the
    # road boundaries.
    x_min, x_max, y_min, y_max = -50.0, 50.0, -45.0, 45.0
    hy = 2 * LANE_WIDTH + ROAD_SHOULDER
    hx = LANE_WIDTH + ROAD_SHOULDER
    corners = (
        ObstacleCube(x_min, -hx, hy, y_max),
        ObstacleCube(hx, x_max, hy, y_max),
        ObstacleCube(x_min, -hx, y_min, -hy),
        ObstacleCube(hx, x_max, y_min, -hy),
    )
    return Scenario(
        vehicles=_vehicles(rows, 10.0, snap=True),
        obstacles=corners,
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        name="intersection",
    )


# Placeholder human-driven-vehicle occupancy for the lane-change scenario.
# NOT published data: the benchmark has three HVs whose occupancy is
# not given.  They fill the three empty lane slots of the leading group
# for the first second only.  Override via a scenario file.
LANE_CHANGE_HV_PLACEHOLDERS = (
    ObstacleCube(37.5, 42.5, 0.8, 3.2, 0.0, 1.0),
    ObstacleCube(37.5, 42.5, 8.8, 11.2, 0.0, 1.0),
    ObstacleCube(37.5, 42.5, 12.8, 15.2, 0.0, 1.0),
)


def _lane_change() -> Scenario:
    # x longitudinal, lane centers at y = 2, 6, 10, 14.
    rows = [
        (1, (5.0, 2.0), (75.0, 6.0)),
        (2, (40.0, 6.0), (110.0, 10.0)),
        (3, (0.0, 10.0), (70.0, 6.0)),
        (4, (25.0, 14.0), (95.0, 10.0)),
    ]
    x_min, x_max, y_min, y_max = -10.0, 125.0, -5.0, 21.0
    lo = -ROAD_SHOULDER
    hi = 4 * LANE_WIDTH + ROAD_SHOULDER
    boundaries = (
        ObstacleCube(x_min, x_max, y_min, lo),
        ObstacleCube(x_min, x_max, hi, y_max),
    )
    return Scenario(
        vehicles=_vehicles(rows, 10.0, snap=True),
        obstacles=boundaries + LANE_CHANGE_HV_PLACEHOLDERS,
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        name="lane_change",
    )


def _unstructured() -> Scenario:
    rows = [
        (1, (-35.0, 30.0), (35.0, 10.0)),
        (2, (35.0, 30.0), (-35.0, 10.0)),
        (3, (-35.0, -30.0), (35.0, -10.0)),
        (4, (35.0, -30.0), (-35.0, -10.0)),
        (5, (-35.0, 5.0), (35.0, 0.0)),
        (6, (35.0, -5.0), (-35.0, 0.0)),
    ]
    centers = [(-25, -20), (17, -20), (18, 20), (-3, 0), (10, 1), (-2, 36), (-5, -30), (-17, 17)]
    sizes = [(10, 8), (6, 8), (6, 8), (8, 8), (6, 6), (6, 8), (6, 6), (8, 6)]
    obstacles = tuple(
        ObstacleCube(cx - lx / 2, cx + lx / 2, cy - ly / 2, cy + ly / 2)
        for (cx, cy), (lx, ly) in zip(centers, sizes)
    )
    return Scenario(
        vehicles=_vehicles(rows, 10.0, snap=False),
        obstacles=obstacles,
        x_min=-40.0,
        x_max=40.0,
        y_min=-40.0,
        y_max=40.0,
        name="unstructured",
    )


_BUILTINS = {
    "intersection": _intersection,
    "lane_change": _lane_change,
    "unstructured": _unstructured,
}
BUILTIN_IDS = tuple(_BUILTINS)


def builtin_scenario(name: str) -> Scenario:
    """Return one of the three benchmark scenarios by id."""
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ScenarioError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTIN_IDS)}") from None
