"""Command-line entry point: ``vstc plan | compare | export``.

Exit status: 0 when every validation passes, 1 when a planning stage
finds no solution, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .corridor_model import CorridorError, Weights
from .mip_solver.backend import ENV_VAR, ExternalBackend, from_environment
from .pipeline import METHODS, PlanConfig, PlanResult, plan
from .scenario import BUILTIN_IDS, Scenario, ScenarioError, builtin_scenario, load_scenario
from .trajectory_opt import TRAJECTORY_COLUMNS, trajectory_to_csv
from .validation import duration_report, reports_to_csv, reports_to_json

__all__ = ["main", "build_parser", "cmd_plan", "cmd_compare", "cmd_export", "ConfigError"]

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2

CUBE_COLUMNS = ("x_l", "x_u", "y_l", "y_u", "t_l", "t_u")

log = logging.getLogger("vstc")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def _scenario(source: str) -> Scenario:
    if source in BUILTIN_IDS:
        return builtin_scenario(source)
    if not Path(source).exists():
        raise ConfigError(f"scenario: {source!r} is neither a built-in id ({', '.join(BUILTIN_IDS)}) nor a file")
    return load_scenario(source)


def _weights(text: str | None) -> tuple[Weights, float, float]:
    if text is None:
        return Weights(), 1.0, 1.0
    parts = text.split(",")
    if len(parts) != 5:
        raise ConfigError("weights: expected five comma-separated values wg,ws,wt,w1,w2")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"weights: not a number in {text!r}") from None
    if min(vals) <= 0:
        raise ConfigError("weights: all weights must be positive")
    return Weights(*vals[:3]), vals[3], vals[4]


def _backend(name: str, time_limit: float | None) -> ExternalBackend | None:
    if name == "embedded":
        return None
    if name == "external":
        b = from_environment(time_limit=time_limit)
        if b is None:
            raise ConfigError(f"backend: 'external' needs the {ENV_VAR} environment variable")
        return b
    # anything else is the solver command itself
    return ExternalBackend(name, time_limit=time_limit)


def _config(args: argparse.Namespace) -> PlanConfig:
    if args.k is not None and args.k < 1:
        raise ConfigError("k: must be a positive integer")
    if args.time_limit is not None and args.time_limit <= 0:
        raise ConfigError("time-limit: must be positive")
    if args.node_limit is not None and args.node_limit < 0:
        raise ConfigError("node-limit: must be non-negative")
    weights, w1, w2 = _weights(args.weights)
    return PlanConfig(
        K=args.k,
        weights=weights,
        w1=w1,
        w2=w2,
        backend=_backend(args.backend, args.time_limit),
        seed=args.seed,
        time_limit=args.time_limit,
        node_limit=2000 if args.node_limit is None else args.node_limit,
    )


# ---------------------------------------------------------------- artifacts


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def corridors_csv(result: PlanResult) -> str:
    kept = {c.vehicle_id: len(c.cubes) for c in result.pruned}
    rows = []
    for c in result.corridors:
        for k, q in enumerate(c.cubes):
            keep = int(k < kept.get(c.vehicle_id, len(c.cubes)))
            rows.append([c.vehicle_id, k + 1] + [repr(float(v)) for v in q.as_tuple()] + [keep])
    return _csv(rows, ("vehicle", "cube") + CUBE_COLUMNS + ("kept",))


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def _write_result(out: Path, result: PlanResult) -> None:
    tag = result.method
    if result.corridors:
        _write(out, f"{tag}_corridors.csv", corridors_csv(result))
    for traj in result.trajectories:
        _write(out, f"{tag}_trajectory_v{traj.vehicle_id}.csv", trajectory_to_csv(traj))
    if result.reports:
        _write(out, f"{tag}_validation.csv", reports_to_csv(result.reports))
        _write(out, f"{tag}_validation.json", reports_to_json(result.reports))


def _durations(results: Sequence[PlanResult]):
    return duration_report({r.method: (r.pruned if r.feasible else None) for r in results})


def _write_summary(out: Path, s: Scenario, cfg: PlanConfig, results: Sequence[PlanResult]) -> None:
    table = _durations(results)
    _write(out, "durations.csv", table.to_csv())
    _write(out, "durations.txt", table.format() + "\n")
    doc = {
        "scenario": s.name,
        "config": {
            "K": cfg.K, "weights": [cfg.weights.goal, cfg.weights.size, cfg.weights.time, cfg.w1, cfg.w2],
            "backend": "embedded" if cfg.backend is None else "external", "seed": cfg.seed,
            "time_limit": cfg.time_limit, "node_limit": cfg.node_limit,
        },
        "results": [r.summary() for r in results],
    }
    _write(out, "summary.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _report(result: PlanResult) -> None:
    if not result.feasible:
        print(f"{result.method}: infeasible ({result.message})", file=sys.stderr)
        return
    status = "pass" if result.passed else "FAIL"
    print(f"{result.method}: {status}; solver {result.solver_status}; {result.message}")
    for r in result.reports:
        if not r.passed:
            for msg in r.messages[:5]:
                print(f"  {r.check}: {msg}")


def _run_methods(args: argparse.Namespace, methods: Sequence[str]):
    s = _scenario(args.scenario)
    cfg = _config(args)
    np.random.seed(cfg.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"out: cannot create {out}: {exc}") from exc
    results = []
    for method in methods:
        r = plan(s, method, cfg)
        _report(r)
        _write_result(out, r)
        results.append(r)
    _write_summary(out, s, cfg, results)
    return s, cfg, out, results


def cmd_plan(args: argparse.Namespace) -> int:
    methods = METHODS if args.method == "both" else (args.method,)
    _, _, out, results = _run_methods(args, methods)
    print(_durations(results).format())
    if any(not r.feasible for r in results):
        return EXIT_INFEASIBLE
    return EXIT_OK if all(r.passed for r in results) else EXIT_INFEASIBLE


def comparison_rows(results: Sequence[PlanResult]) -> list[list[str]]:
    """Per vehicle: V-STC completion time, baseline maximum and their difference."""
    by = {r.method: r for r in results}
    vstc, base = by.get("vstc"), by.get("stc-baseline")
    base_max = max(c.horizon for c in base.pruned) if base is not None and base.feasible else None
    rows = []
    if vstc is None or not vstc.feasible:
        return [["all", "infeasible", f"{base_max:.2f}" if base_max is not None else "infeasible", "-"]]
    for c in sorted(vstc.pruned, key=lambda c: c.vehicle_id):
        if base_max is None:
            rows.append([f"AV{c.vehicle_id}", f"{c.horizon:.2f}", "infeasible", "-"])
        else:
            rows.append([f"AV{c.vehicle_id}", f"{c.horizon:.2f}", f"{base_max:.2f}", f"{c.horizon - base_max:+.2f}"])
    vmax = max(c.horizon for c in vstc.pruned)
    rows.append(["max", f"{vmax:.2f}", "infeasible" if base_max is None else f"{base_max:.2f}",
                 "-" if base_max is None else f"{vmax - base_max:+.2f}"])
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    _, _, out, results = _run_methods(args, METHODS)
    rows = comparison_rows(results)
    header = ("vehicle", "vstc", "stc-baseline max", "delta")
    _write(out, "comparison.csv", _csv(rows, header))
    widths = [max(len(str(r[c])) for r in [header] + rows) for c in range(4)]
    text = "\n".join("  ".join(str(cell).rjust(widths[c]) for c, cell in enumerate(r)) for r in [header] + rows)
    _write(out, "comparison.txt", text + "\n")
    print(text)
    if all(not r.feasible for r in results):
        return EXIT_INFEASIBLE
    # a method that failed to plan is reported, not fatal; validations of
    # the methods that did plan decide the status
    return EXIT_OK if all(r.passed for r in results if r.feasible) else EXIT_INFEASIBLE


def cmd_export(args: argparse.Namespace) -> int:
    run = Path(args.run)
    files = sorted(run.glob("*_corridors.csv"))
    if not files:
        raise ConfigError(f"run: no corridor files in {run}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in files:
        method = f.name[: -len("_corridors.csv")]
        with f.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        per: dict[int, list] = {}
        for row in rows:
            if args.all_cubes or row["kept"] == "1":
                per.setdefault(int(row["vehicle"]), []).append([row[c] for c in CUBE_COLUMNS])
        for vid, cubes in sorted(per.items()):
            _write(out, f"{method}_cubes_v{vid}.csv", _csv(cubes, CUBE_COLUMNS))
    for f in sorted(run.glob("*_trajectory_v*.csv")):
        with f.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        missing = [c for c in TRAJECTORY_COLUMNS if rows and c not in rows[0]]
        if missing:
            raise ConfigError(f"run: {f.name} lacks columns {missing}")
        _write(out, f.name, _csv([[r[c] for c in TRAJECTORY_COLUMNS] for r in rows], TRAJECTORY_COLUMNS))
    print(f"exported {len(files)} corridor file(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _planning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help=f"built-in id ({', '.join(BUILTIN_IDS)}) or scenario file")
    p.add_argument("--k", type=int, default=None, help="common cube count (default: searched per vehicle)")
    p.add_argument("--weights", default=None, help="wg,ws,wt,w1,w2")
    p.add_argument("--backend", default="embedded", help="embedded, external, or a solver command")
    p.add_argument("--out", default="vstc_out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None, help="corridor stage limit in seconds")
    p.add_argument("--node-limit", type=int, default=None, help="branch-and-bound node limit")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vstc", description="Spatio-temporal corridor planning for multiple vehicles")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="plan a scenario and validate the result")
    _planning_flags(p)
    p.add_argument("--method", choices=METHODS + ("both",), default="vstc")
    p.set_defaults(func=cmd_plan)
    c = sub.add_parser("compare", help="plan with both methods and compare durations")
    _planning_flags(c)
    c.set_defaults(func=cmd_compare)
    e = sub.add_parser("export", help="write plot-ready cube and trajectory tables from a run")
    e.add_argument("--run", required=True, help="output directory of a plan or compare run")
    e.add_argument("--out", required=True)
    e.add_argument("--all-cubes", action="store_true", help="include cubes removed by pruning")
    e.add_argument("-v", "--verbose", action="store_true")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is the config code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, CorridorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
