"""External MIP solver bridge.

The external program is invoked as::

    <solver> MODEL.lp SOLUTION.txt [--time-limit SECONDS] [--gap GAP]

It must read the CPLEX LP file and write a plain-text solution file:
optional header lines ``# status <word>``, ``# objective <float>`` and
``# gap <float>``, followed by one ``<variable name> <value>`` line per
variable.  Status words are ``optimal``, ``feasible``, ``infeasible``,
``time-limit`` or ``node-limit``.  A non-zero exit code is a failure.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..model import MipModel, format_lp
from .bnb import MipSolution

__all__ = ["ENV_VAR", "BackendError", "ExternalBackend", "parse_solution", "from_environment"]

ENV_VAR = "VSTC_EXTERNAL_SOLVER"

_STATUS = {
    "optimal": "optimal",
    "feasible": "feasible-incumbent",
    "feasible-incumbent": "feasible-incumbent",
    "infeasible": "infeasible",
    "time-limit": "time-limit",
    "node-limit": "node-limit",
}


class BackendError(RuntimeError):
    pass


def parse_solution(text: str, names: list[str]) -> MipSolution:
    """Parse a solution file; every name in ``names`` must be present unless infeasible."""
    status, objective, gap = "optimal", math.nan, math.nan
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) != 2:
                raise BackendError(f"solution line {lineno}: malformed header {raw!r}")
            key, val = parts
            if key == "status":
                if val not in _STATUS:
                    raise BackendError(f"solution line {lineno}: unknown status {val!r}")
                status = _STATUS[val]
            elif key == "objective":
                objective = float(val)
            elif key == "gap":
                gap = float(val)
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BackendError(f"solution line {lineno}: expected 'name value', got {raw!r}")
        values[parts[0]] = float(parts[1])
    if status == "infeasible" or (not values and status in ("time-limit", "node-limit")):
        return MipSolution(status=status, message="external solver")
    missing = [n for n in names if n not in values]
    if missing:
        raise BackendError(f"solution file lacks {len(missing)} variables, first {missing[0]!r}")
    x = np.array([values[n] for n in names])
    return MipSolution(status=status, x=x, objective=objective, gap=gap if math.isfinite(gap) else 0.0,
                       message="external solver")


@dataclass(frozen=True)
class ExternalBackend:
    command: str
    time_limit: float | None = None
    gap: float | None = None

    def argv(self, lp_path: Path, sol_path: Path) -> list[str]:
        args = shlex.split(self.command) + [str(lp_path), str(sol_path)]
        if self.time_limit is not None:
            args += ["--time-limit", repr(float(self.time_limit))]
        if self.gap is not None:
            args += ["--gap", repr(float(self.gap))]
        return args

    def solve(self, model: MipModel) -> MipSolution:
        with tempfile.TemporaryDirectory(prefix="vstc-ext-") as tmp:
            lp_path = Path(tmp) / "model.lp"
            sol_path = Path(tmp) / "solution.txt"
            lp_path.write_text(format_lp(model))
            try:
                proc = subprocess.run(self.argv(lp_path, sol_path), capture_output=True, text=True)
            except OSError as exc:
                raise BackendError(f"cannot run external solver: {exc}") from exc
            if proc.returncode != 0:
                raise BackendError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
            if not sol_path.exists():
                raise BackendError("external solver wrote no solution file")
            sol = parse_solution(sol_path.read_text(), model.var_names)
        if sol.x is not None:
            bins = model.binary_indices
            sol.x[bins] = np.round(sol.x[bins])
            sol.objective = model.objective_value(sol.x)
        return sol


def from_environment(time_limit: float | None = None, gap: float | None = None) -> ExternalBackend | None:
    cmd = os.environ.get(ENV_VAR)
    if not cmd:
        return None
    return ExternalBackend(cmd, time_limit=time_limit, gap=gap)
