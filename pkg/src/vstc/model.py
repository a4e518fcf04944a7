"""Mixed-integer model container and LP-format text export / import.

A :class:`MipModel` is assembled incrementally by the corridor builders
(variables, rows, objective) and then frozen into an
:class:`~vstc.mip_solver.lp.LpProblem` for the embedded solver, or written in
the CPLEX LP text format for an external one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .mip_solver.lp import EQ, GE, LE, LpProblem

__all__ = ["MipModel", "ModelError", "read_lp", "write_lp", "format_lp"]

_SENSE_TEXT = {LE: "<=", GE: ">=", EQ: "="}
_TEXT_SENSE = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}


class ModelError(ValueError):
    pass


@dataclass
class MipModel:
    """Variables, linear rows and a linear (optionally convex quadratic) objective."""

    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    roles: list[str | None] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    row_cols: list[np.ndarray] = field(default_factory=list)
    row_vals: list[np.ndarray] = field(default_factory=list)
    row_sense: list[int] = field(default_factory=list)
    row_rhs: list[float] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=dict)
    quad: dict[tuple[int, int], float] = field(default_factory=dict)
    obj_offset: float = 0.0
    meta: dict = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    # ---------------------------------------------------------------- building

    def add_var(self, name: str, lb: float, ub: float, binary: bool = False, role: str | None = None) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        if binary and role is None:
            raise ModelError(f"binary {name!r} needs a role")
        if lb > ub:
            raise ModelError(f"variable {name!r}: lower bound {lb} above upper bound {ub}")
        idx = len(self.var_names)
        self._index[name] = idx
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        self.roles.append(role)
        return idx

    def add_binary(self, name: str, role: str) -> int:
        return self.add_var(name, 0.0, 1.0, binary=True, role=role)

    def add_row(self, terms: Mapping[int, float] | Iterable[tuple[int, float]], sense: int, rhs: float, name: str) -> int:
        """Append ``sum(coef * x[j]) (sense) rhs``; repeated columns are summed."""
        acc: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, a in items:
            acc[j] = acc.get(j, 0.0) + float(a)
        cols = np.array(sorted(j for j in acc if acc[j] != 0.0), dtype=np.int64)
        vals = np.array([acc[j] for j in cols], dtype=float)
        self.row_names.append(name)
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.row_sense.append(int(sense))
        self.row_rhs.append(float(rhs))
        return len(self.row_names) - 1

    def add_objective(self, j: int, coef: float) -> None:
        self.obj[j] = self.obj.get(j, 0.0) + float(coef)

    def add_quadratic(self, i: int, j: int, coef: float) -> None:
        """Add ``coef * x_i * x_j`` to the objective."""
        key = (min(i, j), max(i, j))
        self.quad[key] = self.quad.get(key, 0.0) + float(coef)

    def index(self, name: str) -> int:
        return self._index[name]

    # ---------------------------------------------------------------- queries

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def binary_indices(self) -> np.ndarray:
        return np.nonzero(np.asarray(self.binary, dtype=bool))[0].astype(np.int64)

    @property
    def n_binaries(self) -> int:
        return int(sum(self.binary))

    @property
    def is_quadratic(self) -> bool:
        return any(v != 0.0 for v in self.quad.values())

    def role_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for b, r in zip(self.binary, self.roles):
            if b:
                counts[r] = counts.get(r, 0) + 1
        return dict(sorted(counts.items()))

    def objective_value(self, x: np.ndarray) -> float:
        val = self.obj_offset + sum(c * x[j] for j, c in self.obj.items())
        val += sum(c * x[i] * x[j] for (i, j), c in self.quad.items())
        return float(val)

    def matrix(self) -> sp.csr_matrix:
        indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        for r, cols in enumerate(self.row_cols):
            indptr[r + 1] = indptr[r] + len(cols)
        cols = np.concatenate(self.row_cols) if self.row_cols else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(self.row_vals) if self.row_vals else np.zeros(0)
        return sp.csr_matrix((vals, cols, indptr), shape=(self.n_rows, self.n_vars))

    def to_lp_problem(self) -> LpProblem:
        """Freeze into an LpProblem; single-variable rows become bounds."""
        if self.is_quadratic:
            raise ModelError("quadratic objective: the embedded solver handles linear objectives only")
        lb = np.array(self.lb, dtype=float)
        ub = np.array(self.ub, dtype=float)
        keep = []
        for r in range(self.n_rows):
            cols, vals = self.row_cols[r], self.row_vals[r]
            sense, rhs = self.row_sense[r], self.row_rhs[r]
            if len(cols) == 0:
                ok = (sense == LE and rhs >= -1e-12) or (sense == GE and rhs <= 1e-12) or (sense == EQ and abs(rhs) <= 1e-12)
                if not ok:
                    # keep an unsatisfiable empty row so infeasibility is reported by the solver
                    keep.append(r)
                continue
            if len(cols) == 1:
                j, a = int(cols[0]), float(vals[0])
                bound = rhs / a
                if sense == EQ:
                    lb[j] = max(lb[j], bound)
                    ub[j] = min(ub[j], bound)
                elif (sense == LE) == (a > 0):
                    ub[j] = min(ub[j], bound)
                else:
                    lb[j] = max(lb[j], bound)
                continue
            keep.append(r)
        A = self.matrix()[keep] if keep else sp.csr_matrix((0, self.n_vars))
        c = np.zeros(self.n_vars)
        for j, v in self.obj.items():
            c[j] = v
        return LpProblem(
            c=c,
            A=A,
            sense=np.array([self.row_sense[r] for r in keep], dtype=np.int64),
            b=np.array([self.row_rhs[r] for r in keep], dtype=float),
            lb=lb,
            ub=ub,
            offset=self.obj_offset,
            binaries=self.binary_indices,
            var_names=list(self.var_names),
        )

    def values_by_name(self, x: np.ndarray) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.var_names, x)}


# -------------------------------------------------------------------- LP text format


def _fmt(v: float) -> str:
    return "%.17g" % v


def _linear_terms(pairs: Iterable[tuple[float, str]]) -> str:
    parts = []
    for k, (coef, name) in enumerate(pairs):
        sign = "-" if coef < 0 else "+"
        mag = _fmt(abs(coef))
        if k == 0:
            parts.append(f"{'-' if coef < 0 else ''}{mag} {name}")
        else:
            parts.append(f"{sign} {mag} {name}")
    return " ".join(parts) if parts else "0"


def _wrap(text: str, width: int = 200) -> list[str]:
    """Break a long expression at term boundaries (`` + ``/`` - ``)."""
    tokens = re.split(r"(?= [+-] )", text)
    lines, cur = [], ""
    for tok in tokens:
        if cur and len(cur) + len(tok) > width:
            lines.append(cur)
            cur = "   " + tok.lstrip()
        else:
            cur += tok
    lines.append(cur)
    return lines


def format_lp(m: MipModel) -> str:
    """Render ``m`` as CPLEX LP text.  Output is a pure function of the model."""
    names = m.var_names
    out = [f"\\ {m.name}", "Minimize"]
    lin = [(m.obj[j], names[j]) for j in sorted(m.obj) if m.obj[j] != 0.0]
    expr = _linear_terms(lin)
    if m.quad:
        q = []
        for (i, j) in sorted(m.quad):
            c = 2.0 * m.quad[(i, j)]
            if c == 0.0:
                continue
            term = f"{names[i]} ^ 2" if i == j else f"{names[i]} * {names[j]}"
            q.append(f"{'-' if c < 0 else '+'} {_fmt(abs(c))} {term}")
        if q:
            expr += " + [ " + " ".join(q).lstrip("+ ") + " ] / 2"
    if m.obj_offset != 0.0:
        expr += f" {'-' if m.obj_offset < 0 else '+'} {_fmt(abs(m.obj_offset))}"
    out.extend(_wrap(" obj: " + expr))
    out.append("Subject To")
    for r in range(m.n_rows):
        terms = [(float(a), names[int(j)]) for j, a in zip(m.row_cols[r], m.row_vals[r])]
        body = f" {m.row_names[r]}: {_linear_terms(terms)} {_SENSE_TEXT[m.row_sense[r]]} {_fmt(m.row_rhs[r])}"
        out.extend(_wrap(body))
    out.append("Bounds")
    # every variable is listed so a reader recovers the column order
    for j, n in enumerate(names):
        if m.lb[j] == m.ub[j]:
            out.append(f" {n} = {_fmt(m.lb[j])}")
        else:
            out.append(f" {_fmt(m.lb[j])} <= {n} <= {_fmt(m.ub[j])}")
    bins = [names[j] for j in range(m.n_vars) if m.binary[j]]
    if bins:
        out.append("Binaries")
        for k in range(0, len(bins), 8):
            out.append(" " + " ".join(bins[k : k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(m: MipModel, path: str | Path) -> None:
    Path(path).write_text(format_lp(m))


_SECTION = re.compile(
    r"^(minimize|minimum|min|maximize|maximum|max|subject to|such that|st|s\.t\.|bounds|bound|binaries|binary|bin|generals|general|end)$",
    re.IGNORECASE,
)
_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _parse_expr(tokens: list[str], m: MipModel, quad_ok: bool) -> tuple[dict[int, float], dict[tuple[int, int], float], float]:
    lin: dict[int, float] = {}
    quad: dict[tuple[int, int], float] = {}
    const = 0.0
    k = 0
    sign = 1.0
    coef: float | None = None
    in_quad = False
    while k < len(tokens):
        tok = tokens[k]
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            k += 1
            continue
        if tok == "[":
            if not quad_ok:
                raise ModelError("quadratic terms are only allowed in the objective")
            in_quad = True
            k += 1
            continue
        if tok == "]":
            in_quad = False
            k += 1
            if k + 1 < len(tokens) and tokens[k] == "/" and float(tokens[k + 1]) == 2.0:
                k += 2
                for key in list(quad):
                    quad[key] *= 0.5
            else:
                raise ModelError("quadratic block must be followed by '/ 2'")
            continue
        if _NUM.match(tok):
            coef = float(tok)
            k += 1
            # a number followed by a sign / end is a constant
            if k >= len(tokens) or tokens[k] in "+-]":
                if in_quad:
                    raise ModelError("constant inside quadratic block")
                const += sign * coef
                sign, coef = 1.0, None
            continue
        c = sign * (1.0 if coef is None else coef)
        j = _var(m, tok)
        if in_quad:
            if k + 2 < len(tokens) and tokens[k + 1] == "^" and tokens[k + 2] == "2":
                key = (j, j)
                k += 3
            elif k + 2 < len(tokens) and tokens[k + 1] == "*":
                j2 = _var(m, tokens[k + 2])
                key = (min(j, j2), max(j, j2))
                k += 3
            else:
                raise ModelError(f"malformed quadratic term near {tok!r}")
            quad[key] = quad.get(key, 0.0) + c
        else:
            lin[j] = lin.get(j, 0.0) + c
            k += 1
        sign, coef = 1.0, None
    return lin, quad, const


def _var(m: MipModel, name: str) -> int:
    if name not in m._index:
        m.add_var(name, 0.0, np.inf)
    return m._index[name]


def _tokenize(text: str) -> list[str]:
    return re.findall(r"<=|>=|=<|=>|[<>=\[\]^*/+-]|[^\s<>=\[\]^*/+-]+", text)


def read_lp(text: str, name: str = "model") -> MipModel:
    """Parse CPLEX LP text (the subset produced by :func:`format_lp`)."""
    m = MipModel(name=name)
    section = None
    stmts: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": [], "bin": []}
    cur: list[str] = []
    maximize = False

    def flush():
        if cur:
            key = {"obj": "obj", "st": "rows", "bounds": "bounds", "bin": "bin"}[section]
            stmts[key].append(" ".join(cur))
            cur.clear()

    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        sec = _SECTION.match(line)
        if sec:
            if section is not None:
                flush()
            word = line.lower()
            if word.startswith("max"):
                maximize = True
                section = "obj"
            elif word.startswith("min"):
                section = "obj"
            elif word in ("subject to", "such that", "st", "s.t."):
                section = "st"
            elif word.startswith("bound"):
                section = "bounds"
            elif word.startswith("bin"):
                section = "bin"
            elif word.startswith("general"):
                raise ModelError("general integer variables are not supported")
            else:
                section = None
            continue
        if section is None:
            raise ModelError(f"content outside any section: {line!r}")
        if section in ("obj", "st"):
            if re.match(r"^[A-Za-z_][^:\s]*\s*:", line) and cur:
                flush()
            cur.append(line)
        else:
            stmts["bounds" if section == "bounds" else "bin"].append(line)
    if section is not None:
        flush()

    # bounds first so columns follow the order they are listed in; variables
    # that only appear in rows keep the default bounds [0, inf)
    for st in stmts["bounds"]:
        toks = _tokenize(st)
        _apply_bound(m, toks)
    for st in stmts["bin"]:
        for n in st.split():
            j = _var(m, n)
            m.binary[j] = True
            m.roles[j] = m.roles[j] or "binary"
            m.lb[j] = max(m.lb[j], 0.0)
            m.ub[j] = min(m.ub[j], 1.0) if np.isfinite(m.ub[j]) else 1.0
    pending_rows = []
    obj_lin: dict[int, float] = {}
    obj_quad: dict[tuple[int, int], float] = {}
    obj_const = 0.0
    for st in stmts["obj"]:
        mlab = re.match(r"^([^\s:]+)\s*:(.*)$", st)
        body = mlab.group(2) if mlab else st
        obj_lin, obj_quad, obj_const = _parse_expr(_tokenize(body), m, quad_ok=True)
    for st in stmts["rows"]:
        mlab = re.match(r"^([^\s:]+)\s*:(.*)$", st)
        if not mlab:
            raise ModelError(f"unnamed constraint: {st!r}")
        rname, body = mlab.group(1), mlab.group(2)
        toks = _tokenize(body)
        idx = [i for i, t in enumerate(toks) if t in _TEXT_SENSE]
        if len(idx) != 1:
            raise ModelError(f"constraint {rname!r} must have exactly one relation")
        i = idx[0]
        lin, _, const = _parse_expr(toks[:i], m, quad_ok=False)
        rhs_lin, _, rhs_const = _parse_expr(toks[i + 1 :], m, quad_ok=False)
        if rhs_lin:
            raise ModelError(f"constraint {rname!r}: variables on the right-hand side")
        pending_rows.append((rname, lin, _TEXT_SENSE[toks[i]], rhs_const - const))
    for rname, lin, sense, rhs in pending_rows:
        m.add_row(lin, sense, rhs, rname)
    sgn = -1.0 if maximize else 1.0
    for j, c in obj_lin.items():
        m.add_objective(j, sgn * c)
    for (i, j), c in obj_quad.items():
        m.add_quadratic(i, j, sgn * c)
    m.obj_offset = sgn * obj_const

    return m


def _num_or_inf(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return np.inf
    if t in ("-inf", "-infinity"):
        return -np.inf
    return float(tok)


def _apply_bound(m: MipModel, toks: list[str]) -> None:
    # merge sign tokens into numbers
    merged: list[str] = []
    k = 0
    while k < len(toks):
        if toks[k] in "+-" and k + 1 < len(toks) and (_NUM.match(toks[k + 1]) or toks[k + 1].lower().startswith("inf")):
            merged.append(toks[k] + toks[k + 1])
            k += 2
        else:
            merged.append(toks[k])
            k += 1
    t = merged
    if len(t) == 2 and t[1].lower() == "free":
        j = _var(m, t[0])
        m.lb[j], m.ub[j] = -np.inf, np.inf
    elif len(t) == 5 and t[1] in _TEXT_SENSE and t[3] in _TEXT_SENSE:
        j = _var(m, t[2])
        m.lb[j], m.ub[j] = _num_or_inf(t[0]), _num_or_inf(t[4])
    elif len(t) == 3 and t[1] in _TEXT_SENSE:
        if _NUM.match(t[2]) or t[2].lower().lstrip("+-").startswith("inf"):
            j, val, sense = _var(m, t[0]), _num_or_inf(t[2]), _TEXT_SENSE[t[1]]
        else:
            j, val = _var(m, t[2]), _num_or_inf(t[0])
            sense = {LE: GE, GE: LE, EQ: EQ}[_TEXT_SENSE[t[1]]]
        if sense == EQ:
            m.lb[j] = m.ub[j] = val
        elif sense == LE:
            m.ub[j] = val
        else:
            m.lb[j] = val
    else:
        raise ModelError(f"malformed bound: {' '.join(toks)!r}")
