"""Embedded LP / MILP solvers and the external-solver bridge."""

from .bnb import BnbConfig, MipSolution, solve_mip
from .lp import EQ, GE, LE, LpProblem, LpSolution, Simplex, drop_redundant_rows, solve_lp
from .oracle import enumerate_oracle

__all__ = [
    "EQ",
    "GE",
    "LE",
    "BnbConfig",
    "LpProblem",
    "LpSolution",
    "MipSolution",
    "Simplex",
    "enumerate_oracle",
    "drop_redundant_rows",
    "solve_lp",
    "solve_mip",
]
