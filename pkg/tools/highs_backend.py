#!/usr/bin/env python3
"""Reference external backend: solves an LP-format MILP with HiGHS via scipy.

Usage: highs_backend.py MODEL.lp SOLUTION.txt [--time-limit S] [--gap G]
Point VSTC_EXTERNAL_SOLVER at "python3 tools/highs_backend.py" to use it.
"""

import argparse
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from vstc.mip_solver.lp import EQ, GE, LE
from vstc.model import read_lp


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--gap", type=float, default=1e-4)
    args = ap.parse_args(argv)
    with open(args.model) as fh:
        m = read_lp(fh.read())
    if m.is_quadratic:
        print("quadratic objectives are not supported by this backend", file=sys.stderr)
        return 3
    p = m.to_lp_problem()
    lo = np.where(p.sense == GE, p.b, np.where(p.sense == EQ, p.b, -np.inf))
    hi = np.where(p.sense == LE, p.b, np.where(p.sense == EQ, p.b, np.inf))
    integrality = np.zeros(m.n_vars)
    integrality[p.binaries] = 1
    opts = {"mip_rel_gap": args.gap, "disp": False}
    if args.time_limit is not None:
        opts["time_limit"] = args.time_limit
    res = milp(p.c, constraints=[LinearConstraint(p.A, lo, hi)], integrality=integrality,
               bounds=Bounds(p.lb, p.ub), options=opts)
    with open(args.solution, "w") as out:
        if res.x is None:
            out.write("# status infeasible\n" if res.status == 2 else "# status time-limit\n")
            return 0
        status = "optimal" if res.status == 0 else "feasible"
        gap = getattr(res, "mip_gap", 0.0) or 0.0
        out.write(f"# status {status}\n# objective {float(res.fun + p.offset)!r}\n# gap {float(gap)!r}\n")
        for name, v in zip(m.var_names, res.x):
            out.write(f"{name} {float(v)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
