"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from vstc import _kernels_py as py

try:
    from vstc import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    m, count = 400, 60
    rows = rng.integers(0, m, count).astype(np.int64)
    W = rng.normal(size=(count, m))
    W[np.arange(count), rows] = rng.uniform(0.5, 2.0, count)
    v = rng.normal(size=m)
    T = 60
    s0 = np.array([0.0, 0.0, 0.0, 10.0, 0.0])
    u = np.column_stack([rng.normal(0, 1, T + 1), rng.uniform(-0.3, 0.3, T + 1)])
    box = np.tile([-5.0, 80.0, -3.0, 3.0], (T + 1, 1))
    limits = np.array([0.0, 4.0, 0.0, 20.0])
    lam = rng.uniform(0, 1, (T + 1, 8))
    mu = np.zeros(2)
    target = np.array([60.0, 0.0])
    grad = np.zeros((T + 1, 2))
    return {
        "eta_ftran": lambda k: k.eta_ftran(v.copy(), rows, W, count),
        "eta_btran": lambda k: k.eta_btran(v.copy(), rows, W, count),
        "rollout": lambda k: k.rollout(s0, u, 0.1, 2.7),
        "al_objective": lambda k: k.al_objective(u, s0, 0.1, 2.7, 1.0, 1.0, box, limits, target, lam, mu, 10.0, grad),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=args.repeat, repeat=3)) / args.repeat * 1e6
        if compiled is None:
            print(f"{name:<14}{t_py:>12.1f}{'n/a':>14}{'':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(compiled), number=args.repeat, repeat=3)) / args.repeat * 1e6
        print(f"{name:<14}{t_py:>12.1f}{t_c:>14.1f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
