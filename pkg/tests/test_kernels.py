import numpy as np
import pytest

from vstc import _kernels_py as py

compiled = pytest.importorskip("vstc._kernels")


def eta_file(rng, m, count):
    rows = rng.integers(0, m, count).astype(np.int64)
    W = rng.normal(size=(count, m))
    W[np.arange(count), rows] = rng.uniform(0.5, 2.0, count) * rng.choice([-1, 1], count)
    return rows, W


@pytest.mark.parametrize("seed", range(5))
def test_eta_transforms_agree(seed):
    rng = np.random.default_rng(seed)
    m, count = 12, 7
    rows, W = eta_file(rng, m, count)
    for fn in ("eta_ftran", "eta_btran"):
        v = rng.normal(size=m)
        a, b = v.copy(), v.copy()
        getattr(py, fn)(a, rows, W, count)
        getattr(compiled, fn)(b, rows, W, count)
        assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_ftran_matches_dense_product():
    rng = np.random.default_rng(7)
    m, count = 6, 4
    rows, W = eta_file(rng, m, count)
    E = np.eye(m)
    for e in range(count):
        Ei = np.eye(m)
        r = rows[e]
        Ei[:, r] = -W[e] / W[e, r]
        Ei[r, r] = 1.0 / W[e, r]
        E = Ei @ E
    v = rng.normal(size=m)
    u = v.copy()
    py.eta_ftran(u, rows, W, count)
    assert np.allclose(u, E @ v, atol=1e-12)
    u = v.copy()
    py.eta_btran(u, rows, W, count)
    assert np.allclose(u, E.T @ v, atol=1e-12)


def test_rollout_and_objective_agree():
    rng = np.random.default_rng(3)
    T = 30
    s0 = np.array([1.0, -2.0, 0.3, 8.0, 0.5])
    u = np.column_stack([rng.normal(0, 1, T + 1), rng.uniform(-0.3, 0.3, T + 1)])
    assert np.allclose(py.rollout(s0, u, 0.1, 2.7), compiled.rollout(s0, u, 0.1, 2.7), rtol=0, atol=1e-12)
    box = np.tile([-5.0, 40.0, -6.0, 4.0], (T + 1, 1))
    limits = np.array([0.0, 4.0, 0.0, 20.0])
    lam = rng.uniform(0, 1, (T + 1, 8))
    mu = rng.normal(size=2)
    target = np.array([25.0, -1.0])
    ga, gb = np.zeros((T + 1, 2)), np.zeros((T + 1, 2))
    va = py.al_objective(u, s0, 0.1, 2.7, 1.0, 2.0, box, limits, target, lam, mu, 10.0, ga)
    vb = compiled.al_objective(u, s0, 0.1, 2.7, 1.0, 2.0, box, limits, target, lam, mu, 10.0, gb)
    assert va == pytest.approx(vb, rel=1e-12)
    assert np.allclose(ga, gb, rtol=1e-10, atol=1e-10)
