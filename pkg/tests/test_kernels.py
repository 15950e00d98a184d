import os
import subprocess
import sys

import numpy as np
import pytest

from spdelab import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")
IMPLS = [_kernels.numpy_impl] + ([_kernels.numba_impl] if _kernels.numba_impl is not None else [])


def _brute_pair_scan(P, w, base, b, V, level):
    best = (-1.0, -1, -1)
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            if V[i] + V[j] <= level:
                val = np.sum(w * np.abs(P[i] - P[j])) / (base + b[i] + b[j])
                if val > best[0]:
                    best = (val, i, j)
    return best


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: "numba" if m is _kernels.numba_impl else "numpy")
@pytest.mark.parametrize("seed", range(4))
def test_pair_scan_against_brute_force(impl, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    P = rng.dirichlet(np.ones(n), size=n)
    w, b, V = 1 + rng.exponential(size=n), rng.exponential(size=n), rng.exponential(2.0, size=n)
    level = float(np.quantile(V, 0.7)) * 2
    got = impl.pair_scan(P, w, 2.0, b, V, level)
    want = _brute_pair_scan(P, w, 2.0, b, V, level)
    assert got[0] == pytest.approx(want[0], rel=1e-14)
    assert got[1:] == want[1:]


def test_pair_scan_empty_level():
    assert _kernels.pair_scan(np.eye(3), np.ones(3), 2.0, np.zeros(3), np.full(3, 5.0), 1.0) == (-1.0, -1, -1)


@needs_numba
def test_ou_paths_parity(rng):
    ns, nt, nm = 7, 5, 4
    decay, std = rng.uniform(0.5, 1, (nt, nm)), rng.uniform(0, 1, (nt, nm))
    w, y0, z = rng.normal(size=nm), rng.normal(size=(ns, nm)), rng.normal(size=(ns, nt, nm))
    y1, y2 = y0.copy(), y0.copy()
    a = _kernels.numpy_impl.ou_functional_paths(decay, std, w, y1, z)
    b = _kernels.numba_impl.ou_functional_paths(decay, std, w, y2, z)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(y1, y2, rtol=1e-13, atol=1e-14)


def test_ou_paths_single_step_by_hand():
    decay, std = np.array([[0.5, 0.25]]), np.array([[1.0, 2.0]])
    y = np.array([[2.0, 4.0]])
    out = _kernels.numpy_impl.ou_functional_paths(decay, std, np.array([1.0, -1.0]), y, np.ones((1, 1, 2)))
    np.testing.assert_array_equal(y, [[2.0, 3.0]])
    assert out[0, 0] == -1.0


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: "numba" if m is _kernels.numba_impl else "numpy")
def test_structure_function(impl, rng):
    paths = rng.normal(size=(3, 50)).cumsum(axis=1)
    lags = np.array([1, 2, 7])
    want = [np.mean((paths[:, h:] - paths[:, :-h]) ** 2) for h in lags]
    np.testing.assert_allclose(impl.structure_function(paths, lags), want, rtol=1e-12)


def test_env_flag_selects_numpy_path():
    code = "from spdelab import _kernels as k; print(k.USE_NUMBA, k._impl is k.numpy_impl)"
    env = {**os.environ, "SPDELAB_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
