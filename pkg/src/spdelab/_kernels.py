"""Hot loops, compiled with numba when available.

Set ``SPDELAB_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths are
always importable (``numpy_impl`` / ``numba_impl``) so they can be benchmarked
and cross-checked against each other.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

DISABLED = os.environ.get("SPDELAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
USE_NUMBA = HAVE_NUMBA and not DISABLED

if HAVE_NUMBA and not os.environ.get("NUMBA_THREADING_LAYER"):
    numba.config.THREADING_LAYER = "workqueue"
if HAVE_NUMBA and os.environ.get("SPDE_THREADS"):
    numba.set_num_threads(max(1, min(int(os.environ["SPDE_THREADS"]), numba.config.NUMBA_NUM_THREADS)))


# -- numpy ------------------------------------------------------------------

def _np_ou_functional_paths(decay, std, weights, y, normals):
    n_samples, n_steps, _ = normals.shape
    out = np.empty((n_samples, n_steps))
    for j in range(n_steps):
        y *= decay[j]
        y += std[j] * normals[:, j, :]
        out[:, j] = y @ weights
    return out


def _np_pair_scan(P, w, base, b, V, level):
    n = P.shape[0]
    best, bi, bj = -1.0, -1, -1
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        ok = V[i] + V[js] <= level
        if not np.any(ok):
            continue
        js = js[ok]
        num = np.abs(P[js] - P[i]) @ w
        val = num / (base + b[i] + b[js])
        k = int(np.argmax(val))
        if val[k] > best:
            best, bi, bj = float(val[k]), i, int(js[k])
    return best, bi, bj


def _np_structure_function(paths, lags):
    out = np.empty(len(lags))
    for m, h in enumerate(lags):
        d = paths[:, h:] - paths[:, :-h]
        out[m] = np.mean(d * d)
    return out


numpy_impl = SimpleNamespace(
    ou_functional_paths=_np_ou_functional_paths,
    pair_scan=_np_pair_scan,
    structure_function=_np_structure_function,
)


# -- numba ------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _nb_ou_functional_paths(decay, std, weights, y, normals):
        n_samples, n_steps, n_modes = normals.shape
        out = np.empty((n_samples, n_steps))
        for s in prange(n_samples):
            for j in range(n_steps):
                acc = 0.0
                for m in range(n_modes):
                    v = decay[j, m] * y[s, m] + std[j, m] * normals[s, j, m]
                    y[s, m] = v
                    acc += weights[m] * v
                out[s, j] = acc
        return out

    @njit(cache=True)
    def _nb_pair_scan(P, w, base, b, V, level):
        n, m = P.shape
        best, bi, bj = -1.0, -1, -1
        for i in range(n - 1):
            for j in range(i + 1, n):
                if V[i] + V[j] > level:
                    continue
                num = 0.0
                for z in range(m):
                    num += w[z] * abs(P[i, z] - P[j, z])
                val = num / (base + b[i] + b[j])
                if val > best:
                    best, bi, bj = val, i, j
        return best, bi, bj

    @njit(parallel=True, cache=True)
    def _nb_structure_function(paths, lags):
        n_paths, n = paths.shape
        out = np.empty(len(lags))
        for m in prange(len(lags)):
            h = lags[m]
            acc = 0.0
            for p in range(n_paths):
                for i in range(n - h):
                    d = paths[p, i + h] - paths[p, i]
                    acc += d * d
            out[m] = acc / (n_paths * (n - h))
        return out

    numba_impl = SimpleNamespace(
        ou_functional_paths=_nb_ou_functional_paths,
        pair_scan=_nb_pair_scan,
        structure_function=_nb_structure_function,
    )
else:  # pragma: no cover
    numba_impl = None

_impl = numba_impl if USE_NUMBA else numpy_impl


def ou_functional_paths(decay, std, weights, y, normals):
    """Advance real OU coordinates through ``n_steps`` and record a linear functional.

    ``y`` (n_samples, n_modes) is updated in place: ``y <- decay[j]*y + std[j]*normals[:, j]``
    and ``out[:, j] = y @ weights``.
    """
    return _impl.ou_functional_paths(
        np.ascontiguousarray(decay, dtype=np.float64),
        np.ascontiguousarray(std, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        y,
        np.ascontiguousarray(normals, dtype=np.float64),
    )


def pair_scan(P, w, base, b, V, level=np.inf):
    """max over i<j with V_i+V_j <= level of sum_z w_z |P_iz - P_jz| / (base + b_i + b_j)."""
    best, i, j = _impl.pair_scan(
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        float(base),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(V, dtype=np.float64),
        float(level),
    )
    return float(best), int(i), int(j)


def structure_function(paths, lags):
    return _impl.structure_function(
        np.ascontiguousarray(paths, dtype=np.float64), np.asarray(lags, dtype=np.int64)
    )
