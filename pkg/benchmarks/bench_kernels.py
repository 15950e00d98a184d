"""Time the numba kernels against their numpy fallbacks and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from spdelab import _kernels


def cases(rng):
    n = 300
    P = rng.dirichlet(np.ones(n), size=n)
    V = rng.exponential(2.0, n)
    yield "pair_scan (300 states)", (P, 1 + 0.1 * V, 2.0, 0.1 * V, V, np.inf), None

    ns, nt, nm = 2000, 64, 1023
    decay = np.exp(-rng.uniform(0, 0.1, (nt, nm)))
    std = rng.uniform(0, 0.1, (nt, nm))
    normals = rng.standard_normal((ns, nt, nm))
    y = rng.standard_normal((ns, nm))
    yield "ou_functional_paths (2000 x 64 x 1023)", (decay, std, rng.standard_normal(nm), y, normals), 3

    paths = rng.standard_normal((200, 1025)).cumsum(axis=1)
    yield "structure_function (200 x 1025, 7 lags)", (paths, np.array([1, 2, 4, 8, 16, 32, 64])), None


def best_of(fn, args, repeat, fresh):
    times, out = [], None
    for _ in range(repeat):
        a = list(args)
        if fresh is not None:
            a[fresh] = a[fresh].copy()      # argument updated in place
        t0 = time.perf_counter()
        out = fn(*a)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}  max |diff|")
    for name, a, fresh in cases(rng):
        nb = getattr(_kernels.numba_impl, name.split()[0])
        npf = getattr(_kernels.numpy_impl, name.split()[0])
        best_of(nb, a, 1, fresh)            # compile
        t_np, r_np = best_of(npf, a, args.repeat, fresh)
        t_nb, r_nb = best_of(nb, a, args.repeat, fresh)
        diff = float(np.max(np.abs(np.asarray(r_np, float) - np.asarray(r_nb, float))))
        print(f"{name:42s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
