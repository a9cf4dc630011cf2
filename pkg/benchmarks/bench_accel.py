"""Time the numba kernels against the numpy fallback on protocol-sized inputs.

Usage: python benchmarks/bench_accel.py [--repeats 5]

Each kernel is run once per path to warm up (jit compile) before timing.
The two paths are also checked for agreement on the same inputs.
"""

import argparse
import math
import time

import numpy as np

from dpsummary import _numeric


def best_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    d, T, q = 140, int(140 ** 1.5), 200
    grid = (2.0 * np.arange(2 * d + 1) - 2 * d) / (2 * d)
    col_sums = rng.uniform(-q, q, d)
    marg = np.full((d, grid.size), 1.0 / grid.size)
    sel_u, lap_u = rng.random(T), rng.random(T)
    X = rng.standard_normal((5000, 20))
    om = math.sqrt(0.2) * rng.standard_normal((d, 20))
    off = rng.uniform(0, 2 * math.pi, d)
    H = rng.uniform(-0.1, 0.1, (20000, d))
    g = rng.uniform(-0.1, 0.1, d)
    A = rng.standard_normal((2000, 20))
    B = rng.standard_normal((1000, 20))
    return {
        f"mwem d={d} T={T}": lambda nb: _numeric.mwem(col_sums, q, grid, marg, 0.05, sel_u, lap_u,
                                                      use_numba=nb)[1],
        "rff_project 5000x20 -> 140": lambda nb: _numeric.rff_project(X, om, off, math.sqrt(2 / d),
                                                                      use_numba=nb),
        "row_dots 20000x140": lambda nb: _numeric.row_dots(H, g, use_numba=nb),
        "rbf_rowsum 2000x1000x20": lambda nb: _numeric.rbf_rowsum(A, B, 0.1, use_numba=nb),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _numeric.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<30s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        diff = float(np.max(np.abs(fn(True) - fn(False))))
        t_np = best_time(lambda: fn(False), args.repeats)
        t_nb = best_time(lambda: fn(True), args.repeats)
        print(f"{name:<30s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
