#!/usr/bin/env python3
"""Time the compiled and pure-numpy backends on the hot Monte Carlo kernels.

Two workloads: raw subordinator increments, and a full exit batch (the
kernel behind every estimator).  The compiled backend is warmed up first
so JIT time never lands in a measurement; both backends draw identical
streams, so the outputs are checked equal as a side effect.
"""

import argparse
import time

import numpy as np

from sbmlab import bernstein, simulate


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-increments", type=int, default=2_000_000)
    ap.add_argument("--n-paths", type=int, default=20_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    exp = bernstein.geometric_stable(1.0)
    dt = simulate.default_time_step(exp, 0.5, 2e-3)
    spec = simulate.PathSpec(exp, 2, dt, horizon=None, seed=20260814)
    ball, start = ((0.0, 0.0), 0.5), (0.0, 0.0)

    # warm the JIT cache before any timing
    simulate.sample_increments(exp, 1.0, 16, seed=1, backend="numba")
    simulate.sample_exit_batch(spec, ball, start, 64, backend="numba")

    workloads = {
        f"increments n={args.n_increments:.0e}": lambda be: simulate.sample_increments(
            exp, 1.0, args.n_increments, seed=20260814, backend=be),
        f"exit batch n={args.n_paths:.0e}": lambda be: simulate.sample_exit_batch(
            spec, ball, start, args.n_paths, backend=be),
    }

    print(f"{'workload':<28}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, fn in workloads.items():
        t_nb = _best_of(lambda: fn("numba"), args.repeats)
        t_np = _best_of(lambda: fn("numpy"), args.repeats)
        print(f"{name:<28}{t_nb:>11.3f}s{t_np:>11.3f}s{t_np / t_nb:>9.1f}x")

    a = simulate.sample_increments(exp, 1.0, 10_000, seed=3, backend="numba")
    b = simulate.sample_increments(exp, 1.0, 10_000, seed=3, backend="numpy")
    assert np.allclose(a, b, rtol=1e-12), "backends drifted apart"
    print("backend agreement: identical streams verified on 1e4 increments")


if __name__ == "__main__":
    main()
