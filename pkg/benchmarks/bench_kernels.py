#!/usr/bin/env python3
"""Benchmark the hot kernels: numba path against the pure-numpy path.

The three kernels dominate the runtime of the grid solver (tridiagonal
solves), the trajectory machinery (piecewise-cubic sampling) and the label
inversions (monotone root finding).  Run with BIHJ_NUMBA=1 (default) so both
implementations are importable; sizes mirror the canonical scenario.

    python benchmarks/bench_kernels.py [--repeats 5]
"""
import argparse
import time

import numpy as np

from bihj.kernels import NUMBA_ENABLED, implementations, pchip_slopes


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tridiag(table, repeats):
    n, steps = 2048, 1000
    rng = np.random.default_rng(0)
    dl = np.full(n - 1, -0.3 + 0.1j)
    du = np.full(n - 1, -0.3 + 0.1j)
    d = (2.0 + 0.2j) + 0.01 * rng.normal(size=n).astype(complex)
    rhs = rng.normal(size=n) + 1j * rng.normal(size=n)
    solve = table["tridiag_solve"]
    solve(dl, d, du, rhs)  # warm the jit

    def run():
        x = rhs
        for _ in range(steps):
            x = solve(dl, d, du, x)
        return x

    return timeit(run, repeats), f"{steps} solves of n={n}"


def bench_hermite(table, repeats):
    n, nq = 201, 201
    calls = 20000  # roughly the per-run evaluation count of the coupled stepper
    xk = np.linspace(-4.0, 4.0, n)
    yk = np.sin(xk) + 2.0 * xk
    dk = pchip_slopes(xk, yk)
    xq = np.linspace(-3.9, 3.9, nq)
    fn = table["hermite_eval"]
    fn(xk, yk, dk, xq)

    def run():
        for _ in range(calls):
            fn(xk, yk, dk, xq)

    return timeit(run, repeats), f"{calls} batches of {nq} points"


def bench_invert(table, repeats):
    n = 201
    calls = 2000
    xk = np.linspace(-4.0, 4.0, n)
    yk = xk + 0.2 * np.sin(xk)
    dk = pchip_slopes(xk, yk)
    targets = np.linspace(yk[0] + 0.1, yk[-1] - 0.1, 101)
    tol = 1e-10 * (yk[-1] - yk[0])
    fn = table["invert_monotone"]
    fn(xk, yk, dk, targets, tol)

    def run():
        for _ in range(calls):
            fn(xk, yk, dk, targets, tol)

    return timeit(run, repeats), f"{calls} batches of {targets.size} targets"


def main():
    parser = argparse.ArgumentParser(description="kernel benchmark, numba vs numpy")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    impls = implementations()
    print(f"numba enabled: {NUMBA_ENABLED}")
    benches = (("tridiag_solve", bench_tridiag),
               ("hermite_eval", bench_hermite),
               ("invert_monotone", bench_invert))
    results = {}
    for bench_name, bench in benches:
        for impl_name, table in impls.items():
            elapsed, note = bench(table, args.repeats)
            results[(bench_name, impl_name)] = elapsed
            print(f"{bench_name:16s} {impl_name:6s} {elapsed * 1e3:9.2f} ms   ({note})")
        if "numba" in impls:
            ratio = results[(bench_name, "numpy")] / results[(bench_name, "numba")]
            print(f"{bench_name:16s} speedup numba/numpy: {ratio:.1f}x")


if __name__ == "__main__":
    main()
