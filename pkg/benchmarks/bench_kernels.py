#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--repeats N]

The first JIT call per kernel compiles (cached on disk afterwards); a
warmup run keeps compilation out of the timings. Run with LIPKIT_NO_NUMBA
unset so both paths are available.
"""

import argparse
import math
import time

import numpy as np

from lipkit import _kernels


def timeit(fn, args, repeats):
    fn(*args)  # warmup (JIT compilation / cache touch)
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def workloads():
    rng = np.random.default_rng(0)

    a = np.ascontiguousarray(rng.standard_normal((64, 64)))
    at = np.ascontiguousarray(a.T)
    u0 = rng.standard_normal(64)
    yield "power_iterate (64x64, 200 iters)", "power_iterate", (a, at, u0, 200)

    m = 14
    values = rng.standard_normal(1 << m)
    weights = np.array(
        [math.factorial(s) * math.factorial(m - 1 - s) / math.factorial(m) for s in range(m)]
    )
    pc = np.zeros(1 << m, dtype=np.int64)
    masks = np.arange(1 << m)
    for b in range(m):
        pc += (masks >> b) & 1
    yield f"shapley_accumulate (M={m})", "shapley_accumulate", (values, weights, pc, m)

    d = 36
    theta = rng.standard_normal(d)
    drift = rng.standard_normal(d)
    sqrt_cov = np.ascontiguousarray(np.linalg.cholesky(np.eye(d) * 0.5))
    noise = rng.standard_normal((20_000, d))
    yield "em_path (20k steps, d=36)", "em_path", (theta, drift, sqrt_cov, 0.01, 0.03, noise)

    samples = rng.standard_normal(96 * 96)
    proj = rng.standard_normal(96 * 96)
    ts = np.linspace(-4, 4, 128)
    yield "direct_dft (96x96 grid, 128 ts)", "direct_dft", (samples, proj, ts, 0.25)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels.backend_name() != "numba":
        print("numba backend unavailable or disabled (LIPKIT_NO_NUMBA?);")
        print("nothing to compare against the numpy fallback.")
        return 1

    print(f"{'kernel':<36} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    print("-" * 70)
    for label, name, wl_args in workloads():
        jit_fn = getattr(_kernels, name)
        np_fn = _kernels.NUMPY_IMPLS[name]
        t_np = timeit(np_fn, wl_args, args.repeats)
        t_nb = timeit(jit_fn, wl_args, args.repeats)
        print(f"{label:<36} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
