#!/usr/bin/env python3
"""Benchmark the jitted kernel path against the pure-numpy fallback.

Runs the same seeded configurations through both engine paths, verifies
the traces are bit-identical, and reports wall times.  The numpy column
is what you get with ODOG_NO_NUMBA=1 (or without numba installed).

Usage: python benchmarks/numba_vs_numpy.py [--budget 4096] [--repeats 3]
"""

import argparse
import time

from odog import (AdaptiveStep, ConstantStep, EngineConfig, NoiseModel,
                  OdogLearner, OgdLearner, kernels, make_problem, run)
from odog.engine import run_results_equal


def timed(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return result, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budget", type=int, default=4096)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    cosq = make_problem("cosine_quadratic", dim=10, a=1.0, b=1.0, c=1.0, x0=2.0)
    logi = make_problem("logistic", dim=10, n_samples=128, data_seed=0, mu=0.1)
    cases = [
        ("odog-const / cosq / sigma=0", cosq, 0.0,
         lambda: OdogLearner(ConstantStep(0.05))),
        ("odog-const / cosq / sigma=1", cosq, 1.0,
         lambda: OdogLearner(ConstantStep(0.01))),
        ("odog-adaptive / cosq", cosq, 0.0,
         lambda: OdogLearner(AdaptiveStep(gamma=1.2, alpha=1e-10))),
        ("o2nc-ogd / cosq", cosq, 0.0, lambda: OgdLearner(0.02)),
        ("odog-const / logistic", logi, 0.0,
         lambda: OdogLearner(ConstantStep(0.05))),
    ]

    print(f"numba enabled: {kernels.NUMBA_ENABLED} "
          f"(set {kernels.NUMBA_ENV_FLAG}=1 to disable)")
    print(f"budget M = {args.budget}, best of {args.repeats} repeats\n")
    header = f"{'case':34s} {'kernel [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s}  identical"
    print(header)
    print("-" * len(header))
    for name, problem, sigma, make_learner in cases:
        mode = "deterministic" if sigma == 0.0 else "stochastic"
        cfg = EngineConfig(M=args.budget, T=16, D=0.05, mode=mode)
        noise = NoiseModel(sigma=sigma, rng_seed=1)

        def kernel_run():
            return run(problem, noise, cfg, make_learner(), force_path="kernel")

        def numpy_run():
            return run(problem, noise, cfg, make_learner(), force_path="numpy")

        kernel_run()  # warm the JIT cache outside the timing
        res_k, t_k = timed(kernel_run, args.repeats)
        res_n, t_n = timed(numpy_run, args.repeats)
        same = run_results_equal(res_k, res_n)
        print(f"{name:34s} {t_k:12.4f} {t_n:12.4f} {t_n / t_k:8.1f}x  {same}")
        if not same:
            raise SystemExit(f"path divergence in case {name!r}")


if __name__ == "__main__":
    main()
