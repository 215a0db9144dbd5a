#!/usr/bin/env python3
"""Benchmark the compiled prox kernel against the numpy fallback.

Runs micro-benchmarks of both backends in-process, then times an
end-to-end solve in subprocesses with CAPROX_PURE_PYTHON toggled.

Usage: python benchmarks/bench_kernels.py
"""
import os
import subprocess
import sys
from time import perf_counter

import numpy as np

from caprox.kernels import _fallback

try:
    from caprox.kernels import _core
except ImportError:
    _core = None


def best_of(fn, *args, repeat=7):
    best = float("inf")
    for _ in range(repeat):
        t0 = perf_counter()
        fn(*args)
        best = min(best, perf_counter() - t0)
    return best


SOLVE_SNIPPET = """
from time import perf_counter
import numpy as np
from caprox import RegKind, Regularizer, gen_rip_dense, make_sparse_instance, solve
from caprox.kernels import BACKEND

op = gen_rip_dense(200, 200, 0.2, seed=1)
inst = make_sparse_instance(200, 10, 0.05, op, seed=2, delta=0.2)
reg = Regularizer(RegKind.CAPPED, 0.05)
solve(inst, reg)  # warm-up
t0 = perf_counter()
for _ in range(25):
    solve(inst, reg)
print(f"{BACKEND}: {(perf_counter() - t0) / 25 * 1e3:.2f} ms per solve")
"""


def main():
    rng = np.random.default_rng(0)
    print("element-wise capped prox, best of 7 runs")
    print(f"{'n':>8} {'tau':>4} {'numpy':>12} {'cython':>12} {'speedup':>8}")
    for n in (200, 5_000, 200_000):
        m = np.ascontiguousarray(rng.standard_normal(n) * 2)
        for tau in (1.0, 2.3):
            t_py = best_of(_fallback.prox_capped_elementwise, m, tau, 1.0)
            if _core is None:
                print(f"{n:>8} {tau:>4} {t_py * 1e6:>10.1f}us {'n/a':>12} {'n/a':>8}")
                continue
            t_cy = best_of(_core.prox_capped_elementwise, m, tau, 1.0)
            print(f"{n:>8} {tau:>4} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
                  f"{t_py / t_cy:>7.1f}x")

    print("\npenalty sum, best of 7 runs")
    for n in (200, 200_000):
        x = np.ascontiguousarray(rng.standard_normal(n))
        t_py = best_of(_fallback.capped_penalty_sum, x, 1.0)
        if _core is None:
            print(f"{n:>8}      {t_py * 1e6:>10.1f}us {'n/a':>12}")
            continue
        t_cy = best_of(_core.capped_penalty_sum, x, 1.0)
        print(f"{n:>8}      {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us {t_py / t_cy:>7.1f}x")

    print("\nend-to-end solve (200-dim sparse instance, 25 repetitions)")
    for env_extra in ({}, {"CAPROX_PURE_PYTHON": "1"}):
        env = dict(os.environ, **env_extra)
        out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env,
                             capture_output=True, text=True)
        print(" ", out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    main()
