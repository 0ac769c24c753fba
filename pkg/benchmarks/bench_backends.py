"""Benchmark the compiled objective kernel against the pure-numpy fallback.

Times b_value and b_value_grad over random admissible inputs for a range of
support sizes and species counts.  Run directly:

    python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import itertools
import time

import numpy as np

from msglass import _kernels
from msglass._kernels import pure
from msglass.functionals import _kernel_args
from msglass.model import MixtureModel
from msglass.orderparam import DiscretePair


def random_case(rng, k, n):
    lam = rng.uniform(0.2, 1.0, size=n)
    lam = lam / lam.sum()
    terms = []
    for p in (2, 3):
        coeffs = {}
        for _ in range(n):
            tup = tuple(sorted(rng.integers(0, n, size=p)))
            c = float(rng.uniform(0.1, 1.0))
            for perm in set(itertools.permutations(tup)):
                coeffs[perm] = c
        terms.append((p, coeffs))
    model = MixtureModel([f"s{i}" for i in range(n)], lam,
                         rng.uniform(0, 1, size=n), terms)
    m = np.sort(rng.uniform(0.05, 1.0, size=k))
    m[-1] = 1.0
    for i in range(1, k):
        m[i] = max(m[i], m[i - 1] + 1e-4)
    m = np.minimum(m, 1.0)
    m[-1] = 1.0
    q = np.sort(rng.uniform(0, 0.9, size=(k, n)), axis=0)
    return _kernel_args(DiscretePair(m, q), model)


def time_fn(fn, args_list, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best / len(args_list)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--cases", type=int, default=200)
    opts = ap.parse_args()

    if _kernels.BACKEND != "compiled":
        print("compiled backend unavailable; timing pure against itself")
    rng = np.random.default_rng(0)

    header = f"{'k':>4} {'n':>3} {'fn':>12} {'pure (us)':>10} {'compiled (us)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for k, n in [(1, 1), (4, 2), (8, 2), (16, 4), (32, 4), (64, 8)]:
        cases = [random_case(rng, k, n) for _ in range(opts.cases)]
        for name, f_pure, f_fast in [
            ("b_value", pure.b_value, _kernels.b_value),
            ("b_value_grad", pure.b_value_grad, _kernels.b_value_grad),
        ]:
            tp = time_fn(f_pure, cases, opts.repeats)
            tc = time_fn(f_fast, cases, opts.repeats)
            print(f"{k:>4} {n:>3} {name:>12} {tp * 1e6:>10.1f} "
                  f"{tc * 1e6:>14.1f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
