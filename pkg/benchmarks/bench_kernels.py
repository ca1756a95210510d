#!/usr/bin/env python3
"""Benchmark the compiled DP kernels against the pure-Python (numpy) fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 1000,4000,10000]

Both backends must produce identical tables; this script asserts that while
timing them, so it doubles as a large-input equivalence check.
"""

import argparse
import time

import numpy as np

from seqplan._kernels import available_backends


def bench(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,4000,10000")
    parser.add_argument("--q", type=int, default=16, help="bucket budget")
    parser.add_argument("--parts", type=int, default=64, help="micro-batch count for the split kernel")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print("compiled backend not built; only timing the python fallback")
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<22}{'n':>8}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        lengths = np.clip(np.rint(rng.lognormal(7.3, 1.5, size=n)), 1, 65536).astype(np.int64)
        values, counts = np.unique(lengths, return_counts=True)

        times = {}
        tables = {}
        for name, mod in backends.items():
            times[name], tables[name] = bench(mod.bucket_suffix_error_table, values, counts, args.q)
        if len(tables) == 2:
            a, b = tables.values()
            assert np.array_equal(a, b), "backend tables diverged"
        ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{'bucket_error_table':<22}{len(values):>8}"
              + "".join(f"{times[name]:>13.3f}s" for name in backends) + f"{ratio:>9.1f}x")

        times = {}
        tables = {}
        for name, mod in backends.items():
            times[name], tables[name] = bench(mod.minimax_suffix_table, lengths, args.parts)
        if len(tables) == 2:
            a, b = tables.values()
            assert np.array_equal(a, b), "backend tables diverged"
        ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{'minimax_split_table':<22}{n:>8}"
              + "".join(f"{times[name]:>13.3f}s" for name in backends) + f"{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
