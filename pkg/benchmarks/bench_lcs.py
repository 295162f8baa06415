"""Benchmark the compiled LCS kernel against its pure-Python fallback.

Usage: python3 benchmarks/bench_lcs.py [--sizes 64,256,1024] [--repeats 5]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from chartsum._lcs_py import lcs_length_ids as lcs_python

try:
    from chartsum._lcs import lcs_length_ids as lcs_cython
except ImportError:
    lcs_cython = None


def make_pair(n: int, vocab: int, rng: random.Random) -> tuple[list[int], list[int]]:
    return (
        [rng.randrange(vocab) for _ in range(n)],
        [rng.randrange(vocab) for _ in range(n)],
    )


def best_of(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="64,256,1024",
                        help="comma-separated sequence lengths")
    parser.add_argument("--vocab", type=int, default=50, help="distinct token ids")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats (best kept)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if lcs_cython is None:
        print("compiled kernel not built; nothing to compare")
        return 1

    rng = random.Random(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'n':>6}  {'python':>10}  {'cython':>10}  {'speedup':>8}")
    for n in sizes:
        a, b = make_pair(n, args.vocab, rng)
        a_np = np.asarray(a, dtype=np.intc)
        b_np = np.asarray(b, dtype=np.intc)
        expected = lcs_python(a, b)
        got = lcs_cython(a_np, b_np)
        assert got == expected, f"kernels disagree at n={n}: {got} != {expected}"
        t_py = best_of(lcs_python, (a, b), args.repeats)
        t_cy = best_of(lcs_cython, (a_np, b_np), args.repeats)
        print(f"{n:>6}  {t_py * 1e3:>8.2f}ms  {t_cy * 1e3:>8.2f}ms  {t_py / t_cy:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
