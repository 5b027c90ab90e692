"""Benchmark the LCS kernels: numba-jitted loop vs vectorized numpy fallback.

Usage: python benchmarks/bench_lcs.py [--sizes 64,256,1024] [--repeats 5]

The same comparison drives full ROUGE-L scoring over a synthetic batch, since
that is how the kernel is used in evaluation. Run with SOTAPIPE_NO_NUMBA=1 to
confirm the package works end to end on the fallback path.
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from sotapipe import lcskernel
from sotapipe.rouge import rouge_l


def _pair(rng: random.Random, n: int, vocab: int = 50) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([rng.randrange(vocab) for _ in range(n)], dtype=np.int64)
    b = np.array([rng.randrange(vocab) for _ in range(n)], dtype=np.int64)
    return a, b


def _time(fn, pairs, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="64,256,1024")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--pairs", type=int, default=20)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = random.Random(0)
    print(f"numba available: {lcskernel.NUMBA_ENABLED}")
    header = f"{'n':>6}  {'numpy (s)':>12}"
    if lcskernel.NUMBA_ENABLED:
        header += f"  {'numba (s)':>12}  {'speedup':>8}"
    print(header)
    for n in sizes:
        pairs = [_pair(rng, n) for _ in range(args.pairs)]
        # correctness cross-check before timing
        for a, b in pairs[:3]:
            expected = lcskernel._lcs_length_np(a, b)
            if lcskernel.NUMBA_ENABLED:
                assert int(lcskernel._lcs_length_nb(a, b)) == expected
        t_np = _time(lcskernel._lcs_length_np, pairs, args.repeats)
        line = f"{n:>6}  {t_np:>12.4f}"
        if lcskernel.NUMBA_ENABLED:
            lcskernel._lcs_length_nb(*pairs[0])  # warm the JIT outside timing
            t_nb = _time(lcskernel._lcs_length_nb, pairs, args.repeats)
            line += f"  {t_nb:>12.4f}  {t_np / t_nb:>7.1f}x"
        print(line)

    # end-to-end: ROUGE-L over a synthetic prediction batch
    words = [f"w{i}" for i in range(200)]
    texts = [" ".join(rng.choice(words) for _ in range(120)) for _ in range(200)]
    start = time.perf_counter()
    for cand, ref in zip(texts, reversed(texts)):
        rouge_l(cand, ref)
    elapsed = time.perf_counter() - start
    path = "numba" if lcskernel.NUMBA_ENABLED else "numpy"
    print(f"\nROUGE-L over 200 pairs of 120 tokens ({path} path): {elapsed:.3f}s")


if __name__ == "__main__":
    main()
