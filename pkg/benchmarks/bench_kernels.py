#!/usr/bin/env python3
"""Benchmark the compiled kernels against the interpreted fallback.

Runs each hot kernel on a representative workload under both dispatch
modes and prints the timings plus the speedup.  Invoke as

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from fracperc import kernels
from fracperc.goodness import check_nu_good
from fracperc.index import neighbor_offsets
from fracperc.models import sample_k, sample_mfp
from fracperc.rng import cell_uniforms, derive_seed


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_label(repeat):
    g = sample_mfp(0.85, 2, 2, 8, seed=3)
    dims = np.full(2, g.box, dtype=np.int64)
    half = np.array(neighbor_offsets(2, half=True), dtype=np.int64)

    def work():
        kernels.label_cells(g.cells, dims, half)

    return f"cluster labeling ({g.cells.size} cells)", work


def bench_site(repeat):
    M = 64
    dims = np.full(2, M, dtype=np.int64)
    half = np.array(neighbor_offsets(2, half=True), dtype=np.int64)
    p_grid = np.linspace(0.5, 0.7, 9)
    fields = [cell_uniforms(derive_seed(9, r), 1, np.arange(M * M), 0)
              for r in range(20)]

    def work():
        for u in fields:
            kernels.site_sweep(u, dims, half, p_grid, 0)

    return f"site sweep (side {M}, 9 thresholds, 20 fields)", work


def bench_goodness(repeat):
    grids = [sample_k(7, 3, 2, 3, seed=derive_seed(4, r)) for r in range(20)]

    def work():
        for g in grids:
            check_nu_good(g, 1)

    return "goodness procedure (20 depth-3 trees)", work


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba unavailable; nothing to compare")

    benches = [bench_label(args.repeat), bench_site(args.repeat),
               bench_goodness(args.repeat)]

    kernels.set_use_numba(True)
    kernels.warmup()
    for _, work in benches:
        work()  # compile everything relevant before timing

    print(f"{'kernel':<45} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, work in benches:
        kernels.set_use_numba(True)
        fast = timed(work, args.repeat)
        kernels.set_use_numba(False)
        slow = timed(work, args.repeat)
        kernels.set_use_numba(True)
        print(f"{name:<45} {fast * 1e3:>8.1f}ms {slow * 1e3:>8.1f}ms "
              f"{slow / fast:>8.1f}x")


if __name__ == "__main__":
    main()
