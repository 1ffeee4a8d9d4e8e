"""Benchmark the evaluation kernels: numba JIT lane vs pure-numpy lane.

The pairwise-accuracy bootstrap is the pipeline's only O(B * n^2) inner
loop; everything else is BLAS-bound. This script times both lanes on
realistic shapes (70 test items per modality, 1000 resamples) and prints the
speedup. Run directly:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from neurodec import _kernels as K


def bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("per-modality scoring (n=70)", 70, 0),
        ("bootstrap 1000 x n=70", 70, 1000),
        ("bootstrap 1000 x n=200", 200, 1000),
    ]
    print(f"numba available: {K.NUMBA_AVAILABLE}")
    if K.NUMBA_AVAILABLE:
        # trigger JIT compilation outside the timed region
        D0 = rng.uniform(0, 2, size=(4, 4))
        K._pairwise_score_numba(D0, np.arange(4))
        K._bootstrap_scores_numba(D0, np.zeros((1, 4), dtype=np.int64))

    header = f"{'case':32s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, n, boot in cases:
        D = rng.uniform(0, 2, size=(n, n))
        if boot:
            resamples = rng.integers(0, n, size=(boot, n))
            t_np, out_np = bench(K._bootstrap_scores_numpy, D, resamples)
            if K.NUMBA_AVAILABLE:
                t_nb, out_nb = bench(K._bootstrap_scores_numba, D, resamples)
                assert (np.asarray(out_nb) == out_np).all()
        else:
            idx = np.arange(n)
            t_np, out_np = bench(K._pairwise_score_numpy, D, idx)
            if K.NUMBA_AVAILABLE:
                t_nb, out_nb = bench(K._pairwise_score_numba, D, idx)
                assert out_nb == out_np
        if K.NUMBA_AVAILABLE:
            print(f"{label:32s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:32s} {t_np * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
