"""Hot inner loops for pairwise-accuracy scoring, with numba and numpy lanes.

The retrieval score and its bootstrap are the only parts of the pipeline that
loop over O(n^2) item pairs per resample; everything else is BLAS-bound and
gains nothing from JIT. Both lanes run the identical counting rule on a
precomputed distance matrix, so results are bitwise equal.

Backend selection: set ``NEURODEC_BACKEND=numpy`` to force the pure-numpy
path, ``NEURODEC_BACKEND=numba`` to require JIT (raising if numba is
missing). Default is numba when importable, numpy otherwise. See
``benchmarks/bench_kernels.py`` for a timing comparison.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via NEURODEC_BACKEND=numpy
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


def active_backend() -> str:
    """Resolve the kernel backend from the environment."""
    choice = os.environ.get("NEURODEC_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("NEURODEC_BACKEND=numba but numba is not importable")
        return "numba"
    if choice and choice not in ("", "auto"):
        raise RuntimeError(f"unknown NEURODEC_BACKEND {choice!r}")
    return "numba" if NUMBA_AVAILABLE else "numpy"


# ---------------------------------------------------------------------------
# pairwise accuracy over a prediction-to-target distance matrix
#
# D[i, j] = distance(prediction i, target j). Over all ordered pairs i != j
# within the given index subset, count 1 when D[i, i] < D[i, j] and 0.5 on an
# exact tie.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pairwise_score_numba(D, idx):
    n = idx.shape[0]
    score = 0.0
    for a in range(n):
        i = idx[a]
        d_own = D[i, i]
        for b in range(n):
            if a == b:
                continue
            d_other = D[i, idx[b]]
            if d_own < d_other:
                score += 1.0
            elif d_own == d_other:
                score += 0.5
    return score / (n * (n - 1))


def _pairwise_score_numpy(D, idx):
    sub = D[np.ix_(idx, idx)]
    own = np.diag(D)[idx][:, None]
    wins = (own < sub).sum() + 0.5 * (own == sub).sum()
    n = idx.shape[0]
    # the diagonal of `sub` ties with `own` by construction; drop those pairs
    wins -= 0.5 * n
    return wins / (n * (n - 1))


@njit(cache=True)
def _bootstrap_scores_numba(D, resamples):
    B, n = resamples.shape
    out = np.empty(B)
    for b in range(B):
        idx = resamples[b]
        score = 0.0
        for a in range(n):
            i = idx[a]
            d_own = D[i, i]
            for c in range(n):
                if a == c:
                    continue
                d_other = D[i, idx[c]]
                if d_own < d_other:
                    score += 1.0
                elif d_own == d_other:
                    score += 0.5
        out[b] = score / (n * (n - 1))
    return out


def _bootstrap_scores_numpy(D, resamples):
    return np.array([_pairwise_score_numpy(D, idx) for idx in resamples])


def pairwise_score(D: np.ndarray, idx: np.ndarray) -> float:
    """Ordered-pair retrieval accuracy restricted to rows/columns ``idx``."""
    D = np.ascontiguousarray(D, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if active_backend() == "numba":
        return float(_pairwise_score_numba(D, idx))
    return float(_pairwise_score_numpy(D, idx))


def bootstrap_scores(D: np.ndarray, resamples: np.ndarray) -> np.ndarray:
    """Retrieval accuracy for each row of a (B, n) resample-index matrix."""
    D = np.ascontiguousarray(D, dtype=np.float64)
    resamples = np.ascontiguousarray(resamples, dtype=np.int64)
    if active_backend() == "numba":
        return np.asarray(_bootstrap_scores_numba(D, resamples))
    return _bootstrap_scores_numpy(D, resamples)
