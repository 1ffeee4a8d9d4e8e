"""Multi-target ridge regression with cross-validated penalty selection.

Inputs are standardized per voxel (training mean and population standard
deviation, floored at 1e-12 so constant voxels standardize to zero and get
zero weight); targets are centered only, preserving their cosine geometry.
The solver picks the primal normal equations or the dual (Gram) form so the
factorized system has size min(trials, voxels).

Fits for different (features, mode, ROI) combinations are independent and may
run concurrently over a shared read-only dataset; trained decoders are
immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .core import Dataset, FeatureMatrix, Modality, Role, select_modality
from .errors import (
    DegenerateInputError,
    MissingTargetError,
    NumericalFailureError,
    ShapeMismatchError,
    TooFewRowsError,
)

SCALE_FLOOR = 1e-12


class TrainedOn(Enum):
    AGNOSTIC = "agnostic"
    IMAGE_ONLY = "image"
    CAPTION_ONLY = "caption"


#: Penalty grid used throughout: 1e3 .. 1e7 in decades.
DEFAULT_ALPHA_GRID = (1e3, 1e4, 1e5, 1e6, 1e7)


@dataclass(frozen=True)
class CvConfig:
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    n_folds: int = 5
    fold_seed: int = 0

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        object.__setattr__(self, "alpha_grid", grid)
        if not grid:
            raise ValueError("alpha grid is empty")
        if any(a <= 0 for a in grid):
            raise ValueError("alpha grid entries must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha grid must be strictly increasing")
        if self.n_folds < 2:
            raise ValueError(f"n_folds must be >= 2, got {self.n_folds}")


@dataclass(frozen=True)
class RidgeDecoder:
    """Fitted linear map from (standardized) voxel vectors to feature space."""

    weights: np.ndarray
    intercept: np.ndarray
    alpha: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    trained_on: TrainedOn = TrainedOn.AGNOSTIC
    target_model: str = ""
    meta: dict | None = None

    @property
    def n_voxels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_dims(self) -> int:
        return self.weights.shape[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict(self, X)


def _standardize(X):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)  # population (1/N) standard deviation
    if not (scale > SCALE_FLOOR).any():
        raise DegenerateInputError("every input column is constant")
    scale = np.maximum(scale, SCALE_FLOOR)
    return (X - mean) / scale, mean, scale


def _solve_spd(A, B):
    try:
        return scipy.linalg.solve(A, B, assume_a="pos")
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, B, rcond=None)[0]


def fit_ridge(X, Y, alpha, *, solver="auto", trained_on=TrainedOn.AGNOSTIC,
              target_model="", meta=None) -> RidgeDecoder:
    """Fit a ridge regression of every target dimension on the voxel data.

    Solves (X'X + alpha I) W = X'Yc on the standardized inputs, via a
    symmetric positive-definite factorization of the primal normal equations
    or of the trials-by-trials Gram system, whichever is smaller.

    Parameters
    ----------
    X : ndarray (n_trials, n_voxels)
    Y : ndarray (n_trials, n_dims)
    alpha : float
        Positive penalty.
    solver : {'auto', 'primal', 'dual'}
        'auto' takes the dual form when n_voxels > n_trials.

    Returns
    -------
    RidgeDecoder
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeMismatchError(f"X {X.shape} and Y {Y.shape} do not align")
    if X.shape[0] < 2:
        raise TooFewRowsError(f"need at least 2 rows, got {X.shape[0]}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if solver not in ("auto", "primal", "dual"):
        raise ValueError(f"unknown solver {solver!r}")

    Xs, mean, scale = _standardize(X)
    ybar = Y.mean(axis=0)
    Yc = Y - ybar

    n, p = Xs.shape
    if solver == "dual" or (solver == "auto" and p > n):
        gram = Xs @ Xs.T
        gram[np.diag_indices_from(gram)] += alpha
        W = Xs.T @ _solve_spd(gram, Yc)
    else:
        gram = Xs.T @ Xs
        gram[np.diag_indices_from(gram)] += alpha
        W = _solve_spd(gram, Xs.T @ Yc)
    if not np.isfinite(W).all():
        raise NumericalFailureError("ridge solve produced non-finite weights")
    return RidgeDecoder(
        weights=W,
        intercept=ybar,
        alpha=float(alpha),
        x_mean=mean,
        x_scale=scale,
        trained_on=trained_on,
        target_model=target_model,
        meta=dict(meta) if meta else None,
    )


def predict(d: RidgeDecoder, X) -> np.ndarray:
    """Apply a fitted decoder: standardize with the training statistics,
    multiply by the weights, add the intercept."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != d.n_voxels:
        raise ShapeMismatchError(
            f"X has shape {X.shape}, decoder expects {d.n_voxels} columns"
        )
    return ((X - d.x_mean) / d.x_scale) @ d.weights + d.intercept


def _fold_indices(n, n_folds, seed):
    """Contiguous blocks of a seeded permutation of row indices."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, n_folds)


def _mean_pearson(pred, true):
    """Mean per-dimension Pearson correlation across rows.

    Dimensions without variance in either argument contribute 0, as do folds
    with fewer than two rows, so leave-one-out configurations stay finite.
    """
    if pred.shape[0] < 2:
        return 0.0
    pc = pred - pred.mean(axis=0)
    tc = true - true.mean(axis=0)
    pn = np.sqrt((pc * pc).sum(axis=0))
    tn = np.sqrt((tc * tc).sum(axis=0))
    denom = pn * tn
    ok = denom > 0
    corr = np.zeros(pred.shape[1])
    corr[ok] = (pc[:, ok] * tc[:, ok]).sum(axis=0) / denom[ok]
    return float(corr.mean())


def cv_select_alpha(X, Y, cfg: CvConfig):
    """Pick the penalty by k-fold cross validation.

    Folds are contiguous blocks of a seeded shuffle, so the split is fully
    determined by ``cfg``. Each candidate is scored by the mean per-dimension
    Pearson correlation between held-out predictions and targets, averaged
    over folds; exact ties resolve toward the larger (more regularized)
    penalty.

    Returns
    -------
    (float, ndarray)
        The selected alpha and the per-alpha mean validation scores.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = X.shape[0]
    if n < cfg.n_folds:
        raise TooFewRowsError(f"{n} rows for {cfg.n_folds} folds")
    folds = _fold_indices(n, cfg.n_folds, cfg.fold_seed)
    scores = np.zeros(len(cfg.alpha_grid))
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        X_tr, Y_tr = X[mask], Y[mask]
        X_va, Y_va = X[fold], Y[fold]
        for k, alpha in enumerate(cfg.alpha_grid):
            dec = fit_ridge(X_tr, Y_tr, alpha)
            scores[k] += _mean_pearson(predict(dec, X_va), Y_va)
    scores /= len(folds)
    best = int(np.flatnonzero(scores == scores.max())[-1])
    return cfg.alpha_grid[best], scores


def train_decoder(ds: Dataset, targets: FeatureMatrix, mode: TrainedOn,
                  cfg: CvConfig) -> RidgeDecoder:
    """Cross-validate the penalty and refit on the full training selection.

    ``mode`` restricts the training trials to one presentation modality
    before anything else; target rows are assigned per trial through the
    cross-modal rule.
    """
    if mode is TrainedOn.IMAGE_ONLY:
        ds = select_modality(ds, Modality.IMAGE)
    elif mode is TrainedOn.CAPTION_ONLY:
        ds = select_modality(ds, Modality.CAPTION)

    from .metrics import assign_targets  # local import, metrics depends on this module

    trial_ids = ds.betas_train.trial_ids
    events_by_id = {ev.stimulus_id: ev for ev in ds.events if ev.role is Role.TRAIN}
    try:
        stimuli = [events_by_id[tid] for tid in trial_ids]
    except KeyError as exc:
        raise MissingTargetError(f"trial {exc.args[0]!r} has no training event") from exc
    aligned = assign_targets(stimuli, targets, ds.pairing)

    X = ds.betas_train.values.astype(np.float64)
    Y = aligned.values
    if X.shape[0] < cfg.n_folds:
        raise TooFewRowsError(
            f"{X.shape[0]} training rows for {cfg.n_folds}-fold cross validation"
        )
    best_alpha, scores = cv_select_alpha(X, Y, cfg)
    meta = {
        "cv_scores": {f"{a:g}": float(s) for a, s in zip(cfg.alpha_grid, scores)},
        "cv_metric": "mean_pearson",
        "fold_seed": str(cfg.fold_seed),
        "n_folds": str(cfg.n_folds),
    }
    return fit_ridge(
        X,
        Y,
        best_alpha,
        trained_on=mode,
        target_model=targets.model_name,
        meta=meta,
    )
