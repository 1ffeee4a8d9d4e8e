"""Design-matrix construction and the two-phase GLM.

The first phase fits one design across all runs with a regressor per
recurring condition (each test stimulus, plus fixation, blank, and one-back
classes) and per-run baseline columns; its residuals feed a second phase
fitted per run with one regressor per training trial, yielding single-trial
amplitude estimates.

Per-run second-phase fits are independent of each other; they read a shared
residual matrix and may execute concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BetaMatrix, Role, ScanParams
from .errors import (
    EmptyDesignError,
    EventOutOfRangeError,
    NumericalFailureError,
    ShapeMismatchError,
)
from .hrf import HrfParams, canonical_hrf


class Grouping(Enum):
    #: one column per recurring condition (test stimulus / fixation / blank / one-back)
    PER_CONDITION = "per_condition"
    #: one column per training trial
    PER_TRIAL = "per_trial"


_CLASS_COLUMNS = {
    Role.FIXATION: "class:fixation",
    Role.BLANK: "class:blank",
    Role.ONEBACK_TARGET: "class:oneback",
}


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    regressor_names: tuple
    includes_intercept: bool

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "regressor_names", tuple(self.regressor_names))
        if self.values.shape[1] != len(self.regressor_names):
            raise ShapeMismatchError(
                f"{len(self.regressor_names)} names for {self.values.shape[1]} columns"
            )
        if not np.isfinite(self.values).all():
            raise ShapeMismatchError("design matrix contains non-finite entries")


@dataclass(frozen=True)
class GlmFit:
    """Least-squares fit: per-regressor betas plus the residual time series."""

    betas: np.ndarray
    residuals: np.ndarray
    regressor_names: tuple
    rank_deficient: bool = False


def _convolved_boxcar(onsets, durations, kernel, n_volumes, tr):
    """HRF response to a set of events, sampled at volume times k*tr."""
    box = np.zeros(n_volumes)
    t = np.arange(n_volumes) * tr
    for onset, duration in zip(onsets, durations):
        box += ((t >= onset) & (t < onset + duration)).astype(float)
    return np.convolve(box, kernel)[:n_volumes]


def build_design(events, grouping: Grouping, scan: ScanParams, hrf: HrfParams) -> DesignMatrix:
    """Build an HRF-convolved design for the events of one or more runs.

    Each event contributes a boxcar over [onset, onset + duration) sampled at
    volume times, convolved with the response kernel. Runs listed in
    ``scan.runs`` are stacked vertically in order; condition columns are
    shared across runs. A constant intercept column is appended, plus one
    baseline-offset column per run after the first so every run keeps its own
    baseline.

    In PER_TRIAL grouping each training event gets its own column (one-back
    target trials are excluded); in PER_CONDITION grouping each test stimulus
    id gets one column and the fixation, blank, and one-back classes get one
    column each.

    Raises
    ------
    EventOutOfRangeError
        If an event does not fit inside its run, or belongs to a run that is
        not listed in ``scan.runs``.
    EmptyDesignError
        If no event-derived column results.
    """
    runs = list(scan.runs)
    if not runs:
        runs = sorted({(ev.session, ev.run) for ev in events})
    run_index = {key: i for i, key in enumerate(runs)}
    n_vol = scan.n_volumes_per_run
    n_runs = len(runs)
    if n_runs == 0:
        raise EmptyDesignError("no runs")

    by_column = {}   # name -> per-run {run_key: (onsets, durations)}
    order = []
    for ev in events:
        key = (ev.session, ev.run)
        if key not in run_index:
            raise EventOutOfRangeError(f"event {ev.stimulus_id!r} in unknown run {key}")
        if ev.onset + ev.duration > scan.run_duration:
            raise EventOutOfRangeError(
                f"event {ev.stimulus_id!r} at {ev.onset}+{ev.duration}s exceeds "
                f"run duration {scan.run_duration}s"
            )
        if grouping is Grouping.PER_TRIAL:
            if ev.role is not Role.TRAIN:
                continue
            name = f"trial:{ev.stimulus_id}"
        else:
            if ev.role is Role.TEST:
                name = f"cond:{ev.stimulus_id}"
            elif ev.role in _CLASS_COLUMNS:
                name = _CLASS_COLUMNS[ev.role]
            else:
                continue
        if name not in by_column:
            by_column[name] = {}
            order.append(name)
        by_column[name].setdefault(key, ([], []))
        by_column[name][key][0].append(ev.onset)
        by_column[name][key][1].append(ev.duration)

    if not order:
        raise EmptyDesignError(f"no {grouping.value} regressors in the event table")

    kernel = canonical_hrf(hrf, scan.tr)
    values = np.zeros((n_runs * n_vol, len(order)))
    for j, name in enumerate(order):
        for key, (onsets, durations) in by_column[name].items():
            r = run_index[key]
            values[r * n_vol : (r + 1) * n_vol, j] = _convolved_boxcar(
                onsets, durations, kernel, n_vol, scan.tr
            )

    names = list(order)
    columns = [values, np.ones((n_runs * n_vol, 1))]
    names.append("intercept")
    for r, key in enumerate(runs[1:], start=1):
        offset = np.zeros((n_runs * n_vol, 1))
        offset[r * n_vol : (r + 1) * n_vol] = 1.0
        columns.append(offset)
        names.append(f"baseline:s{key[0]}r{key[1]}")
    return DesignMatrix(
        values=np.hstack(columns), regressor_names=names, includes_intercept=True
    )


def fit_ols(X: DesignMatrix, Y: np.ndarray) -> GlmFit:
    """Ordinary least squares of every voxel column of Y on the design.

    Rank-deficient designs resolve to the minimum-norm solution and are
    flagged rather than rejected, since per-trial designs can be nearly
    collinear at short inter-stimulus intervals.

    Parameters
    ----------
    X : DesignMatrix
    Y : ndarray (n_volumes, n_voxels)

    Returns
    -------
    GlmFit
        Betas of shape (n_regressors, n_voxels) and residuals Y - X @ betas.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != X.values.shape[0]:
        raise ShapeMismatchError(
            f"Y has shape {Y.shape}, design has {X.values.shape[0]} rows"
        )
    betas, _, rank, _ = np.linalg.lstsq(X.values, Y, rcond=None)
    if not np.isfinite(betas).all():
        raise NumericalFailureError("least-squares produced non-finite betas")
    residuals = Y - X.values @ betas
    return GlmFit(
        betas=betas,
        residuals=residuals,
        regressor_names=X.regressor_names,
        rank_deficient=rank < X.values.shape[1],
    )


def two_phase_betas(events, bold, scan: ScanParams, hrf: HrfParams):
    """Run the two-phase GLM over per-run BOLD matrices.

    Phase 1 fits a single PER_CONDITION design across all runs (stacked, with
    per-run baselines). Phase 2 fits one PER_TRIAL design per run on the
    phase-1 residuals. Runs without training events contribute no trial rows.

    Parameters
    ----------
    events : sequence of StimulusEvent
        Events of every run.
    bold : mapping (session, run) -> ndarray (n_volumes, n_voxels)
    scan : ScanParams
        ``scan.runs`` fixes the stacking order; every run needs a BOLD entry.
    hrf : HrfParams

    Returns
    -------
    (BetaMatrix, BetaMatrix)
        Training-trial betas (one row per trial, in run order then onset
        order) and test-condition betas (one row per test stimulus).
    """
    runs = list(scan.runs) or sorted({(ev.session, ev.run) for ev in events})
    if not runs:
        raise EmptyDesignError("no runs")
    scan = ScanParams(tr=scan.tr, n_volumes_per_run=scan.n_volumes_per_run, runs=runs)
    missing = [key for key in runs if key not in bold]
    if missing:
        raise ShapeMismatchError(f"runs without BOLD data: {missing[:5]}")
    n_vol = scan.n_volumes_per_run
    n_voxels = None
    for key in runs:
        mat = np.asarray(bold[key])
        if mat.shape[0] != n_vol:
            raise ShapeMismatchError(
                f"run {key}: {mat.shape[0]} volumes, expected {n_vol}"
            )
        if n_voxels is None:
            n_voxels = mat.shape[1]
        elif mat.shape[1] != n_voxels:
            raise ShapeMismatchError(f"run {key}: voxel count differs across runs")

    Y = np.vstack([np.asarray(bold[key], dtype=np.float64) for key in runs])
    design1 = build_design(events, Grouping.PER_CONDITION, scan, hrf)
    fit1 = fit_ols(design1, Y)

    test_rows = [
        (name[len("cond:"):], i)
        for i, name in enumerate(fit1.regressor_names)
        if name.startswith("cond:")
    ]
    betas_test = BetaMatrix(
        values=fit1.betas[[i for _, i in test_rows]],
        trial_ids=[sid for sid, _ in test_rows],
        voxel_ids=np.arange(n_voxels),
    )

    events_by_run = {}
    for ev in events:
        events_by_run.setdefault((ev.session, ev.run), []).append(ev)

    trial_blocks = []
    trial_ids = []
    for r, key in enumerate(runs):
        run_events = sorted(events_by_run.get(key, []), key=lambda ev: ev.onset)
        train_events = [ev for ev in run_events if ev.role is Role.TRAIN]
        if not train_events:
            continue
        run_scan = ScanParams(tr=scan.tr, n_volumes_per_run=n_vol, runs=[key])
        design2 = build_design(run_events, Grouping.PER_TRIAL, run_scan, hrf)
        resid = fit1.residuals[r * n_vol : (r + 1) * n_vol]
        fit2 = fit_ols(design2, resid)
        for i, name in enumerate(fit2.regressor_names):
            if name.startswith("trial:"):
                trial_ids.append(name[len("trial:"):])
                trial_blocks.append(fit2.betas[i])

    if trial_blocks:
        train_values = np.vstack(trial_blocks)
    else:
        train_values = np.zeros((0, n_voxels))
    betas_train = BetaMatrix(
        values=train_values,
        trial_ids=trial_ids,
        voxel_ids=np.arange(n_voxels),
    )
    return betas_train, betas_test
