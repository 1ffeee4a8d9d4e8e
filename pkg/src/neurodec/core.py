"""Domain types shared by every pipeline stage.

All types are immutable after construction and safe to share across
concurrent workers; construction itself is single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DuplicateTrialError,
    EmptyDatasetError,
    MissingPairError,
    ShapeMismatchError,
)


class Modality(Enum):
    IMAGE = "image"
    CAPTION = "caption"


class Role(Enum):
    TRAIN = "train"
    TEST = "test"
    FIXATION = "fixation"
    BLANK = "blank"
    ONEBACK_TARGET = "oneback_target"


#: Roles that correspond to an actual stimulus presentation.
STIMULUS_ROLES = frozenset({Role.TRAIN, Role.TEST, Role.ONEBACK_TARGET})


@dataclass(frozen=True)
class StimulusEvent:
    """One stimulus presentation inside a run.

    ``paired_id`` names the cross-modal counterpart (the matching caption for
    an image and vice versa); it is empty for fixations and blanks.
    """

    stimulus_id: str
    modality: Modality | None
    onset: float
    duration: float
    run: int
    session: int
    role: Role
    paired_id: str = ""

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset} for {self.stimulus_id!r}")
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration} for {self.stimulus_id!r}")
        if self.role in (Role.TRAIN, Role.TEST) and self.modality is None:
            raise ValueError(f"{self.role.value} event {self.stimulus_id!r} needs a modality")


#: Default presentation length in seconds.
DEFAULT_STIMULUS_DURATION = 2.5
#: Default gap between consecutive stimuli in seconds.
DEFAULT_ISI = 1.0


@dataclass(frozen=True)
class ScanParams:
    """Acquisition geometry: repetition time and run layout."""

    tr: float
    n_volumes_per_run: int
    runs: tuple = ()

    def __post_init__(self):
        if self.tr <= 0:
            raise ValueError(f"tr must be positive, got {self.tr}")
        if self.n_volumes_per_run <= 0:
            raise ValueError(f"n_volumes_per_run must be positive, got {self.n_volumes_per_run}")
        object.__setattr__(self, "runs", tuple((int(s), int(r)) for s, r in self.runs))

    @property
    def run_duration(self) -> float:
        return self.tr * self.n_volumes_per_run


def _check_finite(values, what):
    if not np.isfinite(values).all():
        raise ShapeMismatchError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class BetaMatrix:
    """Trials-by-voxels matrix of response amplitude estimates.

    ``values`` is float32, one row per trial id, one column per voxel id.
    """

    values: np.ndarray
    trial_ids: tuple
    voxel_ids: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "trial_ids", tuple(self.trial_ids))
        object.__setattr__(self, "voxel_ids", tuple(int(v) for v in self.voxel_ids))
        if values.ndim != 2:
            raise ShapeMismatchError(f"beta values must be 2-D, got ndim={values.ndim}")
        if len(self.trial_ids) != values.shape[0]:
            raise ShapeMismatchError(
                f"{len(self.trial_ids)} trial ids for {values.shape[0]} rows"
            )
        if len(self.voxel_ids) != values.shape[1]:
            raise ShapeMismatchError(
                f"{len(self.voxel_ids)} voxel ids for {values.shape[1]} columns"
            )
        if len(set(self.trial_ids)) != len(self.trial_ids):
            raise DuplicateTrialError("trial ids are not unique")
        _check_finite(values, "beta matrix")

    @property
    def n_trials(self) -> int:
        return self.values.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.values.shape[1]


class FeatureModality(Enum):
    VISION = "vision"
    LANGUAGE = "language"
    MULTIMODAL_CONCAT = "multimodal_concat"


@dataclass(frozen=True)
class FeatureMatrix:
    """Stimuli-by-dimensions matrix of model-derived target features."""

    values: np.ndarray
    stimulus_ids: tuple
    model_name: str
    feature_modality: FeatureModality

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "stimulus_ids", tuple(self.stimulus_ids))
        if values.ndim != 2:
            raise ShapeMismatchError(f"feature values must be 2-D, got ndim={values.ndim}")
        if len(self.stimulus_ids) != values.shape[0]:
            raise ShapeMismatchError(
                f"{len(self.stimulus_ids)} stimulus ids for {values.shape[0]} rows"
            )
        if len(set(self.stimulus_ids)) != len(self.stimulus_ids):
            raise DuplicateTrialError("stimulus ids are not unique")
        _check_finite(values, "feature matrix")

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    def row(self, stimulus_id: str) -> np.ndarray:
        return self.values[self.index(stimulus_id)]

    def index(self, stimulus_id: str) -> int:
        try:
            return self._index[stimulus_id]
        except AttributeError:
            object.__setattr__(
                self, "_index", {sid: i for i, sid in enumerate(self.stimulus_ids)}
            )
            return self._index[stimulus_id]

    def has(self, stimulus_id: str) -> bool:
        try:
            self.index(stimulus_id)
            return True
        except KeyError:
            return False


@dataclass(frozen=True)
class Dataset:
    """Validated bundle of events, train/test betas, and the pairing map."""

    events: tuple
    betas_train: BetaMatrix
    betas_test: BetaMatrix
    pairing: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def events_for(self, role: Role):
        return [ev for ev in self.events if ev.role is role]

    def modality_of(self, stimulus_id: str) -> Modality:
        try:
            return self._modality[stimulus_id]
        except AttributeError:
            object.__setattr__(
                self,
                "_modality",
                {
                    ev.stimulus_id: ev.modality
                    for ev in self.events
                    if ev.modality is not None
                },
            )
            return self._modality[stimulus_id]


def validate_events(events):
    """Check event-table invariants shared by every consumer.

    Enforces strictly increasing onsets within each run, single presentation
    of training stimuli, non-empty cross-modal pairing for train/test events,
    and train/test id disjointness.
    """
    if not events:
        raise EmptyDatasetError("no events")
    by_run = {}
    for ev in events:
        by_run.setdefault((ev.session, ev.run), []).append(ev)
    for key, run_events in by_run.items():
        onsets = [ev.onset for ev in run_events]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ShapeMismatchError(f"onsets not strictly increasing in run {key}")

    train_ids = [ev.stimulus_id for ev in events if ev.role is Role.TRAIN]
    if len(set(train_ids)) != len(train_ids):
        dupes = sorted({t for t in train_ids if train_ids.count(t) > 1})
        raise DuplicateTrialError(f"training stimuli presented more than once: {dupes[:5]}")
    test_ids = {ev.stimulus_id for ev in events if ev.role is Role.TEST}
    overlap = set(train_ids) & test_ids
    if overlap:
        raise DuplicateTrialError(f"stimuli with both train and test roles: {sorted(overlap)[:5]}")

    modality = {}
    for ev in events:
        if ev.modality is not None:
            modality[ev.stimulus_id] = ev.modality
    for ev in events:
        if ev.role in (Role.TRAIN, Role.TEST):
            if not ev.paired_id:
                raise MissingPairError(f"{ev.role.value} event {ev.stimulus_id!r} has no pair")
            if ev.paired_id in modality and modality[ev.paired_id] is ev.modality:
                raise MissingPairError(
                    f"{ev.stimulus_id!r} pairs to same-modality {ev.paired_id!r}"
                )


def assemble_dataset(events, betas_train: BetaMatrix, betas_test: BetaMatrix) -> Dataset:
    """Cross-validate events against beta matrices and build the pairing map.

    Every row of ``betas_train`` must match exactly one training event, and
    ``betas_test`` must hold one row per unique test stimulus.

    Parameters
    ----------
    events : sequence of StimulusEvent
    betas_train, betas_test : BetaMatrix

    Returns
    -------
    Dataset
    """
    validate_events(events)
    train_ids = {ev.stimulus_id for ev in events if ev.role is Role.TRAIN}
    test_ids = {ev.stimulus_id for ev in events if ev.role is Role.TEST}

    missing = set(betas_train.trial_ids) - train_ids
    if missing:
        raise ShapeMismatchError(f"train beta rows without a train event: {sorted(missing)[:5]}")
    missing = train_ids - set(betas_train.trial_ids)
    if missing:
        raise ShapeMismatchError(f"train events without a beta row: {sorted(missing)[:5]}")
    if set(betas_test.trial_ids) != test_ids:
        raise ShapeMismatchError(
            f"test beta rows do not match test stimuli "
            f"({len(betas_test.trial_ids)} rows, {len(test_ids)} stimuli)"
        )

    pairing = {}
    for ev in events:
        if ev.role in (Role.TRAIN, Role.TEST):
            pairing[ev.stimulus_id] = ev.paired_id
    return Dataset(
        events=tuple(events),
        betas_train=betas_train,
        betas_test=betas_test,
        pairing=pairing,
    )


def select_modality(ds: Dataset, m: Modality) -> Dataset:
    """Restrict the training set to trials of one presentation modality.

    The test set is untouched: evaluation always covers both modalities.
    Idempotent; may return a dataset with zero training rows.
    """
    keep_ids = {
        ev.stimulus_id
        for ev in ds.events
        if ev.role is Role.TRAIN and ev.modality is m
    }
    keep_rows = [i for i, tid in enumerate(ds.betas_train.trial_ids) if tid in keep_ids]
    betas = BetaMatrix(
        values=ds.betas_train.values[keep_rows],
        trial_ids=[ds.betas_train.trial_ids[i] for i in keep_rows],
        voxel_ids=ds.betas_train.voxel_ids,
    )
    events = tuple(
        ev
        for ev in ds.events
        if ev.role is not Role.TRAIN or ev.modality is m
    )
    return Dataset(events=events, betas_train=betas, betas_test=ds.betas_test, pairing=ds.pairing)
