import numpy as np
import pytest

from neurodec.core import (
    BetaMatrix,
    Modality,
    Role,
    assemble_dataset,
    select_modality,
)
from neurodec.errors import (
    DuplicateTrialError,
    EmptyDatasetError,
    MissingPairError,
    ShapeMismatchError,
)
from neurodec.synth import SynthConfig, generate

from tests.conftest import betas_for, make_event, paired_events


def test_assemble_counts():
    events = paired_events(n_train=6, n_test=4)
    ds = assemble_dataset(
        events,
        betas_for(events, Role.TRAIN),
        betas_for(events, Role.TEST),
    )
    assert ds.betas_train.n_trials == 6
    assert ds.betas_test.n_trials == 4
    assert len(ds.pairing) == 10


def test_paper_shaped_test_set():
    # 140 test stimuli, 70 per modality
    events = paired_events(n_train=2, n_test=140)
    ds = assemble_dataset(
        events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST)
    )
    assert ds.betas_test.n_trials == 140
    caps = sum(
        1 for ev in ds.events if ev.role is Role.TEST and ev.modality is Modality.CAPTION
    )
    assert caps == 70


def test_empty_events_rejected():
    empty = BetaMatrix(np.zeros((0, 3)), [], range(3))
    with pytest.raises(EmptyDatasetError):
        assemble_dataset([], empty, empty)


def test_pairing_counts_from_generator():
    r = generate(
        SynthConfig(n_train=50, n_test=10, d_sem=3, d_vis=3, d_lang=3,
                    voxel_blocks=(10, 10, 10, 10), noise_sigma=0.0, seed=1)
    )
    ds = r.dataset()
    assert len(ds.pairing) == 60


def test_test_id_with_train_role_rejected():
    events = paired_events(4, 4)
    clash = make_event(
        "img_te0", Modality.IMAGE, events[-1].onset + 5.0, Role.TRAIN, paired="cap_te0"
    )
    events = events + [clash]
    with pytest.raises(DuplicateTrialError):
        assemble_dataset(events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST))


def test_duplicate_train_presentation_rejected():
    events = paired_events(4, 2)
    dup = make_event(
        "img_tr0", Modality.IMAGE, events[-1].onset + 5.0, Role.TRAIN, paired="cap_tr0"
    )
    events = events + [dup]
    with pytest.raises(DuplicateTrialError):
        assemble_dataset(events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST))


def test_nonincreasing_onsets_rejected():
    events = paired_events(4, 2)
    events[1] = make_event(
        events[1].stimulus_id, events[1].modality, events[0].onset,
        Role.TRAIN, paired=events[1].paired_id,
    )
    with pytest.raises(ShapeMismatchError):
        assemble_dataset(events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST))


def test_missing_pair_rejected():
    events = paired_events(4, 2)
    events[0] = make_event("img_tr0", Modality.IMAGE, events[0].onset, Role.TRAIN, paired="")
    with pytest.raises(MissingPairError):
        assemble_dataset(events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST))


def test_same_modality_pair_rejected():
    events = paired_events(4, 2)
    # point one train image at another image id
    events[0] = make_event(
        "img_tr0", Modality.IMAGE, events[0].onset, Role.TRAIN, paired="img_tr2"
    )
    with pytest.raises(MissingPairError):
        assemble_dataset(events, betas_for(events, Role.TRAIN), betas_for(events, Role.TEST))


def test_beta_row_without_event_rejected():
    events = paired_events(4, 2)
    train = betas_for(events, Role.TRAIN)
    bad = BetaMatrix(
        np.vstack([train.values, np.zeros((1, train.n_voxels), dtype=np.float32)]),
        list(train.trial_ids) + ["ghost"],
        train.voxel_ids,
    )
    with pytest.raises(ShapeMismatchError):
        assemble_dataset(events, bad, betas_for(events, Role.TEST))


def test_select_modality_balanced_split():
    r = generate(
        SynthConfig(n_train=100, n_test=4, d_sem=3, d_vis=3, d_lang=3,
                    voxel_blocks=(8, 8, 8, 8), noise_sigma=0.0, seed=2)
    )
    ds = r.dataset()
    imgs = select_modality(ds, Modality.IMAGE)
    caps = select_modality(ds, Modality.CAPTION)
    assert imgs.betas_train.n_trials == 50
    assert caps.betas_train.n_trials == 50
    # partition: no trial fabricated or lost
    assert set(imgs.betas_train.trial_ids) | set(caps.betas_train.trial_ids) == set(
        ds.betas_train.trial_ids
    )
    assert not set(imgs.betas_train.trial_ids) & set(caps.betas_train.trial_ids)
    # test set untouched
    assert imgs.betas_test is ds.betas_test


def test_select_modality_idempotent(tiny_dataset):
    once = select_modality(tiny_dataset, Modality.IMAGE)
    twice = select_modality(once, Modality.IMAGE)
    assert once.betas_train.trial_ids == twice.betas_train.trial_ids
    np.testing.assert_array_equal(once.betas_train.values, twice.betas_train.values)


def test_paper_shaped_subject_split():
    # per-subject trial counts like 8568 split evenly by modality
    r = generate(
        SynthConfig(n_train=8568, n_test=4, d_sem=2, d_vis=2, d_lang=2,
                    voxel_blocks=(4, 4, 4, 4), noise_sigma=0.0, seed=3)
    )
    ds = r.dataset()
    assert ds.betas_train.n_trials == 8568
    retained = select_modality(ds, Modality.IMAGE).betas_train.n_trials
    assert retained == 8568 // 2


def test_beta_matrix_validation():
    with pytest.raises(DuplicateTrialError):
        BetaMatrix(np.zeros((2, 2)), ["a", "a"], range(2))
    with pytest.raises(ShapeMismatchError):
        BetaMatrix(np.zeros((2, 2)), ["a"], range(2))
    with pytest.raises(ShapeMismatchError):
        BetaMatrix(np.array([[np.nan, 0.0]]), ["a"], range(2))
