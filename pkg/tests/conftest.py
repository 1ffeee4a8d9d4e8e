import numpy as np
import pytest

from neurodec.core import BetaMatrix, Modality, Role, StimulusEvent
from neurodec.synth import SynthConfig, generate


def make_event(sid, modality, onset, role, paired="", run=1, session=1, duration=2.5):
    return StimulusEvent(
        stimulus_id=sid,
        modality=modality,
        onset=onset,
        duration=duration,
        run=run,
        session=session,
        role=role,
        paired_id=paired,
    )


def paired_events(n_train=4, n_test=4):
    """Minimal hand-built event table: balanced train and test pairs."""
    events = []
    onset = 8.0
    for k in range(n_train):
        m = Modality.IMAGE if k % 2 == 0 else Modality.CAPTION
        other = "cap" if m is Modality.IMAGE else "img"
        own = "img" if m is Modality.IMAGE else "cap"
        events.append(
            make_event(f"{own}_tr{k}", m, onset, Role.TRAIN, paired=f"{other}_tr{k}")
        )
        onset += 4.0
    for k in range(n_test):
        m = Modality.IMAGE if k % 2 == 0 else Modality.CAPTION
        other = "cap" if m is Modality.IMAGE else "img"
        own = "img" if m is Modality.IMAGE else "cap"
        events.append(
            make_event(f"{own}_te{k}", m, onset, Role.TEST, paired=f"{other}_te{k}")
        )
        onset += 4.0
    return events


def betas_for(events, role, n_voxels=6, seed=0):
    rng = np.random.default_rng(seed)
    ids = [ev.stimulus_id for ev in events if ev.role is role]
    return BetaMatrix(rng.normal(size=(len(ids), n_voxels)), ids, range(n_voxels))


@pytest.fixture(scope="session")
def tiny_cfg():
    """Fast beta-mode generator config used across tests."""
    return SynthConfig(
        n_train=60,
        n_test=12,
        d_sem=4,
        d_vis=6,
        d_lang=6,
        voxel_blocks=(24, 24, 24, 24),
        noise_sigma=0.25,
        seed=5,
    )


@pytest.fixture(scope="session")
def tiny_result(tiny_cfg):
    return generate(tiny_cfg)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_result):
    return tiny_result.dataset()
