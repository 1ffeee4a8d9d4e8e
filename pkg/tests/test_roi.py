import numpy as np
import pytest

from neurodec.core import BetaMatrix
from neurodec.errors import EmptyMaskError, UnknownRoiError, UnknownVoxelError
from neurodec.ridge import fit_ridge
from neurodec.roi import (
    AtlasAssignment,
    RoiName,
    apply_mask,
    build_mask,
    build_named_mask,
    load_roi_definition,
)


def test_definition_row_counts():
    assert len(load_roi_definition(RoiName.HIGH_LEVEL_VISUAL)) == 14
    assert len(load_roi_definition(RoiName.LOW_LEVEL_VISUAL)) == 18
    assert len(load_roi_definition(RoiName.LANGUAGE)) == 12


def test_language_roi_is_left_lateralized():
    rows = load_roi_definition(RoiName.LANGUAGE)
    assert all(hemi == "L" for hemi, _id, _name in rows)
    assert ("L", 25, "G_pariet_inf-Angular") in rows  # angular gyrus, left only


def test_low_level_contains_occipital_pole():
    rows = load_roi_definition(RoiName.LOW_LEVEL_VISUAL)
    assert ("L", 42, "Pole_occipital") in rows
    assert ("R", 42, "Pole_occipital") in rows
    assert ("L", 22, "G_oc-temp_med-Lingual") in rows  # lingual gyrus included


def test_high_level_is_bilateral_fusiform():
    rows = load_roi_definition(RoiName.HIGH_LEVEL_VISUAL)
    pairs = {(h, i) for h, i, _ in rows}
    assert ("L", 21) in pairs and ("R", 21) in pairs


def test_unknown_roi():
    with pytest.raises(UnknownRoiError):
        load_roi_definition(RoiName.CUSTOM)


def test_build_mask_membership():
    atlas = AtlasAssignment(
        {v: ("L", 42, "Pole_occipital") for v in range(100)}
        | {v: ("R", 21, "G_oc-temp_lat-fusifor") for v in range(100, 130)}
    )
    mask = build_named_mask(RoiName.LOW_LEVEL_VISUAL, atlas)
    assert set(range(100)) <= set(mask.voxel_ids)
    assert not set(range(100, 130)) & set(mask.voxel_ids)


def test_build_mask_empty():
    atlas = AtlasAssignment({0: ("L", 42, "Pole_occipital")})
    with pytest.raises(EmptyMaskError):
        build_named_mask(RoiName.HIGH_LEVEL_VISUAL, atlas)  # no temporal labels


def test_masks_disjoint_on_synthetic_atlas(tiny_result):
    masks = [
        set(build_named_mask(name, tiny_result.atlas).voxel_ids)
        for name in (RoiName.HIGH_LEVEL_VISUAL, RoiName.LOW_LEVEL_VISUAL, RoiName.LANGUAGE)
    ]
    assert not masks[0] & masks[1]
    assert not masks[0] & masks[2]
    assert not masks[1] & masks[2]


def test_synth_atlas_masks_select_blocks(tiny_result):
    amodal, vis, lang, _ = tiny_result.config.voxel_blocks
    high = build_named_mask(RoiName.HIGH_LEVEL_VISUAL, tiny_result.atlas)
    low = build_named_mask(RoiName.LOW_LEVEL_VISUAL, tiny_result.atlas)
    language = build_named_mask(RoiName.LANGUAGE, tiny_result.atlas)
    assert high.voxel_ids == tuple(range(amodal))
    assert low.voxel_ids == tuple(range(amodal, amodal + vis))
    assert language.voxel_ids == tuple(range(amodal + vis, amodal + vis + lang))


def test_apply_mask_identity_and_idempotence(tiny_result, tiny_dataset):
    betas = tiny_dataset.betas_train
    full = build_mask(
        [(h, i, n) for h, i, n in set(tiny_result.atlas.mapping.values())],
        tiny_result.atlas,
    )
    same = apply_mask(betas, full)
    np.testing.assert_array_equal(same.values, betas.values)
    assert same.voxel_ids == betas.voxel_ids

    mask = build_named_mask(RoiName.LANGUAGE, tiny_result.atlas)
    once = apply_mask(betas, mask)
    twice = apply_mask(once, mask)
    np.testing.assert_array_equal(once.values, twice.values)
    assert once.trial_ids == betas.trial_ids


def test_apply_mask_unknown_voxel():
    betas = BetaMatrix(np.zeros((2, 3)), ["a", "b"], [0, 1, 2])
    atlas = AtlasAssignment({7: ("L", 42, "")})
    mask = build_named_mask(RoiName.LOW_LEVEL_VISUAL, atlas)
    with pytest.raises(UnknownVoxelError):
        apply_mask(betas, mask)


def test_masked_column_sets_disjoint(tiny_result, tiny_dataset):
    cols = []
    for name in (RoiName.HIGH_LEVEL_VISUAL, RoiName.LOW_LEVEL_VISUAL, RoiName.LANGUAGE):
        mask = build_named_mask(name, tiny_result.atlas)
        cols.append(set(apply_mask(tiny_dataset.betas_train, mask).voxel_ids))
    assert not cols[0] & cols[1] and not cols[0] & cols[2] and not cols[1] & cols[2]


def test_masked_training_weight_equivalence(tiny_result, tiny_dataset):
    """Training on a masked matrix equals slicing the columns by hand."""
    mask = build_named_mask(RoiName.HIGH_LEVEL_VISUAL, tiny_result.atlas)
    betas = tiny_dataset.betas_train
    masked = apply_mask(betas, mask)

    keep = [j for j, v in enumerate(betas.voxel_ids) if v in set(mask.voxel_ids)]
    sliced = betas.values[:, keep]
    np.testing.assert_array_equal(masked.values, sliced)

    rng = np.random.default_rng(0)
    Y = rng.normal(size=(betas.n_trials, 3))
    a = fit_ridge(masked.values, Y, alpha=1e4)
    b = fit_ridge(sliced, Y, alpha=1e4)
    assert (a.weights == b.weights).all()  # bit-identical
    assert (a.x_mean == b.x_mean).all()
