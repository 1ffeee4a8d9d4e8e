"""Region-of-interest masks from anatomical atlas label assignments.

The three built-in regions are fixed lists of (hemisphere, label id, label
string) rows over the Destrieux cortical parcellation: a high-level visual
set in the temporal lobe, a low-level visual set around the occipital lobe,
and a left-lateralized language set. They are non-overlapping on any atlas
that assigns a single label per voxel.

Voxel identity is a flat integer index into the masked voxel vector; no 3-D
geometry is involved. All types here are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import BetaMatrix
from .errors import EmptyMaskError, UnknownRoiError, UnknownVoxelError


class RoiName(Enum):
    LOW_LEVEL_VISUAL = "low_level_visual"
    HIGH_LEVEL_VISUAL = "high_level_visual"
    LANGUAGE = "language"
    CUSTOM = "custom"


HIGH_LEVEL_VISUAL_LABELS = (
    ("L", 21, "G_oc-temp_lat-fusifor"),
    ("R", 21, "G_oc-temp_lat-fusifor"),
    ("L", 23, "G_oc-temp_med-Parahip"),
    ("R", 23, "G_oc-temp_med-Parahip"),
    ("L", 61, "S_oc-temp_med_and_Lingual"),
    ("R", 61, "S_oc-temp_med_and_Lingual"),
    ("L", 60, "S_oc-temp_lat"),
    ("R", 60, "S_oc-temp_lat"),
    ("L", 37, "G_temporal_inf"),
    ("L", 38, "G_temporal_middle"),
    ("L", 72, "S_temporal_inf"),
    ("R", 37, "G_temporal_inf"),
    ("R", 38, "G_temporal_middle"),
    ("R", 72, "S_temporal_inf"),
)

LOW_LEVEL_VISUAL_LABELS = (
    ("L", 2, "G_and_S_occipital_inf"),
    ("L", 19, "G_occipital_middle"),
    ("L", 20, "G_occipital_sup"),
    ("L", 42, "Pole_occipital"),
    ("L", 57, "S_oc_middle_and_Lunatus"),
    ("L", 58, "S_oc_sup_and_transversal"),
    ("L", 59, "S_occipital_ant"),
    ("L", 65, "S_parieto_occipital"),
    ("R", 2, "G_and_S_occipital_inf"),
    ("R", 19, "G_occipital_middle"),
    ("R", 20, "G_occipital_sup"),
    ("R", 42, "Pole_occipital"),
    ("R", 57, "S_oc_middle_and_Lunatus"),
    ("R", 58, "S_oc_sup_and_transversal"),
    ("R", 59, "S_occipital_ant"),
    ("R", 65, "S_parieto_occipital"),
    ("L", 22, "G_oc-temp_med-Lingual"),
    ("R", 22, "G_oc-temp_med-Lingual"),
)

LANGUAGE_LABELS = (
    ("L", 12, "G_front_inf-Opercular"),
    ("L", 13, "G_front_inf-Orbital"),
    ("L", 14, "G_front_inf-Triangul"),
    ("L", 25, "G_pariet_inf-Angular"),
    ("L", 15, "G_front_middle"),
    ("L", 34, "G_temp_sup-Lateral"),
    ("L", 36, "G_temp_sup-Plan_tempo"),
    ("L", 35, "G_temp_sup-Plan_polar"),
    ("L", 4, "G_and_S_subcentral"),
    ("L", 26, "G_pariet_inf-Supramar"),
    ("L", 9, "G_cingul-Post-dorsal"),
    ("L", 10, "G_cingul-Post-ventral"),
)

_DEFINITIONS = {
    RoiName.HIGH_LEVEL_VISUAL: HIGH_LEVEL_VISUAL_LABELS,
    RoiName.LOW_LEVEL_VISUAL: LOW_LEVEL_VISUAL_LABELS,
    RoiName.LANGUAGE: LANGUAGE_LABELS,
}

_LABEL_NAMES = {
    label_id: name
    for rows in _DEFINITIONS.values()
    for _, label_id, name in rows
}


def label_name(label_id: int) -> str:
    """Label string for a known atlas label id, '' if not embedded."""
    return _LABEL_NAMES.get(label_id, "")


@dataclass(frozen=True)
class AtlasAssignment:
    """Per-voxel atlas assignment: voxel_id -> (hemisphere, label id, name)."""

    mapping: dict

    def __post_init__(self):
        if not self.mapping:
            raise ValueError("atlas assignment is empty")

    def voxels_for(self, hemi: str, label_id: int):
        return [
            v
            for v, (h, lid, _name) in self.mapping.items()
            if h == hemi and lid == label_id
        ]


@dataclass(frozen=True)
class RoiMask:
    name: RoiName
    voxel_ids: tuple
    source_labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "voxel_ids", tuple(sorted(set(int(v) for v in self.voxel_ids))))
        object.__setattr__(self, "source_labels", tuple(self.source_labels))


def load_roi_definition(name: RoiName):
    """Return the (hemisphere, label id, label string) rows for a built-in ROI."""
    try:
        return list(_DEFINITIONS[name])
    except KeyError:
        raise UnknownRoiError(f"no built-in definition for {name}") from None


def build_mask(defn, atlas: AtlasAssignment, name: RoiName = RoiName.CUSTOM) -> RoiMask:
    """Collect every atlas voxel whose (hemisphere, label id) is in the definition.

    Raises EmptyMaskError if nothing matched.
    """
    wanted = {(hemi, label_id) for hemi, label_id, *_ in defn}
    voxels = [
        v
        for v, (h, lid, _name) in atlas.mapping.items()
        if (h, lid) in wanted
    ]
    if not voxels:
        raise EmptyMaskError(f"no atlas voxel matches {name.value}")
    return RoiMask(name=name, voxel_ids=voxels, source_labels=sorted(wanted))


def build_named_mask(name: RoiName, atlas: AtlasAssignment) -> RoiMask:
    return build_mask(load_roi_definition(name), atlas, name)


def apply_mask(b: BetaMatrix, m: RoiMask) -> BetaMatrix:
    """Restrict a beta matrix to the mask's voxels, preserving column order."""
    wanted = set(m.voxel_ids)
    unknown = wanted - set(b.voxel_ids)
    if unknown:
        raise UnknownVoxelError(f"mask voxels absent from matrix: {sorted(unknown)[:5]}")
    keep = [j for j, v in enumerate(b.voxel_ids) if v in wanted]
    return BetaMatrix(
        values=b.values[:, keep],
        trial_ids=b.trial_ids,
        voxel_ids=[b.voxel_ids[j] for j in keep],
    )
