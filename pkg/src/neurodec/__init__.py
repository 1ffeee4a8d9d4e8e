"""Modality-agnostic fMRI decoding toolkit.

Pipeline: two-phase GLM estimation of single-trial responses, multi-target
ridge decoders with cross-validated regularization, cosine pairwise-accuracy
evaluation with cross-modal target assignment, ROI-restricted decoding, and
a synthetic forward model for end-to-end verification.
"""

from .core import (
    BetaMatrix,
    Dataset,
    FeatureMatrix,
    FeatureModality,
    Modality,
    Role,
    ScanParams,
    StimulusEvent,
    assemble_dataset,
    select_modality,
)
from .glm import DesignMatrix, GlmFit, Grouping, build_design, fit_ols, two_phase_betas
from .hrf import HrfParams, canonical_hrf
from .metrics import (
    EvalReport,
    assign_targets,
    cosine_distance,
    evaluate,
    pairwise_accuracy,
)
from .ridge import (
    CvConfig,
    RidgeDecoder,
    TrainedOn,
    cv_select_alpha,
    fit_ridge,
    predict,
    train_decoder,
)
from .roi import RoiMask, RoiName, apply_mask, build_mask, build_named_mask, load_roi_definition
from .synth import SynthConfig, SynthResult, SynthTruth, generate, oracle_best_accuracy

__version__ = "0.1.0"

__all__ = [
    "BetaMatrix",
    "CvConfig",
    "Dataset",
    "DesignMatrix",
    "EvalReport",
    "FeatureMatrix",
    "FeatureModality",
    "GlmFit",
    "Grouping",
    "HrfParams",
    "Modality",
    "RidgeDecoder",
    "Role",
    "RoiMask",
    "RoiName",
    "ScanParams",
    "StimulusEvent",
    "SynthConfig",
    "SynthResult",
    "SynthTruth",
    "TrainedOn",
    "apply_mask",
    "assemble_dataset",
    "assign_targets",
    "build_design",
    "build_mask",
    "build_named_mask",
    "canonical_hrf",
    "cosine_distance",
    "cv_select_alpha",
    "evaluate",
    "fit_ols",
    "fit_ridge",
    "generate",
    "load_roi_definition",
    "oracle_best_accuracy",
    "pairwise_accuracy",
    "predict",
    "select_modality",
    "train_decoder",
    "two_phase_betas",
]
