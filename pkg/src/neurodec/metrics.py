"""Target assignment, cosine retrieval accuracy, and bootstrap intervals.

A trial's target row is its own model features when the stimulus modality
matches the feature space, and the cross-modal counterpart's features
otherwise, so an image seen by the subject can be scored in a language
model's space through its paired caption (and vice versa).

Everything here is a pure function over immutable arrays; bootstrap
resamples use per-resample generators derived from the master seed by
counter mixing, so they are order-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._kernels import bootstrap_scores, pairwise_score
from .core import Dataset, FeatureMatrix, FeatureModality, Modality, Role
from .errors import (
    MissingTargetError,
    ShapeMismatchError,
    TooFewRowsError,
    ZeroVectorError,
)


def cosine_distance(a, b) -> float:
    """1 minus the cosine of the angle between two vectors, in [0, 2].

    Computed as half the squared distance of the unit vectors, which is the
    same quantity but exact for identical inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVectorError("cosine distance of a zero vector")
    diff = a / na - b / nb
    return float((diff @ diff) / 2.0)


def _unit_rows(M, what):
    norms = np.linalg.norm(M, axis=1)
    if (norms == 0).any():
        raise ZeroVectorError(f"{what} contains zero-norm rows")
    return M / norms[:, None]


def distance_matrix(preds, targets) -> np.ndarray:
    """Cosine distances between every prediction row and every target row."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeMismatchError(f"preds {preds.shape} vs targets {targets.shape}")
    return 1.0 - _unit_rows(preds, "predictions") @ _unit_rows(targets, "targets").T


def pairwise_accuracy(preds, targets, *, variant="ordered") -> float:
    """Fraction of test pairs where a prediction retrieves its own target.

    For every ordered pair (i, j), i != j, the prediction for item i is
    compared against its own target and item j's target by cosine distance;
    exact distance ties count one half. Chance level is 0.5. The 'symmetric'
    variant scores unordered pairs by the summed two-against-two distances
    instead.

    Parameters
    ----------
    preds, targets : ndarray (n, d)
        Row-aligned predictions and target features, n >= 2.
    variant : {'ordered', 'symmetric'}

    Returns
    -------
    float in [0, 1]
    """
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] < 2:
        raise TooFewRowsError("pairwise accuracy needs at least 2 aligned rows")
    D = distance_matrix(preds, targets)
    if variant == "ordered":
        return pairwise_score(D, np.arange(D.shape[0]))
    if variant == "symmetric":
        own = np.diag(D)
        correct = own[:, None] + own[None, :]
        crossed = D + D.T
        iu = np.triu_indices(D.shape[0], k=1)
        wins = (correct[iu] < crossed[iu]).sum() + 0.5 * (correct[iu] == crossed[iu]).sum()
        return float(wins / len(iu[0]))
    raise ValueError(f"unknown variant {variant!r}")


def assign_targets(stimuli, feats: FeatureMatrix, pairing) -> FeatureMatrix:
    """Build the row-aligned target matrix for a list of stimulus events.

    Vision feature spaces are indexed by image ids and language spaces by
    caption ids, so a stimulus of the other modality resolves through its
    pair. Concatenated multimodal rows may be indexed by either member of the
    pair; the stimulus's own id is tried first.
    """
    rows = []
    for ev in stimuli:
        own = ev.stimulus_id
        paired = ev.paired_id or pairing.get(own, "")
        if feats.feature_modality is FeatureModality.VISION:
            lookup = own if ev.modality is Modality.IMAGE else paired
        elif feats.feature_modality is FeatureModality.LANGUAGE:
            lookup = own if ev.modality is Modality.CAPTION else paired
        else:  # concatenated pair representation, indexed by either member
            lookup = own if feats.has(own) else paired
        if not lookup:
            raise MissingTargetError(f"stimulus {own!r} has no pair to resolve features")
        try:
            rows.append(feats.row(lookup))
        except KeyError:
            raise MissingTargetError(
                f"no feature row for {lookup!r} (stimulus {own!r}, "
                f"{feats.feature_modality.value} space)"
            ) from None
    return FeatureMatrix(
        values=np.vstack(rows) if rows else np.zeros((0, feats.n_dims)),
        stimulus_ids=[ev.stimulus_id for ev in stimuli],
        model_name=feats.model_name,
        feature_modality=feats.feature_modality,
    )


@dataclass(frozen=True)
class EvalReport:
    acc_captions: float
    acc_images: float
    acc_overall: float
    ci95_captions: tuple
    ci95_images: tuple
    ci95_overall: tuple
    n_test: int
    decoder_meta: dict

    def __post_init__(self):
        assert abs(self.acc_overall - (self.acc_captions + self.acc_images) / 2.0) <= 1e-12

    def to_dict(self) -> dict:
        return {
            "acc_captions": self.acc_captions,
            "acc_images": self.acc_images,
            "acc_overall": self.acc_overall,
            "ci95_captions": list(self.ci95_captions),
            "ci95_images": list(self.ci95_images),
            "ci95_overall": list(self.ci95_overall),
            "n_test": self.n_test,
            "decoder_meta": dict(self.decoder_meta),
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _resample_matrix(idx, boot, seed, stream):
    """Per-resample index draws; each row uses its own counter-mixed rng."""
    n = idx.shape[0]
    out = np.empty((boot, n), dtype=np.int64)
    for b in range(boot):
        rng = np.random.default_rng([seed, stream, b])
        out[b] = idx[rng.integers(0, n, size=n)]
    return out


def evaluate(decoder, ds: Dataset, feats: FeatureMatrix, boot: int = 1000,
             seed: int = 0) -> EvalReport:
    """Score a decoder on the held-out test stimuli of both modalities.

    Predictions for the test beta rows are compared to assigned targets with
    cosine distance. Retrieval accuracy is computed separately over caption
    stimuli and image stimuli (distractors drawn from the same presentation
    modality) and averaged for the overall score. Confidence intervals are
    95% percentile bootstrap over test items.

    Parameters
    ----------
    decoder : RidgeDecoder
    ds : Dataset
    feats : FeatureMatrix
    boot : int
        Number of bootstrap resamples, >= 1.
    seed : int
        Master seed; reports are bitwise reproducible given identical inputs.
    """
    if ds.betas_test.n_trials == 0:
        raise TooFewRowsError("empty test beta matrix")
    if boot < 1:
        raise ValueError(f"boot must be >= 1, got {boot}")
    test_events = {}
    for ev in ds.events:
        if ev.role is Role.TEST and ev.stimulus_id not in test_events:
            test_events[ev.stimulus_id] = ev
    try:
        stimuli = [test_events[tid] for tid in ds.betas_test.trial_ids]
    except KeyError as exc:
        raise MissingTargetError(f"test row {exc.args[0]!r} has no test event") from exc

    preds = decoder.predict(ds.betas_test.values)
    targets = assign_targets(stimuli, feats, ds.pairing)
    D = distance_matrix(preds, targets.values)

    modalities = np.array([ev.modality is Modality.CAPTION for ev in stimuli])
    cap_idx = np.flatnonzero(modalities)
    img_idx = np.flatnonzero(~modalities)
    if len(cap_idx) < 2 or len(img_idx) < 2:
        raise TooFewRowsError(
            f"need >= 2 test stimuli per modality, got "
            f"{len(cap_idx)} captions / {len(img_idx)} images"
        )

    acc_cap = pairwise_score(D, cap_idx)
    acc_img = pairwise_score(D, img_idx)

    cap_boot = bootstrap_scores(D, _resample_matrix(cap_idx, boot, seed, 0))
    img_boot = bootstrap_scores(D, _resample_matrix(img_idx, boot, seed, 1))
    overall_boot = (cap_boot + img_boot) / 2.0

    def ci(samples):
        lo, hi = np.percentile(samples, [2.5, 97.5])
        return (float(lo), float(hi))

    meta = {
        "alpha": f"{decoder.alpha:g}",
        "trained_on": decoder.trained_on.value,
        "target_model": decoder.target_model,
        "n_voxels": str(decoder.n_voxels),
        "eval_seed": str(seed),
        "bootstrap": str(boot),
        "ci_method": "percentile_over_test_items",
    }
    for key, value in (decoder.meta or {}).items():
        meta[key] = value if isinstance(value, str) else json.dumps(value)

    return EvalReport(
        acc_captions=acc_cap,
        acc_images=acc_img,
        acc_overall=(acc_cap + acc_img) / 2.0,
        ci95_captions=ci(cap_boot),
        ci95_images=ci(img_boot),
        ci95_overall=ci(overall_boot),
        n_test=ds.betas_test.n_trials,
        decoder_meta=meta,
    )
