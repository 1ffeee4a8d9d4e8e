"""Seeded forward model for end-to-end verification of the pipeline.

Each synthetic stimulus pair (image i, caption i) shares a semantic latent
s_i. Image trials drive an amodal voxel block (through W_amodal) plus a
vision-only block; caption trials drive the amodal block plus a
language-only block; a final block is pure noise. Synthetic "model" feature
spaces are built from the same latents, so a decoder trained on the
generated data has a known Bayes-optimal linear competitor.

The atlas labels the blocks with the built-in ROI label tables (amodal block
as high-level visual, vision block as low-level visual, language block as
language), so ROI masks select exactly one block each.

Generation is single-threaded per seed and bit-reproducible; distinct
configs may generate concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DEFAULT_STIMULUS_DURATION,
    BetaMatrix,
    Dataset,
    FeatureMatrix,
    FeatureModality,
    Modality,
    Role,
    ScanParams,
    StimulusEvent,
    assemble_dataset,
)
from .errors import InvalidConfigError, MismatchedProvenanceError
from .glm import _convolved_boxcar
from .hrf import HrfParams, canonical_hrf
from .roi import (
    HIGH_LEVEL_VISUAL_LABELS,
    LANGUAGE_LABELS,
    LOW_LEVEL_VISUAL_LABELS,
    AtlasAssignment,
)

#: Atlas label for voxels outside every built-in ROI.
UNASSIGNED_LABEL = ("L", 99, "")


@dataclass(frozen=True)
class SynthConfig:
    n_train: int = 400
    n_test: int = 40
    d_sem: int = 6
    d_vis: int = 12
    d_lang: int = 12
    #: voxel counts: (amodal, vision_only, language_only, noise_only)
    voxel_blocks: tuple = (200, 200, 200, 200)
    noise_sigma: float = 0.5
    feature_sigma: float = 0.0
    #: signal amplitude of the shared-semantic block relative to the
    #: modality-private blocks; < 1 keeps cross-modal transfer partial
    amodal_gain: float = 0.15
    bold_mode: bool = False
    seed: int = 0
    #: presentations per test stimulus when laying out runs
    test_repeats: int = 2
    #: stimulus slots per run
    events_per_run: int = 50
    #: onset-to-onset spacing in seconds
    soa: float = 8.0
    scan: ScanParams | None = None
    hrf: HrfParams = field(default_factory=HrfParams)

    def __post_init__(self):
        if self.n_train < 2 or self.n_train % 2:
            raise InvalidConfigError(f"n_train must be even and >= 2, got {self.n_train}")
        if self.n_test < 4 or self.n_test % 2:
            raise InvalidConfigError(f"n_test must be even and >= 4, got {self.n_test}")
        for name in ("d_sem", "d_vis", "d_lang"):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        blocks = tuple(int(b) for b in self.voxel_blocks)
        object.__setattr__(self, "voxel_blocks", blocks)
        if len(blocks) != 4 or any(b < 0 for b in blocks):
            raise InvalidConfigError("voxel_blocks must be 4 non-negative sizes")
        if not any(b > 0 for b in blocks[:3]):
            raise InvalidConfigError("at least one non-noise voxel block must be > 0")
        if self.noise_sigma < 0 or self.feature_sigma < 0:
            raise InvalidConfigError("noise levels must be non-negative")
        if self.amodal_gain <= 0:
            raise InvalidConfigError("amodal_gain must be positive")
        if self.test_repeats < 1:
            raise InvalidConfigError("test_repeats must be >= 1")
        if self.events_per_run < 1:
            raise InvalidConfigError("events_per_run must be >= 1")
        if self.soa <= 0:
            raise InvalidConfigError("soa must be positive")


@dataclass(frozen=True)
class SynthTruth:
    """Everything the oracle needs: forward weights, latents, clean responses."""

    W_amodal: np.ndarray
    W_vis: np.ndarray
    W_lang: np.ndarray
    #: item index -> (semantic, vision, language) unit latents
    latents: tuple
    #: presented stimulus id -> noiseless voxel response
    clean_betas: dict
    #: presented stimulus id -> modality
    stimulus_modality: dict
    #: presented stimulus id -> counterpart id
    pairing: dict
    #: model names of the feature matrices from the same generate() call
    feature_models: tuple
    seed: int = 0


@dataclass(frozen=True)
class SynthResult:
    config: SynthConfig
    events: tuple
    scan: ScanParams
    hrf: HrfParams
    features: dict
    atlas: AtlasAssignment
    truth: SynthTruth
    betas_train: BetaMatrix | None = None
    betas_test: BetaMatrix | None = None
    bold: dict | None = None

    def dataset(self) -> Dataset:
        if self.betas_train is None:
            raise InvalidConfigError(
                "bold_mode output has no direct betas; run the two-phase GLM first"
            )
        return assemble_dataset(self.events, self.betas_train, self.betas_test)


def _unit_rows(rng, n, d):
    v = rng.normal(size=(n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _item_ids(kind, k):
    return f"img_{kind}{k:05d}", f"cap_{kind}{k:05d}"


def generate(cfg: SynthConfig) -> SynthResult:
    """Draw a complete synthetic experiment from the forward model.

    Returns events, the run layout, feature matrices for a synthetic vision,
    language, and concatenated multimodal "model", an atlas assignment over
    the voxel blocks, the ground truth, and either direct beta matrices or
    per-run BOLD time series depending on ``cfg.bold_mode``.
    """
    n_amodal, n_vis, n_lang, n_noise = cfg.voxel_blocks
    n_voxels = n_amodal + n_vis + n_lang + n_noise
    half_train = cfg.n_train // 2
    half_test = cfg.n_test // 2
    n_items = cfg.n_train + cfg.n_test

    rng_model = np.random.default_rng([cfg.seed, 0])
    W_amodal = cfg.amodal_gain * rng_model.normal(size=(cfg.d_sem, n_amodal))
    W_vis = rng_model.normal(size=(cfg.d_vis, n_vis))
    W_lang = rng_model.normal(size=(cfg.d_lang, n_lang))
    sem = _unit_rows(rng_model, n_items, cfg.d_sem)
    vis = _unit_rows(rng_model, n_items, cfg.d_vis)
    lang = _unit_rows(rng_model, n_items, cfg.d_lang)

    # item k: 0..n_train-1 training items, then n_test test items;
    # the first half of each group is presented as an image, the rest as a caption
    presented = []  # (stimulus_id, paired_id, modality, role, item)
    for k in range(cfg.n_train):
        img, cap = _item_ids("tr", k)
        if k < half_train:
            presented.append((img, cap, Modality.IMAGE, Role.TRAIN, k))
        else:
            presented.append((cap, img, Modality.CAPTION, Role.TRAIN, k))
    for j in range(cfg.n_test):
        img, cap = _item_ids("te", j)
        item = cfg.n_train + j
        if j < half_test:
            presented.append((img, cap, Modality.IMAGE, Role.TEST, item))
        else:
            presented.append((cap, img, Modality.CAPTION, Role.TEST, item))

    def clean_beta(modality, item):
        out = np.zeros(n_voxels)
        out[:n_amodal] = sem[item] @ W_amodal
        if modality is Modality.IMAGE:
            out[n_amodal : n_amodal + n_vis] = vis[item] @ W_vis
        else:
            out[n_amodal + n_vis : n_amodal + n_vis + n_lang] = lang[item] @ W_lang
        return out

    clean = {sid: clean_beta(mod, item) for sid, _p, mod, _r, item in presented}
    modality_of = {sid: mod for sid, _p, mod, _r, _i in presented}
    pairing = {sid: p for sid, p, _m, _r, _i in presented}

    # synthetic model feature spaces; vision rows are indexed by image ids,
    # language rows by caption ids, the concatenation by image ids
    rng_feat = np.random.default_rng([cfg.seed, 1])
    img_ids = [_item_ids("tr", k)[0] for k in range(cfg.n_train)]
    img_ids += [_item_ids("te", j)[0] for j in range(cfg.n_test)]
    cap_ids = [_item_ids("tr", k)[1] for k in range(cfg.n_train)]
    cap_ids += [_item_ids("te", j)[1] for j in range(cfg.n_test)]
    vis_values = np.hstack([sem, vis])
    lang_values = np.hstack([sem, lang])
    if cfg.feature_sigma > 0:
        vis_values = vis_values + cfg.feature_sigma * rng_feat.normal(size=vis_values.shape)
        lang_values = lang_values + cfg.feature_sigma * rng_feat.normal(size=lang_values.shape)
    tag = f"seed{cfg.seed}"
    features = {
        "vision": FeatureMatrix(
            values=vis_values,
            stimulus_ids=img_ids,
            model_name=f"synth_vision_{tag}",
            feature_modality=FeatureModality.VISION,
        ),
        "language": FeatureMatrix(
            values=lang_values,
            stimulus_ids=cap_ids,
            model_name=f"synth_language_{tag}",
            feature_modality=FeatureModality.LANGUAGE,
        ),
        "multimodal": FeatureMatrix(
            values=np.hstack([vis_values, lang_values]),
            stimulus_ids=img_ids,
            model_name=f"synth_multimodal_{tag}",
            feature_modality=FeatureModality.MULTIMODAL_CONCAT,
        ),
    }

    events, scan = _layout_runs(cfg, presented)

    atlas_map = {}
    cycles = (
        (range(0, n_amodal), HIGH_LEVEL_VISUAL_LABELS),
        (range(n_amodal, n_amodal + n_vis), LOW_LEVEL_VISUAL_LABELS),
        (range(n_amodal + n_vis, n_amodal + n_vis + n_lang), LANGUAGE_LABELS),
        (range(n_amodal + n_vis + n_lang, n_voxels), (UNASSIGNED_LABEL,)),
    )
    for voxel_range, labels in cycles:
        for i, v in enumerate(voxel_range):
            hemi, label_id, name = labels[i % len(labels)]
            atlas_map[v] = (hemi, label_id, name)

    truth = SynthTruth(
        W_amodal=W_amodal,
        W_vis=W_vis,
        W_lang=W_lang,
        latents=tuple((sem[i], vis[i], lang[i]) for i in range(n_items)),
        clean_betas=clean,
        stimulus_modality=modality_of,
        pairing=pairing,
        feature_models=tuple(f.model_name for f in features.values()),
        seed=cfg.seed,
    )
    result = SynthResult(
        config=cfg,
        events=tuple(events),
        scan=scan,
        hrf=cfg.hrf,
        features=features,
        atlas=AtlasAssignment(atlas_map),
        truth=truth,
    )

    if cfg.bold_mode:
        return replace(result, bold=_render_bold(cfg, events, scan, clean, n_voxels))

    rng_beta = np.random.default_rng([cfg.seed, 2])
    train_ids = [sid for sid, _p, _m, r, _i in presented if r is Role.TRAIN]
    test_ids = [sid for sid, _p, _m, r, _i in presented if r is Role.TEST]
    train_values = np.vstack([clean[sid] for sid in train_ids])
    test_values = np.vstack([clean[sid] for sid in test_ids])
    if cfg.noise_sigma > 0:
        train_values = train_values + cfg.noise_sigma * rng_beta.normal(size=train_values.shape)
        test_values = test_values + cfg.noise_sigma * rng_beta.normal(size=test_values.shape)
    return replace(
        result,
        betas_train=BetaMatrix(train_values, train_ids, np.arange(n_voxels)),
        betas_test=BetaMatrix(test_values, test_ids, np.arange(n_voxels)),
    )


def _layout_runs(cfg: SynthConfig, presented):
    """Place trials into runs: training runs first, then test runs.

    Test stimuli repeat ``test_repeats`` times with a fixation trial inserted
    after every 10 presentations. Keeping the recurring (test) events out of
    the training runs makes the two-phase estimator exactly unbiased on
    noiseless data, which is what the closed-loop oracle checks.
    """
    train_img = [(sid, p, m) for sid, p, m, r, _i in presented
                 if r is Role.TRAIN and m is Modality.IMAGE]
    train_cap = [(sid, p, m) for sid, p, m, r, _i in presented
                 if r is Role.TRAIN and m is Modality.CAPTION]
    # alternate modalities within runs, like a randomized presentation order
    train = [t for pair in zip(train_img, train_cap) for t in pair]
    test = [(sid, p, m) for sid, p, m, r, _i in presented if r is Role.TEST]

    test_seq = []
    n_since_fix = 0
    for rep in range(cfg.test_repeats):
        for sid, p, m in test:
            test_seq.append((sid, p, m, Role.TEST))
            n_since_fix += 1
            if n_since_fix == 10:
                test_seq.append(("fixation", "", None, Role.FIXATION))
                n_since_fix = 0

    per_run = cfg.events_per_run
    tr = cfg.scan.tr if cfg.scan is not None else 2.0
    lead_in = 8.0
    n_vol_needed = math.ceil((lead_in + per_run * cfg.soa + cfg.hrf.kernel_length) / tr)
    if cfg.scan is not None and cfg.scan.n_volumes_per_run >= n_vol_needed:
        n_vol = cfg.scan.n_volumes_per_run
    else:
        n_vol = n_vol_needed

    events = []
    runs = []
    run_no = 0

    def emit(seq, role_default=None):
        nonlocal run_no
        for start in range(0, len(seq), per_run):
            run_no += 1
            key = (1, run_no)
            runs.append(key)
            for j, (sid, p, m, role) in enumerate(seq[start : start + per_run]):
                events.append(
                    StimulusEvent(
                        stimulus_id=sid,
                        modality=m,
                        onset=lead_in + j * cfg.soa,
                        duration=DEFAULT_STIMULUS_DURATION,
                        run=run_no,
                        session=1,
                        role=role,
                        paired_id=p,
                    )
                )

    emit([(sid, p, m, Role.TRAIN) for sid, p, m in train])
    emit(test_seq)
    scan = ScanParams(tr=tr, n_volumes_per_run=n_vol, runs=runs)
    return events, scan


def _render_bold(cfg: SynthConfig, events, scan: ScanParams, clean, n_voxels):
    """Convolve per-event amplitudes into voxel time series, plus noise."""
    kernel = canonical_hrf(cfg.hrf, scan.tr)
    by_run = {}
    for ev in events:
        by_run.setdefault((ev.session, ev.run), []).append(ev)
    bold = {}
    for r, key in enumerate(scan.runs):
        signal = np.zeros((scan.n_volumes_per_run, n_voxels))
        for ev in by_run.get(key, []):
            if ev.role is Role.FIXATION:
                continue  # baseline event, zero amplitude
            col = _convolved_boxcar([ev.onset], [ev.duration], kernel,
                                    scan.n_volumes_per_run, scan.tr)
            signal += np.outer(col, clean[ev.stimulus_id])
        if cfg.noise_sigma > 0:
            rng = np.random.default_rng([cfg.seed, 3, r])
            signal = signal + cfg.noise_sigma * rng.normal(size=signal.shape)
        bold[key] = signal
    return bold


def _population_readout(truth: SynthTruth, feats: FeatureMatrix):
    """Closed-form regression of features on the noiseless voxel signal.

    Uses the forward model's population moments over the balanced mixture of
    image and caption trials (unit-sphere latents, cross-modal target
    assignment), so finite-sample overfitting of structurally unpredictable
    dimensions cannot occur: a caption trial's modality-private image
    dimensions are simply predicted as zero.
    """
    d_s, n_a = truth.W_amodal.shape
    d_v, n_v = truth.W_vis.shape
    d_l, n_l = truth.W_lang.shape
    n_noise = len(next(iter(truth.clean_betas.values()))) - n_a - n_v - n_l

    def pad(block, start, width, total):
        out = np.zeros((block.shape[0], total))
        out[:, start : start + width] = block
        return out

    total = n_a + n_v + n_l + n_noise
    # E[x x^T] over the trial mixture, blockwise; off-block moments vanish
    sigma = np.zeros((total, total))
    sigma[:n_a, :n_a] = truth.W_amodal.T @ truth.W_amodal / d_s
    sigma[n_a : n_a + n_v, n_a : n_a + n_v] = 0.5 * truth.W_vis.T @ truth.W_vis / d_v
    sigma[n_a + n_v : n_a + n_v + n_l, n_a + n_v : n_a + n_v + n_l] = (
        0.5 * truth.W_lang.T @ truth.W_lang / d_l
    )

    # E[f x^T] rows for the semantic part and each modality-private part
    c_sem = pad(truth.W_amodal / d_s, 0, n_a, total)
    c_vis = pad(0.5 * truth.W_vis / d_v, n_a, n_v, total)
    c_lang = pad(0.5 * truth.W_lang / d_l, n_a + n_v, n_l, total)
    vision_rows = np.vstack([c_sem, c_vis])
    language_rows = np.vstack([c_sem, c_lang])
    if feats.feature_modality is FeatureModality.VISION:
        C = vision_rows
    elif feats.feature_modality is FeatureModality.LANGUAGE:
        C = language_rows
    else:
        C = np.vstack([vision_rows, language_rows])
    return sigma, C


def oracle_best_accuracy(truth: SynthTruth, feats: FeatureMatrix, test_ids,
                         voxel_ids=None) -> float:
    """Retrieval accuracy of the Bayes-optimal linear readout.

    The readout regresses features on the noiseless voxel signal in closed
    form from the ground-truth forward weights and latent moments, then runs
    on the noiseless test responses: an upper bound for any decoder trained
    on the noisy data. Restricting ``voxel_ids`` scores the readout on a
    voxel subset (e.g. a single block); with no informative voxels the
    prediction falls back to the mean target, which scores exactly at chance.

    Returns the mean of the caption-side and image-side accuracies.
    """
    from ._kernels import pairwise_score
    from .metrics import assign_targets, distance_matrix

    if feats.model_name not in truth.feature_models:
        raise MismatchedProvenanceError(
            f"{feats.model_name!r} not generated with this truth "
            f"(expected one of {truth.feature_models})"
        )
    test_ids = list(test_ids)
    unknown = [t for t in test_ids if t not in truth.clean_betas]
    if unknown:
        raise MismatchedProvenanceError(f"unknown test stimuli: {unknown[:5]}")

    sigma, C = _population_readout(truth, feats)
    if voxel_ids is not None:
        sel = np.asarray(list(voxel_ids), dtype=int)
        sigma = sigma[np.ix_(sel, sel)]
        C = C[:, sel]
    else:
        sel = slice(None)
    readout = np.linalg.pinv(sigma) @ C.T

    def pseudo_event(sid):
        return StimulusEvent(
            stimulus_id=sid,
            modality=truth.stimulus_modality[sid],
            onset=0.0,
            duration=0.0,
            run=0,
            session=0,
            role=Role.TEST,
            paired_id=truth.pairing[sid],
        )

    X_test = np.vstack([truth.clean_betas[sid][sel] for sid in test_ids])
    targets = assign_targets([pseudo_event(s) for s in test_ids], feats, truth.pairing).values
    preds = X_test @ readout
    dead = np.linalg.norm(preds, axis=1) == 0
    if dead.any():
        preds[dead] = targets.mean(axis=0)

    D = distance_matrix(preds, targets)
    is_cap = np.array(
        [truth.stimulus_modality[s] is Modality.CAPTION for s in test_ids]
    )
    acc_cap = pairwise_score(D, np.flatnonzero(is_cap))
    acc_img = pairwise_score(D, np.flatnonzero(~is_cap))
    return (acc_cap + acc_img) / 2.0


def write_outputs(result: SynthResult, out_dir):
    """Write a generated experiment to disk in the pipeline's file formats."""
    from pathlib import Path

    from . import io as ndio

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ndio.write_events(out / "events.tsv", result.events)
    ndio.write_atlas(out / "atlas.tsv", result.atlas.mapping)
    files = {"events": "events.tsv", "atlas": "atlas.tsv", "features": {}}
    for name, fm in result.features.items():
        fname = f"features_{name}.ndm"
        ndio.write_matrix(out / fname, fm.values, fm.stimulus_ids)
        with open(out / f"features_{name}.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"model_name": fm.model_name, "feature_modality": fm.feature_modality.value},
                fh,
            )
        files["features"][name] = fname
    if result.bold is not None:
        bold_dir = out / "bold"
        bold_dir.mkdir(exist_ok=True)
        files["bold_dir"] = "bold"
        for (session, run), mat in result.bold.items():
            ndio.write_matrix(
                bold_dir / f"bold_s{session:03d}_r{run:03d}.ndm",
                mat,
                [str(i) for i in range(mat.shape[0])],
            )
    else:
        ndio.write_matrix(
            out / "betas_train.ndm",
            result.betas_train.values,
            result.betas_train.trial_ids,
        )
        ndio.write_matrix(
            out / "betas_test.ndm",
            result.betas_test.values,
            result.betas_test.trial_ids,
        )
        files["betas_train"] = "betas_train.ndm"
        files["betas_test"] = "betas_test.ndm"
    manifest = {
        "seed": result.config.seed,
        "n_train": result.config.n_train,
        "n_test": result.config.n_test,
        "noise_sigma": result.config.noise_sigma,
        "bold_mode": result.config.bold_mode,
        "tr": result.scan.tr,
        "n_volumes_per_run": result.scan.n_volumes_per_run,
        "runs": [list(k) for k in result.scan.runs],
        "files": files,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
