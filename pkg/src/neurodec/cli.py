"""Command-line entry points for the decoding pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import io as ndio
from .core import BetaMatrix, ScanParams, assemble_dataset
from .glm import two_phase_betas
from .hrf import HrfParams
from .metrics import evaluate as evaluate_op
from .plan import MODE_CHOICES, ROI_CHOICES, load_plan, run_plan
from .ridge import CvConfig, RidgeDecoder, TrainedOn, train_decoder
from .roi import RoiName, apply_mask, build_mask, build_named_mask, load_roi_definition
from .synth import SynthConfig, generate, write_outputs


@click.group()
def main():
    """Modality-agnostic fMRI decoding pipeline."""


def _load_dataset(dataset_dir):
    d = Path(dataset_dir)
    events = ndio.read_events(d / "events.tsv")
    train_vals, train_ids = ndio.read_matrix(d / "betas_train.ndm")
    test_vals, test_ids = ndio.read_matrix(d / "betas_test.ndm")
    return assemble_dataset(
        events,
        BetaMatrix(train_vals, train_ids, range(train_vals.shape[1])),
        BetaMatrix(test_vals, test_ids, range(test_vals.shape[1])),
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON document mirroring the generator config fields.")
@click.option("--out-dir", required=True, type=click.Path())
def simulate(config_path, out_dir):
    """Generate a synthetic dataset from the forward model."""
    kwargs = {}
    if config_path:
        kwargs = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if "voxel_blocks" in kwargs:
            kwargs["voxel_blocks"] = tuple(kwargs["voxel_blocks"])
        if "hrf" in kwargs:
            kwargs["hrf"] = HrfParams(**kwargs["hrf"])
        if "scan" in kwargs:
            kwargs["scan"] = ScanParams(**kwargs["scan"])
    cfg = SynthConfig(**kwargs)
    result = generate(cfg)
    write_outputs(result, out_dir)
    click.echo(f"wrote synthetic dataset to {out_dir}")


@main.command("fit-glm")
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--bold-dir", required=True, type=click.Path(exists=True))
@click.option("--tr", default=2.0, show_default=True)
@click.option("--out-train", required=True, type=click.Path())
@click.option("--out-test", required=True, type=click.Path())
def fit_glm(events_path, bold_dir, tr, out_train, out_test):
    """Estimate single-trial and test-condition betas with the two-phase GLM.

    Expects one bold_s{SSS}_r{RRR}.ndm matrix (volumes x voxels) per run
    named in the events file.
    """
    events = ndio.read_events(events_path)
    runs = sorted({(ev.session, ev.run) for ev in events})
    bold = {}
    n_vol = None
    for session, run in runs:
        path = Path(bold_dir) / f"bold_s{session:03d}_r{run:03d}.ndm"
        if not path.exists():
            raise click.ClickException(f"missing BOLD file {path}")
        values, _ids = ndio.read_matrix(path)
        bold[(session, run)] = values
        if n_vol is None:
            n_vol = values.shape[0]
        elif values.shape[0] != n_vol:
            raise click.ClickException(f"{path}: run lengths differ")
    scan = ScanParams(tr=tr, n_volumes_per_run=n_vol, runs=runs)
    betas_train, betas_test = two_phase_betas(events, bold, scan, HrfParams())
    ndio.write_matrix(out_train, betas_train.values, betas_train.trial_ids)
    ndio.write_matrix(out_test, betas_test.values, betas_test.trial_ids)
    click.echo(
        f"wrote {betas_train.n_trials} trial betas and "
        f"{betas_test.n_trials} test betas over {betas_train.n_voxels} voxels"
    )


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True),
              help="Directory with events.tsv, betas_train.ndm, betas_test.ndm.")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(sorted(MODE_CHOICES)), default="agnostic",
              show_default=True)
@click.option("--alphas", default="1e3,1e4,1e5,1e6,1e7", show_default=True)
@click.option("--folds", default=5, show_default=True)
@click.option("--seed", default=17, show_default=True, help="Fold shuffle seed.")
@click.option("--out", "out_path", required=True, type=click.Path())
def train(dataset_dir, features_path, mode, alphas, folds, seed, out_path):
    """Train a ridge decoder with cross-validated penalty selection."""
    ds = _load_dataset(dataset_dir)
    feats = ndio.read_features(features_path)
    cfg = CvConfig(
        alpha_grid=tuple(float(a) for a in alphas.split(",")),
        n_folds=folds,
        fold_seed=seed,
    )
    decoder = train_decoder(ds, feats, MODE_CHOICES[mode], cfg)
    header = {
        "alpha": decoder.alpha,
        "trained_on": decoder.trained_on.value,
        "target_model": decoder.target_model,
        "feature_modality": feats.feature_modality.value,
        "intercept": decoder.intercept.tolist(),
        "x_mean": decoder.x_mean.tolist(),
        "x_scale": decoder.x_scale.tolist(),
        "meta": decoder.meta or {},
    }
    ndio.write_decoder(out_path, decoder.weights, ds.betas_train.voxel_ids, header)
    click.echo(f"trained {mode} decoder (alpha={decoder.alpha:g}) -> {out_path}")


def _load_decoder(path):
    weights, _voxel_ids, header = ndio.read_decoder(path)
    return RidgeDecoder(
        weights=weights.astype(np.float64),
        intercept=np.asarray(header["intercept"], dtype=np.float64),
        alpha=float(header["alpha"]),
        x_mean=np.asarray(header["x_mean"], dtype=np.float64),
        x_scale=np.asarray(header["x_scale"], dtype=np.float64),
        trained_on=TrainedOn(header["trained_on"]),
        target_model=header.get("target_model", ""),
        meta=header.get("meta") or None,
    )


@main.command()
@click.option("--decoder", "decoder_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--bootstrap", default=1000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def evaluate(decoder_path, dataset_dir, features_path, bootstrap, seed, out_path):
    """Score a decoder on the held-out test stimuli."""
    ds = _load_dataset(dataset_dir)
    feats = ndio.read_features(features_path)
    decoder = _load_decoder(decoder_path)
    report = evaluate_op(decoder, ds, feats, boot=bootstrap, seed=seed)
    report.to_json(out_path)
    click.echo(
        f"captions {report.acc_captions:.3f}  images {report.acc_images:.3f}  "
        f"overall {report.acc_overall:.3f} -> {out_path}"
    )


@main.command()
@click.option("--atlas", "atlas_path", required=True, type=click.Path(exists=True))
@click.option("--roi", required=True,
              type=click.Choice(sorted(set(ROI_CHOICES) - {"whole"} | {"custom"})))
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None,
              help="TSV of 'HEMI<TAB>label_id' rows for --roi custom.")
@click.option("--betas", "betas_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def mask(atlas_path, roi, labels_path, betas_path, out_path):
    """Restrict a beta matrix to an ROI's voxels."""
    atlas = ndio.read_atlas(atlas_path)
    if roi == "custom":
        if not labels_path:
            raise click.ClickException("--roi custom requires --labels")
        defn = []
        for line in Path(labels_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                hemi, label_id = line.split("\t")
                defn.append((hemi, int(label_id), ""))
        roi_mask = build_mask(defn, atlas, RoiName.CUSTOM)
    else:
        roi_mask = build_named_mask(ROI_CHOICES[roi], atlas)
    values, ids = ndio.read_matrix(betas_path)
    betas = BetaMatrix(values, ids, range(values.shape[1]))
    masked = apply_mask(betas, roi_mask)
    ndio.write_matrix(out_path, masked.values, masked.trial_ids)
    click.echo(f"{roi}: kept {masked.n_voxels} of {betas.n_voxels} voxels -> {out_path}")


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
def run(plan_path):
    """Execute a decoding grid from a plan JSON; exit 2 on partial failure."""
    manifest = run_plan(load_plan(plan_path))
    click.echo(f"{manifest['n_ok']} ok, {manifest['n_failed']} failed -> {manifest['out_dir']}")
    if manifest["n_failed"]:
        sys.exit(2)


@main.command("compare-pooling")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--features-mean", required=True, type=click.Path(exists=True))
@click.option("--features-cls", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def compare_pooling_cmd(dataset_dir, features_mean, features_cls, out_path):
    """Compare token-mean vs CLS pooled features for the same model."""
    from .plan import compare_pooling

    ds = _load_dataset(dataset_dir)
    rows = compare_pooling(
        ndio.read_features(features_mean), ndio.read_features(features_cls), ds
    )
    import csv

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        click.echo(f"{row['model']} [{row['pooling']}]: overall {row['acc_overall']:.3f}")


@main.command("roi-info")
@click.option("--roi", required=True, type=click.Choice(sorted(set(ROI_CHOICES) - {"whole"})))
def roi_info(roi):
    """Print the label table of a built-in ROI."""
    for hemi, label_id, name in load_roi_definition(ROI_CHOICES[roi]):
        click.echo(f"{hemi}\t{label_id}\t{name}")


if __name__ == "__main__":
    main()
