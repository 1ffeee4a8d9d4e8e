"""Batch orchestration: run a grid of (features, mode, ROI) decoding jobs.

A plan executes mask -> train -> evaluate per tuple, writes one JSON report
per tuple plus an aggregate CSV, and renders one SVG bar chart per ROI with
the modality-specific decoders overlaid as markers. Tuples fail
independently: a singular fit in one cell cannot void the rest of the grid.

Tuples run in parallel up to ``NEURODEC_WORKERS`` threads (the heavy work is
BLAS, which releases the GIL); all file writes happen on the submitting
thread.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import io as ndio
from .core import BetaMatrix, assemble_dataset
from .errors import AlignmentMismatchError, NeurodecError
from .metrics import evaluate
from .ridge import CvConfig, TrainedOn, train_decoder
from .roi import RoiName, apply_mask, build_named_mask

ROI_CHOICES = {
    "whole": None,
    "low": RoiName.LOW_LEVEL_VISUAL,
    "high": RoiName.HIGH_LEVEL_VISUAL,
    "language": RoiName.LANGUAGE,
}

MODE_CHOICES = {
    "agnostic": TrainedOn.AGNOSTIC,
    "image": TrainedOn.IMAGE_ONLY,
    "caption": TrainedOn.CAPTION_ONLY,
}

CSV_COLUMNS = (
    "model",
    "feature_modality",
    "mode",
    "roi",
    "acc_captions",
    "acc_images",
    "acc_overall",
    "ci_captions_lo",
    "ci_captions_hi",
    "ci_images_lo",
    "ci_images_hi",
    "ci_overall_lo",
    "ci_overall_hi",
)


@dataclass(frozen=True)
class RunPlan:
    events: str
    betas_train: str
    betas_test: str
    #: (feature file, mode name, roi name) work items
    jobs: tuple
    atlas: str = ""
    out_dir: str = "results"
    alphas: tuple = (1e3, 1e4, 1e5, 1e6, 1e7)
    folds: int = 5
    fold_seed: int = 17
    bootstrap: int = 1000
    eval_seed: int = 7

    def __post_init__(self):
        jobs = tuple((str(f), str(m), str(r)) for f, m, r in self.jobs)
        object.__setattr__(self, "jobs", jobs)
        if len(set(jobs)) != len(jobs):
            raise ValueError("duplicate (features, mode, roi) tuples in plan")
        for _f, mode, roi in jobs:
            if mode not in MODE_CHOICES:
                raise ValueError(f"unknown mode {mode!r}")
            if roi not in ROI_CHOICES:
                raise ValueError(f"unknown roi {roi!r}")
        if any(roi != "whole" for _f, _m, roi in jobs) and not self.atlas:
            raise ValueError("plan uses ROI-restricted jobs but names no atlas file")


def load_plan(path) -> RunPlan:
    """Read a plan from its JSON document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    base = Path(path).parent

    def resolve(p):
        return str(p) if os.path.isabs(p) else str(base / p)

    return RunPlan(
        events=resolve(doc["events"]),
        betas_train=resolve(doc["betas_train"]),
        betas_test=resolve(doc["betas_test"]),
        jobs=tuple(
            (resolve(j["features"]), j["mode"], j["roi"]) for j in doc["jobs"]
        ),
        atlas=resolve(doc["atlas"]) if doc.get("atlas") else "",
        out_dir=resolve(doc.get("out_dir", "results")),
        alphas=tuple(doc.get("alphas", (1e3, 1e4, 1e5, 1e6, 1e7))),
        folds=int(doc.get("folds", 5)),
        fold_seed=int(doc.get("fold_seed", 17)),
        bootstrap=int(doc.get("bootstrap", 1000)),
        eval_seed=int(doc.get("eval_seed", 7)),
    )


def _job_tag(features_path, mode, roi):
    return f"{Path(features_path).stem}__{mode}__{roi}"


def _run_one(plan, ds, masks, job):
    features_path, mode, roi = job
    feats = ndio.read_features(features_path)
    if roi != "whole":
        mask = masks[roi]
        job_ds = assemble_dataset(
            ds.events,
            apply_mask(ds.betas_train, mask),
            apply_mask(ds.betas_test, mask),
        )
    else:
        job_ds = ds
    cfg = CvConfig(alpha_grid=plan.alphas, n_folds=plan.folds, fold_seed=plan.fold_seed)
    decoder = train_decoder(job_ds, feats, MODE_CHOICES[mode], cfg)
    report = evaluate(decoder, job_ds, feats, boot=plan.bootstrap, seed=plan.eval_seed)
    return feats, report


def run_plan(plan: RunPlan) -> dict:
    """Execute every job of a plan; returns the manifest.

    The manifest lists each (features, mode, roi) tuple exactly once with a
    status of ``ok`` or ``failed:<error>``. Exit semantics are the caller's
    business; partial results are valid.
    """
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    events = ndio.read_events(plan.events)
    train_vals, train_ids = ndio.read_matrix(plan.betas_train)
    test_vals, test_ids = ndio.read_matrix(plan.betas_test)
    ds = assemble_dataset(
        events,
        BetaMatrix(train_vals, train_ids, range(train_vals.shape[1])),
        BetaMatrix(test_vals, test_ids, range(test_vals.shape[1])),
    )

    masks = {}
    rois_needed = {roi for _f, _m, roi in plan.jobs if roi != "whole"}
    if rois_needed:
        atlas = ndio.read_atlas(plan.atlas)
        for roi in rois_needed:
            masks[roi] = build_named_mask(ROI_CHOICES[roi], atlas)

    workers = int(os.environ.get("NEURODEC_WORKERS", "0")) or min(4, len(plan.jobs))
    manifest = {"jobs": [], "out_dir": str(out)}
    rows = []
    chart_data = {}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {
            pool.submit(_run_one, plan, ds, masks, job): job for job in plan.jobs
        }
        for future, job in futures.items():
            features_path, mode, roi = job
            tag = _job_tag(*job)
            entry = {"features": features_path, "mode": mode, "roi": roi}
            try:
                feats, report = future.result()
            except NeurodecError as exc:
                entry["status"] = f"failed:{type(exc).__name__}: {exc}"
            except Exception as exc:  # isolate unexpected per-tuple failures too
                entry["status"] = f"failed:{type(exc).__name__}: {exc}"
            else:
                entry["status"] = "ok"
                entry["report"] = f"report_{tag}.json"
                report.to_json(out / entry["report"])
                row = {
                    "model": feats.model_name,
                    "feature_modality": feats.feature_modality.value,
                    "mode": mode,
                    "roi": roi,
                    "acc_captions": report.acc_captions,
                    "acc_images": report.acc_images,
                    "acc_overall": report.acc_overall,
                    "ci_captions_lo": report.ci95_captions[0],
                    "ci_captions_hi": report.ci95_captions[1],
                    "ci_images_lo": report.ci95_images[0],
                    "ci_images_hi": report.ci95_images[1],
                    "ci_overall_lo": report.ci95_overall[0],
                    "ci_overall_hi": report.ci95_overall[1],
                }
                rows.append(row)
                chart_data.setdefault(roi, []).append(row)
            manifest["jobs"].append(entry)

    rows.sort(key=lambda r: (r["roi"], r["model"], r["mode"]))
    with open(out / "aggregate.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    for roi, roi_rows in sorted(chart_data.items()):
        render_roi_chart(roi_rows, out / f"accuracy_{roi}.svg", title=f"ROI: {roi}")
        manifest.setdefault("charts", []).append(f"accuracy_{roi}.svg")

    manifest["aggregate"] = "aggregate.csv"
    manifest["n_ok"] = sum(1 for j in manifest["jobs"] if j["status"] == "ok")
    manifest["n_failed"] = len(manifest["jobs"]) - manifest["n_ok"]
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def render_roi_chart(rows, path, title=""):
    """Bar chart of agnostic accuracies with modality-specific markers.

    Three stacked panels (captions, images, overall), one bar group per
    model: bars show the agnostic decoder with its 95% CI; dots mark the
    caption-trained and crosses the image-trained decoder.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    models = sorted({r["model"] for r in rows})
    by_key = {(r["model"], r["mode"]): r for r in rows}
    panels = (
        ("captions", "acc_captions", "ci_captions_lo", "ci_captions_hi"),
        ("images", "acc_images", "ci_images_lo", "ci_images_hi"),
        ("overall", "acc_overall", "ci_overall_lo", "ci_overall_hi"),
    )
    fig, axes = plt.subplots(3, 1, figsize=(max(6, 1.2 * len(models)), 8), sharex=True)
    xs = range(len(models))
    has_markers = False
    for ax, (label, acc_key, lo_key, hi_key) in zip(axes, panels):
        heights, yerr_lo, yerr_hi = [], [], []
        for m in models:
            row = by_key.get((m, "agnostic"))
            if row is None:
                heights.append(0.0)
                yerr_lo.append(0.0)
                yerr_hi.append(0.0)
            else:
                heights.append(row[acc_key])
                yerr_lo.append(max(0.0, row[acc_key] - row[lo_key]))
                yerr_hi.append(max(0.0, row[hi_key] - row[acc_key]))
        ax.bar(xs, heights, yerr=[yerr_lo, yerr_hi], capsize=3, color="#7fa8d9")
        for marker, mode in ((".", "caption"), ("x", "image")):
            ys = [by_key[(m, mode)][acc_key] if (m, mode) in by_key else None for m in models]
            pts = [(x, y) for x, y in zip(xs, ys) if y is not None]
            if pts:
                ax.scatter(*zip(*pts), marker=marker, color="black", zorder=3,
                           label=f"{mode}-trained")
                has_markers = True
        ax.axhline(0.5, linestyle="--", linewidth=0.8, color="gray")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(label)
    if has_markers:
        axes[0].legend(loc="lower right", fontsize=8)
    axes[0].set_title(title)
    axes[-1].set_xticks(list(xs))
    axes[-1].set_xticklabels(models, rotation=30, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def compare_pooling(features_mean, features_cls, ds, cfg: CvConfig | None = None,
                    bootstrap: int = 200, eval_seed: int = 7):
    """Train and evaluate two pooling variants of the same model side by side.

    Returns one table row per variant; the matrices must cover the same
    stimuli.
    """
    if set(features_mean.stimulus_ids) != set(features_cls.stimulus_ids):
        raise AlignmentMismatchError("pooling variants cover different stimuli")
    cfg = cfg or CvConfig()
    rows = []
    for pooling, feats in (("mean", features_mean), ("cls", features_cls)):
        decoder = train_decoder(ds, feats, TrainedOn.AGNOSTIC, cfg)
        report = evaluate(decoder, ds, feats, boot=bootstrap, seed=eval_seed)
        rows.append(
            {
                "model": feats.model_name,
                "pooling": pooling,
                "acc_captions": report.acc_captions,
                "acc_images": report.acc_images,
                "acc_overall": report.acc_overall,
            }
        )
    return rows
