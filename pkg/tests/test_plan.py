import csv
import json
from pathlib import Path

import numpy as np
import pytest

from neurodec import io as ndio
from neurodec.errors import AlignmentMismatchError
from neurodec.plan import RunPlan, compare_pooling, load_plan, run_plan
from neurodec.synth import SynthConfig, generate, write_outputs


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    cfg = SynthConfig(
        n_train=60, n_test=12, d_sem=4, d_vis=6, d_lang=6,
        voxel_blocks=(20, 20, 20, 20), noise_sigma=0.25, seed=4,
    )
    write_outputs(generate(cfg), out)
    return out


def plan_doc(synth_dir, out_dir, jobs):
    return {
        "events": str(synth_dir / "events.tsv"),
        "betas_train": str(synth_dir / "betas_train.ndm"),
        "betas_test": str(synth_dir / "betas_test.ndm"),
        "atlas": str(synth_dir / "atlas.tsv"),
        "out_dir": str(out_dir),
        "jobs": jobs,
        "folds": 3,
        "fold_seed": 17,
        "bootstrap": 40,
        "eval_seed": 7,
    }


def full_grid_jobs(synth_dir):
    return [
        {"features": str(synth_dir / f"features_{f}.ndm"), "mode": m, "roi": r}
        for f in ("vision", "language", "multimodal")
        for m in ("agnostic", "image", "caption")
        for r in ("whole", "low", "high", "language")
    ]


def test_full_grid_runs(tmp_path, synth_dir):
    doc = plan_doc(synth_dir, tmp_path / "results", full_grid_jobs(synth_dir))
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(doc), encoding="utf-8")
    manifest = run_plan(load_plan(plan_path))

    assert len(manifest["jobs"]) == 36
    assert manifest["n_ok"] == 36
    assert manifest["n_failed"] == 0
    out = Path(manifest["out_dir"])
    reports = list(out.glob("report_*.json"))
    assert len(reports) == 36
    assert (out / "aggregate.csv").exists()
    for roi in ("whole", "low", "high", "language"):
        assert (out / f"accuracy_{roi}.svg").exists()

    # every tuple listed exactly once
    seen = {(j["features"], j["mode"], j["roi"]) for j in manifest["jobs"]}
    assert len(seen) == 36

    # aggregate CSV values equal the per-tuple reports exactly
    with open(out / "aggregate.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 36
    by_key = {}
    for job in manifest["jobs"]:
        doc = json.loads((out / job["report"]).read_text(encoding="utf-8"))
        model = doc["decoder_meta"]["target_model"]
        by_key[(model, job["mode"], job["roi"])] = doc
    for row in rows:
        doc = by_key[(row["model"], row["mode"], row["roi"])]
        assert float(row["acc_overall"]) == doc["acc_overall"]
        assert float(row["ci_captions_lo"]) == doc["ci95_captions"][0]
        assert float(row["ci_images_hi"]) == doc["ci95_images"][1]


def test_rerun_is_bit_identical(tmp_path, synth_dir):
    jobs = [
        {"features": str(synth_dir / "features_vision.ndm"), "mode": "agnostic", "roi": r}
        for r in ("whole", "high")
    ]
    doc_a = plan_doc(synth_dir, tmp_path / "a", jobs)
    doc_b = plan_doc(synth_dir, tmp_path / "b", jobs)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    pa.write_text(json.dumps(doc_a), encoding="utf-8")
    pb.write_text(json.dumps(doc_b), encoding="utf-8")
    run_plan(load_plan(pa))
    run_plan(load_plan(pb))
    assert (tmp_path / "a/aggregate.csv").read_bytes() == (
        tmp_path / "b/aggregate.csv"
    ).read_bytes()


def test_failure_isolation(tmp_path, synth_dir):
    # a feature file covering the wrong stimuli fails its tuple, not the run
    bogus = tmp_path / "bogus.ndm"
    ndio.write_matrix(bogus, np.ones((3, 4)), ["x1", "x2", "x3"])
    (tmp_path / "bogus.json").write_text(
        json.dumps({"model_name": "bogus", "feature_modality": "vision"}),
        encoding="utf-8",
    )
    jobs = [
        {"features": str(synth_dir / "features_vision.ndm"), "mode": "agnostic", "roi": "whole"},
        {"features": str(bogus), "mode": "agnostic", "roi": "whole"},
    ]
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(
        json.dumps(plan_doc(synth_dir, tmp_path / "results", jobs)), encoding="utf-8"
    )
    manifest = run_plan(load_plan(plan_path))
    statuses = {j["features"]: j["status"] for j in manifest["jobs"]}
    assert statuses[str(synth_dir / "features_vision.ndm")] == "ok"
    assert statuses[str(bogus)].startswith("failed:")
    assert manifest["n_ok"] == 1 and manifest["n_failed"] == 1


def test_plan_validation(synth_dir):
    with pytest.raises(ValueError):
        RunPlan(
            events="e", betas_train="b", betas_test="t",
            jobs=(("f", "agnostic", "whole"), ("f", "agnostic", "whole")),
        )
    with pytest.raises(ValueError):
        RunPlan(events="e", betas_train="b", betas_test="t",
                jobs=(("f", "agnostic", "nowhere"),))
    with pytest.raises(ValueError):
        # ROI job without an atlas
        RunPlan(events="e", betas_train="b", betas_test="t",
                jobs=(("f", "agnostic", "high"),))


def test_compare_pooling_identical_inputs(tiny_result, tiny_dataset):
    from neurodec.ridge import CvConfig

    feats = tiny_result.features["vision"]
    rows = compare_pooling(feats, feats, tiny_dataset,
                           cfg=CvConfig(fold_seed=2), bootstrap=10)
    assert len(rows) == 2
    assert {r["pooling"] for r in rows} == {"mean", "cls"}
    assert rows[0]["acc_overall"] == rows[1]["acc_overall"]
    assert rows[0]["acc_captions"] == rows[1]["acc_captions"]


def test_compare_pooling_clean_beats_corrupted(tiny_result, tiny_dataset):
    from neurodec.core import FeatureMatrix
    from neurodec.ridge import CvConfig

    feats = tiny_result.features["multimodal"]
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        corrupted = FeatureMatrix(
            values=feats.values + 2.0 * rng.normal(size=feats.values.shape),
            stimulus_ids=feats.stimulus_ids,
            model_name=feats.model_name,
            feature_modality=feats.feature_modality,
        )
        rows = compare_pooling(feats, corrupted, tiny_dataset,
                               cfg=CvConfig(fold_seed=seed), bootstrap=5)
        wins += rows[0]["acc_overall"] >= rows[1]["acc_overall"]
    assert wins >= 8  # clean features win essentially always


def test_compare_pooling_alignment_checked(tiny_result, tiny_dataset):
    from neurodec.core import FeatureMatrix

    feats = tiny_result.features["vision"]
    other = FeatureMatrix(
        values=feats.values[:5],
        stimulus_ids=feats.stimulus_ids[:5],
        model_name=feats.model_name,
        feature_modality=feats.feature_modality,
    )
    with pytest.raises(AlignmentMismatchError):
        compare_pooling(feats, other, tiny_dataset)
