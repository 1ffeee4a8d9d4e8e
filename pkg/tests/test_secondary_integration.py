"""The extractor's output must load in this package's reader unchanged."""

import subprocess
from pathlib import Path

import numpy as np
import pytest

from neurodec import io as ndio
from neurodec.core import FeatureModality

FRONTEND = Path(__file__).resolve().parent.parent / "frontend"
CLI = FRONTEND / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    not CLI.exists(), reason="frontend not built (cd frontend && npm install && npm run build)"
)


def run_extract(tmp_path, modality, model="vilt-b32-mlm", pooling="mean"):
    tmp_path.mkdir(parents=True, exist_ok=True)
    img = tmp_path / "img.bin"
    img.write_bytes(bytes(range(256)) * 3)
    manifest = tmp_path / "manifest.tsv"
    manifest.write_text(
        f"img_001\t{img}\ta dog runs on grass\n"
        f"img_002\t{img}\ta cat sleeps on a couch\n",
        encoding="utf-8",
    )
    out = tmp_path / f"{modality}.ndm"
    proc = subprocess.run(
        ["node", str(CLI), "--model", model, "--modality", modality,
         "--pooling", pooling, "--manifest", str(manifest), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out


def test_extracted_file_loads_in_primary_reader(tmp_path):
    out = run_extract(tmp_path, "language")
    feats = ndio.read_features(out)  # sidecar provides the metadata
    assert feats.stimulus_ids == ("img_001", "img_002")
    assert feats.feature_modality is FeatureModality.LANGUAGE
    assert feats.model_name == "vilt-b32-mlm"
    assert np.isfinite(feats.values).all()
    assert feats.n_dims == 768


def test_multimodal_dims_are_concatenated(tmp_path):
    vis = run_extract(tmp_path, "vision")
    lang = run_extract(tmp_path, "language")
    multi = run_extract(tmp_path, "multimodal")
    d_v = ndio.read_features(vis).n_dims
    d_l = ndio.read_features(lang).n_dims
    feats = ndio.read_features(multi)
    assert feats.n_dims == d_v + d_l
    assert feats.feature_modality is FeatureModality.MULTIMODAL_CONCAT
    # leading block equals the standalone vision features
    np.testing.assert_array_equal(
        feats.values[:, :d_v], ndio.read_features(vis).values
    )


def test_extraction_is_deterministic(tmp_path):
    a = run_extract(tmp_path / "a", "multimodal")
    b = run_extract(tmp_path / "b", "multimodal")
    assert a.read_bytes() == b.read_bytes()
