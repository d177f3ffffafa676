import csv
import hashlib
import json

import numpy as np

from vadagent.cli import main
from vadagent.config import load_config
from vadagent.pipeline import read_manifest, run_dataset

from conftest import build_dataset


def digest_tree(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def run_cli(config, manifest, out, *extra):
    return main(["run", "--config", str(config), "--manifest", str(manifest), "--out", str(out), *extra])


def test_two_video_run(tmp_path):
    config, manifest = build_dataset(tmp_path / "data")
    out = tmp_path / "out"
    assert run_cli(config, manifest, out) == 0
    for vid in ("video00", "video01"):
        rows = list(csv.DictReader(open(out / vid / "frames.csv")))
        assert len(rows) == 640
        assert list(rows[0]) == ["frame_index", "g", "p", "L", "L_smooth", "p_hat"]
        windows = [json.loads(line) for line in open(out / vid / "windows.jsonl")]
        assert [w["window_start"] for w in windows] == list(range(0, 576, 64))
        assert [w["flag"] for w in windows] == [0, 0, 0, 0, 1, 1, 1, 0, 0]
        assert (out / vid / "curve.svg").read_text().lstrip().startswith("<?xml")
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["failed"] == []
    assert metrics["micro"]["auc"] == 1.0
    assert metrics["macro"]["auc"] == 1.0
    assert metrics["post"] == {"alpha": 0.05, "sigma1": 5.0, "sigma2": 0.3}


def test_rerun_is_bitwise_identical(tmp_path):
    config, manifest = build_dataset(tmp_path / "data")
    assert run_cli(config, manifest, tmp_path / "a") == 0
    assert run_cli(config, manifest, tmp_path / "b") == 0
    assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")


def test_poisoned_video_is_contained(tmp_path):
    config, manifest = build_dataset(tmp_path / "data", n_videos=3, poison=("video01",))
    out = tmp_path / "out"
    assert run_cli(config, manifest, out, "--workers", "2") == 1
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["failed"] == ["video01"]
    assert "expected" in metrics["videos"]["video01"]["error"]
    assert (out / "video00" / "frames.csv").exists() and (out / "video02" / "frames.csv").exists()
    assert not (out / "video01").exists()


def test_label_length_mismatch_fails_video(tmp_path):
    config, manifest = build_dataset(tmp_path / "data", n_videos=1)
    (tmp_path / "data" / "video00.txt").write_text("0\n1\n")
    assert run_cli(config, manifest, tmp_path / "out") == 1


def test_unlabeled_video_has_no_metrics(tmp_path):
    config, manifest = build_dataset(tmp_path / "data", n_videos=1)
    manifest.write_text(json.dumps({"video00": {"frames": "video00.raw"}}))
    assert run_cli(config, manifest, tmp_path / "out") == 0
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert metrics["micro"] is None and metrics["macro"] is None


def test_manifest_paths_relative(tmp_path):
    config, manifest = build_dataset(tmp_path / "data", n_videos=2)
    specs = read_manifest(manifest)
    assert [s.video_id for s in specs] == ["video00", "video01"]
    assert specs[0].frames == (tmp_path / "data" / "video00.raw").resolve()


def test_http_backends_end_to_end(tmp_path, stub_server):
    stub_server.content = json.dumps({"anomaly_score": 0, "confidence": 0.9, "reasoning": "ok", "crime_type": "none"})
    extra = f"[backend.encoder]\nkind = http\nendpoint = {stub_server.url}\n"
    config, manifest = build_dataset(tmp_path / "data", n_videos=1, n_frames=200, config_extra=extra)
    text = config.read_text().replace("kind = scripted", f"kind = http\nendpoint = {stub_server.url}\nmodel = m")
    text = "\n".join(line for line in text.splitlines() if not line.startswith("scenario"))
    config.write_text(text)
    cfg = load_config(config)
    outcomes = run_dataset(cfg, read_manifest(manifest), tmp_path / "out")
    assert outcomes[0].ok, outcomes[0].error
    paths = [r["path"] for r in stub_server.requests]
    # windows start at 0, 64, 128; each sends caption + score, then one memory embedding
    assert paths.count("/v1/chat/completions") == 6
    assert paths.count("/v1/embeddings") == 3
    scores = np.loadtxt(tmp_path / "out" / "video00" / "frames.csv", delimiter=",", skiprows=1, usecols=5)
    assert np.allclose(scores, 0.05)
