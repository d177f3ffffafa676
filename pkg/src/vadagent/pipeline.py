"""Dataset runner: one isolated memory per video, videos in parallel.

Output layout::

    {out}/{video_id}/frames.csv     per-frame g, p, L, L_smooth, p_hat
    {out}/{video_id}/windows.jsonl  one window verdict + dialogue per line
    {out}/{video_id}/curve.svg      score curve with ground-truth shading
    {out}/metrics.json              per-video, micro and macro AUC/AP
"""

from __future__ import annotations

import csv
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import run_window
from .backends import Backends, BackendConfig, HttpEmbedder, make_backend
from .config import EngineConfig
from .frames import select_clip, slide_windows
from .io import load_video, read_labels
from .memory import MemoryIndex
from .metrics import DegenerateLabelsError, LabeledSeries, average_precision, macro_average, roc_auc
from .plotting import plot_score_curve
from .postprocess import ScoreSeries, final_scores
from .prompts import get_profile

log = logging.getLogger(__name__)

CSV_COLUMNS = ("frame_index", "g", "p", "L", "L_smooth", "p_hat")


@dataclass(frozen=True)
class VideoSpec:
    video_id: str
    frames: Path
    labels: Path | None = None


@dataclass
class VideoOutcome:
    video_id: str
    ok: bool
    error: str = ""
    scores: np.ndarray | None = None
    labels: np.ndarray | None = None
    windows: int = 0
    failed_windows: int = 0
    metrics: dict = field(default_factory=dict)


def read_manifest(path: str | Path) -> list[VideoSpec]:
    """``{video_id: {"frames": path, "labels": path}}``; paths relative to the manifest."""
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: manifest must map video ids to entries")
    base = path.resolve().parent
    specs = []
    for vid, entry in sorted(data.items()):
        frames = base / entry["frames"]
        labels = base / entry["labels"] if entry.get("labels") else None
        specs.append(VideoSpec(str(vid), frames, labels))
    return specs


class BackendFactory:
    """Hands each video its backends.

    HTTP backends are created once and shared, their locks serializing
    calls. Scripted backends are built fresh per video from the scenario
    file, so ``consume_once`` rules replay identically for every video no
    matter how workers interleave.
    """

    def __init__(self, cfg: EngineConfig):
        self.cfg = cfg
        shared_lock = threading.Lock() if cfg.serialize_phases else None
        self._shared = {}
        for role in ("vlm", "llm"):
            bcfg: BackendConfig = getattr(cfg, role)
            if bcfg.kind == "http":
                self._shared[role] = make_backend(bcfg, shared_lock)
        self.embedder = HttpEmbedder(cfg.encoder, cfg.memory.dim) if cfg.encoder.kind == "http" else None

    def for_video(self) -> Backends:
        vlm = self._shared.get("vlm") or make_backend(self.cfg.vlm)
        llm = self._shared.get("llm") or make_backend(self.cfg.llm)
        return Backends(vlm, llm, self.embedder)


def score_video(video: np.ndarray, cfg: EngineConfig, backends: Backends):
    """Run every window of one video through the dialogue loop and post-process."""
    profile = get_profile(cfg.profile, cfg.prompt_file or None)
    memory = MemoryIndex(cfg.memory, backends.embedder)
    results = []
    for window in slide_windows(video, cfg.window, cfg.stride):
        clip = select_clip(window, cfg.motion)
        results.append(run_window(clip, memory, cfg.loop, backends, profile))
    series = final_scores(results, video.shape[0], cfg.post, cfg.window, cfg.stride)
    return results, series


def write_frames_csv(path: Path, series: ScoreSeries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(series)):
            writer.writerow([i, int(series.g[i]), repr(float(series.p[i])), repr(float(series.L[i])),
                             repr(float(series.L_smooth[i])), repr(float(series.p_hat[i]))])


def _video_metrics(scores: np.ndarray, labels: np.ndarray) -> dict:
    out = {}
    for name, fn in (("auc", roc_auc), ("ap", average_precision)):
        try:
            out[name] = fn(scores, labels)
        except DegenerateLabelsError:
            out[name] = None
    return out


def process_video(spec: VideoSpec, cfg: EngineConfig, factory: BackendFactory, out_dir: Path) -> VideoOutcome:
    """Score one video and write its artifacts. Any failure is captured, not raised."""
    vdir = out_dir / spec.video_id
    try:
        video = load_video(spec.frames)
        labels = read_labels(spec.labels) if spec.labels else None
        if labels is not None and len(labels) != video.shape[0]:
            raise ValueError(f"{len(labels)} labels for {video.shape[0]} frames")
        results, series = score_video(video, cfg, factory.for_video())
        vdir.mkdir(parents=True, exist_ok=True)
        write_frames_csv(vdir / "frames.csv", series)
        with open(vdir / "windows.jsonl", "w") as fh:
            for r in results:
                fh.write(r.to_json() + "\n")
        plot_score_curve(vdir / "curve.svg", series.p_hat, labels, title=spec.video_id, calibrated=series.L)
    except Exception as exc:  # a bad video must not take down the others
        log.error("video %s failed: %s", spec.video_id, exc)
        return VideoOutcome(spec.video_id, False, f"{type(exc).__name__}: {exc}")
    outcome = VideoOutcome(
        spec.video_id, True, scores=series.p_hat, labels=labels,
        windows=len(results), failed_windows=sum(r.failed for r in results),
    )
    if labels is not None:
        outcome.metrics = _video_metrics(series.p_hat, labels)
    return outcome


def run_dataset(cfg: EngineConfig, specs: list[VideoSpec], out_dir: str | Path) -> list[VideoOutcome]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    factory = BackendFactory(cfg)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        outcomes = list(pool.map(lambda s: process_video(s, cfg, factory, out_dir), specs))
    write_metrics(out_dir / "metrics.json", outcomes, cfg)
    return outcomes


def write_metrics(path: Path, outcomes: list[VideoOutcome], cfg: EngineConfig) -> dict:
    labeled = [LabeledSeries(o.scores, o.labels) for o in outcomes if o.ok and o.labels is not None]
    report = {
        "profile": cfg.profile,
        "post": {"alpha": cfg.post.alpha, "sigma1": cfg.post.sigma1, "sigma2": cfg.post.sigma2},
        "videos": {
            o.video_id: (
                {"ok": True, "windows": o.windows, "failed_windows": o.failed_windows, **o.metrics}
                if o.ok else {"ok": False, "error": o.error}
            )
            for o in outcomes
        },
        "failed": [o.video_id for o in outcomes if not o.ok],
        "micro": None,
        "macro": macro_average(labeled) if labeled else None,
    }
    if labeled:
        report["micro"] = _video_metrics(
            np.concatenate([v.scores for v in labeled]), np.concatenate([v.labels for v in labeled])
        )
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
