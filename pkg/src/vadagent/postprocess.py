"""Window verdicts to frame-level anomaly scores.

Overlapping window verdicts are max-pooled onto frames, bounded by the
calibration level ``alpha`` (a floor for anomalous frames, a ceiling for
normal ones), then smoothed by two Gaussian passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._filters import correlate_reflect, gaussian_kernel, smoothing_radius


@dataclass(frozen=True)
class PostConfig:
    alpha: float = 0.05
    sigma1: float = 280.0
    sigma2: float = 0.3

    def violations(self, prefix: str = "post") -> list[str]:
        out = []
        if not 0 <= self.alpha <= 1:
            out.append(f"{prefix}.alpha: must lie in [0, 1]")
        for name in ("sigma1", "sigma2"):
            if getattr(self, name) < 0:
                out.append(f"{prefix}.{name}: must be >= 0")
        return out


# tuned per dataset on validation splits; sigmas are standard deviations in frames
PROFILE_POST = {
    "ucf": PostConfig(alpha=0.05, sigma1=280.0, sigma2=0.3),
    "ubnormal": PostConfig(alpha=0.2, sigma1=145.0, sigma2=0.5),
    "xd": PostConfig(alpha=0.4, sigma1=142.0, sigma2=0.7),
    "complexvad": PostConfig(alpha=0.21, sigma1=420.0, sigma2=0.4),
}


@dataclass
class ScoreSeries:
    g: np.ndarray
    p: np.ndarray
    L: np.ndarray
    L_smooth: np.ndarray
    p_hat: np.ndarray

    def __len__(self) -> int:
        return len(self.p_hat)


def aggregate_frames(results: Sequence, video_len: int, w: int, s: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Max-pool window flags and probabilities onto the frames each window covers.

    ``results`` need ``window_start``, ``flag``, ``probability`` and
    ``failed`` attributes; failed windows count as (0, 0). ``s`` is accepted
    for symmetry with the window schedule but extents only depend on ``w``.
    """
    g = np.zeros(video_len, dtype=np.int64)
    p = np.zeros(video_len)
    covered = np.zeros(video_len, dtype=bool)
    for r in results:
        lo, hi = r.window_start, min(r.window_start + w, video_len)
        covered[lo:hi] = True
        if getattr(r, "failed", False):
            continue
        g[lo:hi] = np.maximum(g[lo:hi], int(r.flag))
        p[lo:hi] = np.maximum(p[lo:hi], float(r.probability))
    if not covered.all():
        raise ValueError(f"coverage gap at frame {int(np.argmin(covered))}")
    return g, p


def calibrate(g, p, alpha: float) -> np.ndarray:
    g = np.asarray(g)
    p = np.asarray(p, dtype=np.float64)
    return np.where(g == 1, np.maximum(p, alpha), np.minimum(p, alpha))


def smoothing_kernel(sigma: float) -> np.ndarray:
    return gaussian_kernel(sigma, smoothing_radius(sigma))


def gaussian_smooth(series, sigma: float) -> np.ndarray:
    """Reflect-padded convolution with a normalized Gaussian; ``sigma=0`` is the identity."""
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty series")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return x.copy()
    return correlate_reflect(x, smoothing_kernel(sigma))


def final_scores(results: Sequence, video_len: int, cfg: PostConfig, w: int = 128, s: int = 64) -> ScoreSeries:
    g, p = aggregate_frames(results, video_len, w, s)
    L = calibrate(g, p, cfg.alpha)
    L_smooth = gaussian_smooth(L, cfg.sigma1)
    p_hat = np.clip(gaussian_smooth(L_smooth, cfg.sigma2), 0.0, 1.0)
    return ScoreSeries(g, p, L, L_smooth, p_hat)
