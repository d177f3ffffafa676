"""Temporal windowing and motion-aware frame selection.

A video is cut into overlapping windows; each window is reduced to a short
clip for the perception model in two stages: a uniform pre-sample for
temporal coverage, then a motion-saliency pick that always keeps the first
and last candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._filters import correlate_reflect, gaussian_kernel


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: np.ndarray  # (H, W) uint8

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Window:
    start: int
    frames: list[Frame]

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def end(self) -> int:
        """Index one past the last frame."""
        return self.start + len(self.frames)


@dataclass(frozen=True)
class SelectedClip:
    frames: list[Frame]
    source_window_start: int

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def indices(self) -> list[int]:
        return [f.index for f in self.frames]


@dataclass(frozen=True)
class MotionConfig:
    blur_kernel_size: int = 21
    motion_threshold: float = 25.0
    n_uniform: int = 32
    n_select: int = 8

    def violations(self, prefix: str = "motion") -> list[str]:
        out = []
        if self.blur_kernel_size < 1 or self.blur_kernel_size % 2 == 0:
            out.append(f"{prefix}.blur_kernel_size: kernel size must be odd and >= 1")
        if not 0 <= self.motion_threshold <= 255:
            out.append(f"{prefix}.motion_threshold: must lie in [0, 255]")
        if not 2 <= self.n_select <= self.n_uniform:
            out.append(f"{prefix}.n_select: need 2 <= n_select <= n_uniform")
        return out


FrameSequence = Union[Sequence[Frame], np.ndarray]


def as_frames(video: FrameSequence) -> list[Frame]:
    """Accept either a list of frames or a ``(T, H, W)`` uint8 array."""
    if isinstance(video, np.ndarray):
        if video.ndim != 3:
            raise ValueError(f"expected a (T, H, W) array, got shape {video.shape}")
        return [Frame(i, video[i]) for i in range(video.shape[0])]
    return list(video)


def slide_windows(video: FrameSequence, w: int = 128, s: int = 64) -> list[Window]:
    """Split a video into windows of ``w`` frames every ``s`` frames.

    The schedule stops at the first window that reaches the end of the video,
    so the final window may be shorter than ``w`` and no window is entirely
    contained in its predecessor's tail.
    """
    if w < 1 or not 1 <= s <= w:
        raise ValueError(f"invalid window schedule w={w}, s={s}")
    frames = as_frames(video)
    if not frames:
        raise ValueError("empty input")
    n = len(frames)
    windows = []
    start = 0
    while start < n:
        windows.append(Window(start, frames[start:start + w]))
        if start + w >= n:
            break
        start += s
    return windows


def window_starts(n_frames: int, w: int, s: int) -> list[int]:
    """Window start indices for a video of ``n_frames`` (no pixel data)."""
    if n_frames < 1:
        raise ValueError("empty input")
    starts = []
    start = 0
    while start < n_frames:
        starts.append(start)
        if start + w >= n_frames:
            break
        start += s
    return starts


def uniform_sample(window: Window, n_uniform: int = 32) -> list[Frame]:
    n = len(window.frames)
    if n == 0:
        raise ValueError("empty input")
    if n < n_uniform:
        return list(window.frames)
    step = max(1, n // n_uniform)
    return [window.frames[i * step] for i in range(n_uniform)]


def blur_frame(pixels: np.ndarray, kernel_size: int) -> np.ndarray:
    """Gaussian blur re-quantized to 8-bit intensities.

    The standard deviation is ``(kernel_size - 1) / 6`` so the square kernel
    spans three deviations on each side. Accepts one frame or a stack.
    """
    radius = kernel_size // 2
    k = gaussian_kernel((kernel_size - 1) / 6.0, radius)
    out = correlate_reflect(pixels, k, axis=-2)
    out = correlate_reflect(out, k, axis=-1)
    return np.clip(np.rint(out), 0, 255)


def motion_saliency(candidates: Sequence[Frame], cfg: MotionConfig = MotionConfig()) -> list[float]:
    """Fraction of pixels whose blurred frame-to-frame change exceeds the threshold.

    Score ``i`` compares candidate ``i`` with ``i + 1``; the last candidate
    inherits the score of the one before it.
    """
    if len(candidates) < 2:
        raise ValueError("insufficient frames for motion")
    blurred = blur_frame(np.stack([f.pixels for f in candidates]), cfg.blur_kernel_size)
    scores = []
    for prev, nxt in zip(blurred, blurred[1:]):
        mask = np.abs(nxt - prev) > cfg.motion_threshold
        scores.append(float(mask.mean()))
    scores.append(scores[-1])
    return scores


def select_motion_frames(
    candidates: Sequence[Frame],
    scores: Sequence[float],
    n_select: int = 8,
    source_window_start: int | None = None,
) -> SelectedClip:
    """Keep the first and last candidate plus the highest-scoring rest.

    Ties rank by ascending position, and the result is in temporal order.
    """
    if len(candidates) != len(scores) or len(candidates) < 2:
        raise ValueError("need matching candidates and scores, at least 2")
    start = candidates[0].index if source_window_start is None else source_window_start
    n = len(candidates)
    if n <= n_select:
        return SelectedClip(list(candidates), start)
    chosen = {0, n - 1}
    # stable sort on the negated score keeps ascending position among ties
    for j in sorted(range(n), key=lambda i: -scores[i]):
        if len(chosen) >= n_select:
            break
        chosen.add(j)
    return SelectedClip([candidates[i] for i in sorted(chosen)], start)


def select_clip(window: Window, cfg: MotionConfig = MotionConfig()) -> SelectedClip:
    """Uniform pre-sample followed by motion-aware selection."""
    candidates = uniform_sample(window, cfg.n_uniform)
    if len(candidates) <= cfg.n_select:
        return SelectedClip(candidates, window.start)
    scores = motion_saliency(candidates, cfg)
    return select_motion_frames(candidates, scores, cfg.n_select, window.start)
