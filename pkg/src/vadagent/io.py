"""Frame and label ingestion.

Two frame layouts are accepted:

* a directory of binary PGM (``P5``) images named by zero-padded frame index
  (``000000.pgm``, ``000001.pgm``, ...). Binary PPM (``P6``) files are also
  read and converted to grayscale with luma weights 0.299/0.587/0.114.
* a raw planar file of ``frame_count * height * width`` bytes, frame-major
  then row-major, next to a JSON manifest ``{"height", "width",
  "frame_count", "fps"}``. The manifest shares the raw file's stem
  (``clip.raw`` + ``clip.json``).
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

LUMA = (0.299, 0.587, 0.114)
_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luma-weighted conversion of an ``(H, W, 3)`` uint8 image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    gray = rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def read_pnm(path: str | Path) -> np.ndarray:
    """Read a binary PGM/PPM into a grayscale uint8 array."""
    data = Path(path).read_bytes()
    header = []
    pos = 0
    while len(header) < 4:
        m = _PNM_TOKEN.match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PNM header")
        header.append(m.group(1))
        pos = m.end()
    magic, width, height, maxval = header[0], int(header[1]), int(header[2]), int(header[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM type {magic!r}")
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PNM supported (maxval={maxval})")
    pos += 1  # single whitespace byte after maxval
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    if len(data) - pos < n:
        raise ValueError(f"{path}: raster shorter than {n} bytes")
    raster = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    if maxval != 255:
        raster = np.rint(raster.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    if channels == 3:
        return to_grayscale(raster.reshape(height, width, 3))
    return raster.reshape(height, width).copy()


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def load_frame_dir(path: str | Path) -> np.ndarray:
    """Stack the PGM/PPM files of ``path`` in frame-index order."""
    path = Path(path)
    files = [p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".ppm") and p.stem.isdigit()]
    if not files:
        raise ValueError(f"{path}: no frames found")
    files.sort(key=lambda p: int(p.stem))
    frames = [read_pnm(p) for p in files]
    shape = frames[0].shape
    for p, f in zip(files, frames):
        if f.shape != shape:
            raise ValueError(f"{p}: frame size {f.shape} differs from {shape}")
    return np.stack(frames)


def _raw_pair(path: Path) -> tuple[Path, Path]:
    if path.suffix == ".json":
        return path.with_suffix(".raw"), path
    return path, path.with_suffix(".json")


def load_raw(path: str | Path) -> np.ndarray:
    raw_path, manifest_path = _raw_pair(Path(path))
    meta = json.loads(manifest_path.read_text())
    h, w, t = int(meta["height"]), int(meta["width"]), int(meta["frame_count"])
    data = np.fromfile(raw_path, dtype=np.uint8)
    if data.size != h * w * t:
        raise ValueError(f"{raw_path}: expected {h * w * t} bytes, found {data.size}")
    return data.reshape(t, h, w)


def write_raw(path: str | Path, video: np.ndarray, fps: float = 30.0) -> None:
    raw_path, manifest_path = _raw_pair(Path(path))
    video = np.ascontiguousarray(video, dtype=np.uint8)
    t, h, w = video.shape
    video.tofile(raw_path)
    manifest_path.write_text(json.dumps({"height": h, "width": w, "frame_count": t, "fps": fps}))


def load_video(path: str | Path) -> np.ndarray:
    """Load a ``(T, H, W)`` uint8 video from either supported layout."""
    path = Path(path)
    if path.is_dir():
        video = load_frame_dir(path)
    else:
        video = load_raw(path)
    if video.shape[0] == 0 or video.shape[1] < 1 or video.shape[2] < 1:
        raise ValueError(f"{path}: empty input")
    return video


def read_labels(path: str | Path) -> np.ndarray:
    """One ``0``/``1`` per line, one line per frame."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    bad = [ln for ln in lines if ln not in ("0", "1")]
    if bad:
        raise ValueError(f"{path}: labels must be 0 or 1, found {bad[0]!r}")
    return np.array([int(ln) for ln in lines], dtype=np.int8)


def write_labels(path: str | Path, labels) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))
