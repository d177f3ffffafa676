"""Static score-curve figures."""

from __future__ import annotations

import threading
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

# rc_context mutates global state; serialize figure rendering across workers
_LOCK = threading.Lock()
_RC = {
    "svg.hashsalt": "vadagent",  # stable element ids, byte-identical reruns
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open ``[start, stop)`` index ranges where ``mask`` is true."""
    padded = np.concatenate([[0], mask.astype(np.int8), [0]])
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def plot_score_curve(path: str | Path, scores, labels=None, title: str = "", calibrated=None) -> None:
    """Write frame index vs final score as SVG, shading ground-truth anomalies."""
    scores = np.asarray(scores, dtype=np.float64)
    frames = np.arange(len(scores))
    with _LOCK, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(7.0, 2.4))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        if labels is not None:
            for i, (lo, hi) in enumerate(_runs(np.asarray(labels) == 1)):
                ax.axvspan(lo - 0.5, hi - 0.5, color="#f4c7c3", lw=0, label="ground truth" if i == 0 else None)
        if calibrated is not None:
            ax.plot(frames, calibrated, color="0.6", lw=0.6, ls="--", label="calibrated")
        ax.plot(frames, scores, color="#1f4e79", lw=1.2, label="anomaly score")
        ax.set_xlim(0, max(len(scores) - 1, 1))
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("Frame")
        ax.set_ylabel("Score")
        if title:
            ax.set_title(title, loc="left")
        ax.legend(loc="upper right", frameon=False, fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
