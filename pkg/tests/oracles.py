"""Independent reference implementations used to check the library.

Nothing here imports the code under test; each function takes a slower but
more obvious route to the same answer.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from fractions import Fraction

import numpy as np
from scipy import ndimage


def covered_index_sets(n_frames, starts, w):
    return [set(range(t, min(t + w, n_frames))) for t in starts]


def reference_motion_scores(frames, kernel_size=21, threshold=25.0):
    """Straight-line motion scoring with a full 2-D kernel (scipy, reflect borders)."""
    sigma = (kernel_size - 1) / 6.0
    r = kernel_size // 2
    if sigma > 0:
        ax = np.arange(-r, r + 1, dtype=np.float64)
        xx, yy = np.meshgrid(ax, ax)
        kernel = np.exp(-(xx ** 2 + yy ** 2) / (2 * sigma ** 2))
        kernel /= kernel.sum()
    else:
        kernel = np.ones((1, 1))
    stack = np.stack([np.asarray(f, dtype=np.float64) for f in frames])
    blurred = np.clip(np.rint(ndimage.correlate(stack, kernel[None], mode="reflect")), 0, 255)
    scores = []
    for ba, bb in zip(blurred, blurred[1:]):
        diff = np.abs(bb - ba)
        count = sum(1 for v in diff.ravel() if v > threshold)
        scores.append(count / diff.size)
    scores.append(scores[-1])
    return scores


def reference_selection(scores, n_select):
    """First + last + best of the rest, by pairwise rank counting."""
    n = len(scores)
    if n <= n_select:
        return list(range(n))
    need = n_select - 2
    chosen = {0, n - 1}
    rest = [i for i in range(1, n - 1)]
    for i in rest:
        beaten_by = sum(1 for j in rest if scores[j] > scores[i] or (scores[j] == scores[i] and j < i))
        if beaten_by < need:
            chosen.add(i)
    return sorted(chosen)


def bucket(token, dim=384):
    return int(hashlib.blake2b(token.encode("utf-8"), digest_size=8).hexdigest(), 16) % dim


def bow(text, dim=384):
    return Counter(bucket(t, dim) for t in text.lower().split())


def exact_cosine(a: Counter, b: Counter):
    """Cosine as an exactly comparable key: sign * dot^2 / (|a|^2 |b|^2)."""
    dot = sum(c * b.get(k, 0) for k, c in a.items())
    na = sum(c * c for c in a.values())
    nb = sum(c * c for c in b.values())
    return Fraction(dot * abs(dot), na * nb)


def reference_top_k(entry_texts, query, k):
    q = bow(query)
    keys = [exact_cosine(bow(t), q) for t in entry_texts]
    order = sorted(range(len(entry_texts)), key=lambda i: (-keys[i], i))
    return order[:k]


def reflect(i, n):
    """Half-sample symmetric reflection of index ``i`` into [0, n)."""
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - 1 - i
    return i


def direct_gaussian_smooth(x, sigma):
    x = [float(v) for v in x]
    if sigma == 0:
        return np.array(x)
    r = max(1, math.ceil(3 * sigma))
    w = [math.exp(-0.5 * (j / sigma) ** 2) for j in range(-r, r + 1)]
    total = math.fsum(w)
    w = [v / total for v in w]
    n = len(x)
    return np.array([math.fsum(w[j + r] * x[reflect(i + j, n)] for j in range(-r, r + 1)) for i in range(n)])


def membership_max(windows, n_frames, w):
    """Per-frame max over windows that contain the frame; windows are (start, g, p)."""
    g = [0] * n_frames
    p = [0.0] * n_frames
    for i in range(n_frames):
        members = [(wg, wp) for (t, wg, wp) in windows if t <= i < t + w]
        assert members, f"frame {i} uncovered"
        g[i] = max(m[0] for m in members)
        p[i] = max(m[1] for m in members)
    return g, p


def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def threshold_sweep_ap(scores, labels):
    """Sum over distinct thresholds of (recall gain) * (precision at that threshold)."""
    n_pos = sum(labels)
    ap = 0.0
    prev_recall = 0.0
    for thr in sorted(set(scores), reverse=True):
        predicted = [y for s, y in zip(scores, labels) if s >= thr]
        tp = sum(predicted)
        recall = tp / n_pos
        precision = tp / len(predicted)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap
