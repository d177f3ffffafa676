"""Separable Gaussian filtering with half-sample symmetric boundaries."""

from __future__ import annotations

import math

import numpy as np


def reflect_indices(n: int, radius: int) -> np.ndarray:
    """Indices ``-radius .. n+radius-1`` folded into ``[0, n)``.

    Uses half-sample symmetric reflection (``d c b a | a b c d | d c b a``),
    repeating the fold as many times as needed when ``radius`` exceeds ``n``.
    """
    raw = np.arange(-radius, n + radius)
    folded = np.mod(raw, 2 * n)
    return np.where(folded >= n, 2 * n - 1 - folded, folded)


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    if sigma <= 0 or radius == 0:
        return np.ones(1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smoothing_radius(sigma: float) -> int:
    """``ceil(3 sigma)``, at least 1 whenever ``sigma > 0``."""
    if sigma <= 0:
        return 0
    return max(1, math.ceil(3.0 * sigma))


def correlate_reflect(arr: np.ndarray, kernel: np.ndarray, axis: int = -1) -> np.ndarray:
    """Correlate ``arr`` with a symmetric odd-length ``kernel`` along ``axis``."""
    arr = np.asarray(arr, dtype=np.float64)
    if kernel.size == 1:
        return arr * kernel[0]
    axis = axis % arr.ndim
    n = arr.shape[axis]
    radius = kernel.size // 2
    padded = np.take(arr, reflect_indices(n, radius), axis=axis)
    out = np.zeros_like(arr)
    for k, weight in enumerate(kernel):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(k, k + n)
        out += weight * padded[tuple(sl)]
    return out
