"""Reach accuracy, RGB histograms and the 1-D Wasserstein distance between them."""
from __future__ import annotations

import numpy as np

N_BINS = 256


def accuracy(distances, threshold: float) -> float:
    """Percentage of final distances within ``threshold``."""
    d = np.asarray(distances, dtype=float).reshape(-1)
    if d.size == 0:
        raise ValueError("accuracy needs at least one distance")
    return 100.0 * float(np.count_nonzero(d <= threshold)) / d.size


def rgb_histograms(images, n_bins: int = N_BINS) -> np.ndarray:
    """Normalized per-channel histograms, shape (3, n_bins), of images in [-1, 1].

    Pixels are mapped to [0, 1] first; bin k covers [k/n, (k+1)/n) and the
    last bin also holds 1.0.
    """
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim == 3:
        imgs = imgs[None]
    if imgs.ndim != 4 or imgs.shape[0] == 0 or imgs.shape[-1] != 3:
        raise ValueError("expected a non-empty (N, H, W, 3) batch")
    unit = np.clip((imgs + 1.0) / 2.0, 0.0, 1.0).reshape(-1, 3)
    idx = np.minimum((unit * n_bins).astype(np.int64), n_bins - 1)
    hist = np.stack([np.bincount(idx[:, c], minlength=n_bins) for c in range(3)]).astype(np.float64)
    return hist / hist.sum(axis=1, keepdims=True)


def wasserstein_1d(a, b) -> float:
    """Earth mover's distance between two normalized histograms on a shared [0, 1] grid."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"histograms must share one bin grid, got {a.shape} and {b.shape}")
    return float(np.abs(np.cumsum(a) - np.cumsum(b)).sum() / a.size)


def channel_distances(images_a, images_b) -> np.ndarray:
    """Per-channel Wasserstein distance between the histograms of two batches."""
    ha, hb = rgb_histograms(images_a), rgb_histograms(images_b)
    return np.array([wasserstein_1d(ha[c], hb[c]) for c in range(3)])
