"""Input checks shared by the estimators."""
from __future__ import annotations

from typing import Optional

import numpy as np


def check_images(X, resolution: Optional[int] = None, name: str = "X") -> np.ndarray:
    """Validate an image stack: float32 (N, S, S, 3), finite, values in [-1, 1].

    A single HxWx3 image is promoted to a batch of one.
    """
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (N, S, S, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if arr.shape[1] != arr.shape[2]:
        raise ValueError(f"{name} images must be square, got {arr.shape[1]}x{arr.shape[2]}")
    if resolution is not None and arr.shape[1] != resolution:
        raise ValueError(f"{name} has resolution {arr.shape[1]}, expected {resolution}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < -1.0 - 1e-6 or arr.max() > 1.0 + 1e-6:
        raise ValueError(f"{name} values must lie in [-1, 1]")
    return arr


def check_seed(seed) -> int:
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"an explicit integer seed is required, got {seed!r}")
    return int(seed)
