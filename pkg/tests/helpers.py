"""Shared fixture builders for the test suite."""

import numpy as np
from scipy import ndimage

from vsrkit import Frame


def textured_frame(seed: int, h: int = 128, w: int = 128, c: int = 3, blur: float = 1.5) -> Frame:
    """Smoothed random field stretched to [0.05, 0.95]."""
    rng = np.random.default_rng(seed)
    base = rng.random((h, w, c))
    smooth = np.stack(
        [ndimage.gaussian_filter(base[:, :, i], blur) for i in range(c)], axis=2
    )
    lo, hi = smooth.min(), smooth.max()
    return Frame(0.05 + 0.9 * (smooth - lo) / (hi - lo))
