"""
Composition
-----------
Foreground/background compositing and background pairing for evaluation sets.
"""

from __future__ import annotations

from typing import List, Tuple

import cv2
import numpy as np

from transmat.core.errors import DatasetError, ShapeMismatchError
from transmat.matting.types import AlphaMatte, ImageRGB


def composite(fg: ImageRGB, bg: ImageRGB, alpha: AlphaMatte) -> ImageRGB:
    """I = alpha * F + (1 - alpha) * B, clamped only against round-off."""
    fg = np.asarray(fg)
    bg = np.asarray(bg)
    alpha = np.asarray(alpha)
    if fg.shape != bg.shape or fg.shape[:2] != alpha.shape[:2]:
        raise ShapeMismatchError(
            f"composite: foreground {fg.shape}, background {bg.shape} and alpha {alpha.shape} must share one spatial shape"
        )
    a = alpha[..., None] if alpha.ndim == fg.ndim - 1 else alpha
    out = a * fg + (1.0 - a) * bg
    return np.clip(out, 0.0, 1.0).astype(fg.dtype, copy=False)


def fit_background(bg: ImageRGB, height: int, width: int) -> ImageRGB:
    """Resize a background to the foreground's size."""
    if bg.shape[:2] == (height, width):
        return bg
    interpolation = cv2.INTER_AREA if bg.shape[0] > height and bg.shape[1] > width else cv2.INTER_LINEAR
    resized = cv2.resize(bg, (width, height), interpolation=interpolation)
    return np.clip(resized, 0.0, 1.0).astype(np.float32)


def compose_backgrounds(num_fg: int, num_bg: int, per_fg: int) -> List[Tuple[int, int]]:
    """
    Fixed (fg_index, bg_index) pairs for evaluation sets: each foreground is
    composited over `per_fg` backgrounds, bg index = (i * per_fg + j) mod num_bg.
    """
    if num_bg < 1:
        raise DatasetError("No background images available for composition.")
    if per_fg < 1:
        raise DatasetError(f"backgrounds per foreground must be >= 1, got {per_fg}")
    return [(i, (i * per_fg + j) % num_bg) for i in range(num_fg) for j in range(per_fg)]
