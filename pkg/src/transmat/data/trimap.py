"""
Trimap generation and unknown-centered cropping.
"""

from __future__ import annotations

import cv2
import numpy as np

from transmat.core.config import BG_THRESHOLD, FG_THRESHOLD
from transmat.core.errors import NoUnknownRegionError, ShapeMismatchError
from transmat.matting.types import BG, FG, UNK, AlphaMatte, MattingSample, Trimap, PLANES


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a (2r+1) square element and replicated borders."""
    if radius <= 0:
        return mask.astype(bool)
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), np.uint8)
    eroded = cv2.erode(mask.astype(np.uint8), kernel, borderType=cv2.BORDER_REPLICATE)
    return eroded.astype(bool)


def generate_trimap(alpha: AlphaMatte, erode_radius: int, dilate_radius: int) -> Trimap:
    """
    FG is the eroded set of (near) opaque pixels, BG the eroded set of (near)
    transparent pixels; everything between is UNK.
    """
    alpha = np.asarray(alpha)
    if alpha.ndim != 2:
        raise ShapeMismatchError(f"generate_trimap expects an (H, W) alpha, got {alpha.shape}")
    fg = erode(alpha >= FG_THRESHOLD, erode_radius)
    bg = erode(alpha <= BG_THRESHOLD, dilate_radius)
    trimap = np.full(alpha.shape, UNK, dtype=np.uint8)
    trimap[fg] = FG
    trimap[bg] = BG
    return trimap


def _pad_plane(plane: np.ndarray, top: int, bottom: int, left: int, right: int) -> np.ndarray:
    widths = [(top, bottom), (left, right)] + [(0, 0)] * (plane.ndim - 2)
    return np.pad(plane, widths, mode="reflect") if plane.shape[0] > 1 and plane.shape[1] > 1 else np.pad(plane, widths, mode="edge")


def pad_to_size(sample: MattingSample, size: int) -> MattingSample:
    """Reflection-pad every plane so both sides are at least `size`."""
    height, width = sample.shape
    pad_h = max(0, size - height)
    pad_w = max(0, size - width)
    if not pad_h and not pad_w:
        return sample
    top, left = pad_h // 2, pad_w // 2
    planes = {
        name: _pad_plane(np.asarray(getattr(sample, name)), top, pad_h - top, left, pad_w - left)
        for name in PLANES
    }
    return sample.with_planes(**planes)


def unknown_centered_crop(sample: MattingSample, crop_size: int, rng: np.random.Generator) -> MattingSample:
    """Crop a square window centered on a uniformly chosen UNK pixel."""
    unknown = np.argwhere(np.asarray(sample.trimap) == UNK)
    if unknown.size == 0:
        raise NoUnknownRegionError(f"Sample '{sample.sample_id}' has no unknown pixels to center a crop on.")
    sample = pad_to_size(sample, crop_size)
    # recompute after padding; reflection keeps at least the original UNK pixels
    unknown = np.argwhere(np.asarray(sample.trimap) == UNK)
    height, width = sample.shape
    row, col = unknown[int(rng.integers(len(unknown)))]
    top = int(np.clip(row - crop_size // 2, 0, height - crop_size))
    left = int(np.clip(col - crop_size // 2, 0, width - crop_size))
    planes = {
        name: np.ascontiguousarray(getattr(sample, name)[top:top + crop_size, left:left + crop_size])
        for name in PLANES
    }
    return sample.with_planes(**planes)
