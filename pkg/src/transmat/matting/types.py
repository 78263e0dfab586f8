"""
Matting types
-------------
Planes of a matting sample and the trimap encodings shared by every module.

All planes are numpy arrays with values in [0, 1]:
 - ImageRGB         float32 (H, W, 3)
 - AlphaMatte       float32 (H, W)
 - Trimap           uint8   (H, W) of category indices FG=0, BG=1, UNK=2
 - NonBackgroundMask uint8  (H, W) of {0, 1}

On disk a trimap is an 8-bit grayscale plane with BG=0, UNK=128, FG=255.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from transmat.core.errors import InvalidTrimapError

ImageRGB = np.ndarray
AlphaMatte = np.ndarray
Trimap = np.ndarray
NonBackgroundMask = np.ndarray

COMPOSITE_TOLERANCE = 1e-6


class TrimapLabel(IntEnum):
    FG = 0
    BG = 1
    UNK = 2


FG = TrimapLabel.FG
BG = TrimapLabel.BG
UNK = TrimapLabel.UNK

TRIMAP_ENCODING = {BG: 0, UNK: 128, FG: 255}

# encoded byte -> label, everything else marked invalid (255 sentinel)
_DECODE_TABLE = np.full(256, 255, dtype=np.uint8)
for _label, _byte in TRIMAP_ENCODING.items():
    _DECODE_TABLE[_byte] = int(_label)

_ENCODE_TABLE = np.zeros(3, dtype=np.uint8)
for _label, _byte in TRIMAP_ENCODING.items():
    _ENCODE_TABLE[int(_label)] = _byte


def trimap_encode(trimap: Trimap) -> np.ndarray:
    """Label plane -> 8-bit grayscale plane (BG=0, UNK=128, FG=255)."""
    labels = np.asarray(trimap)
    if labels.size and (labels.min() < 0 or labels.max() > 2):
        bad = np.argwhere((labels < 0) | (labels > 2))[0]
        raise InvalidTrimapError(int(labels[tuple(bad)]), tuple(int(i) for i in bad))
    return _ENCODE_TABLE[labels.astype(np.intp)]


def trimap_decode(plane: np.ndarray) -> Trimap:
    """8-bit grayscale plane -> label plane; rejects values outside {0, 128, 255}."""
    values = np.asarray(plane)
    if values.dtype != np.uint8:
        outside = (values < 0) | (values > 255) | (values != np.round(values))
        if np.any(outside):
            bad = tuple(int(i) for i in np.argwhere(outside)[0])
            raise InvalidTrimapError(values[bad].item(), bad)
        values = values.astype(np.uint8)
    labels = _DECODE_TABLE[values]
    invalid = labels == 255
    if np.any(invalid):
        bad = tuple(int(i) for i in np.argwhere(invalid)[0])
        raise InvalidTrimapError(int(values[bad]), bad)
    return labels


def nonbackground_mask(trimap: Trimap) -> NonBackgroundMask:
    return (np.asarray(trimap) != BG).astype(np.uint8)


def unknown_mask(trimap: Trimap) -> np.ndarray:
    return np.asarray(trimap) == UNK


@dataclass(frozen=True)
class MattingSample:
    image: ImageRGB
    trimap: Trimap
    gt_alpha: AlphaMatte
    gt_foreground: ImageRGB
    gt_background: ImageRGB
    sample_id: str = ""
    category: Optional[str] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.image.shape[:2])

    def with_planes(self, **planes) -> "MattingSample":
        return replace(self, **planes)


PLANES = ("image", "trimap", "gt_alpha", "gt_foreground", "gt_background")
_RGB_PLANES = {"image", "gt_foreground", "gt_background"}


def _first(mask: np.ndarray) -> Tuple[int, int]:
    idx = np.argwhere(mask)[0]
    return int(idx[0]), int(idx[1])


def validate_sample(sample: MattingSample) -> List[str]:
    """
    Check every plane invariant of a sample. Returns one message per violated
    invariant (plane name and first offending pixel), or an empty list.
    """
    violations: List[str] = []
    reference = np.asarray(sample.image).shape[:2]
    if len(reference) < 2 or reference[0] < 1 or reference[1] < 1:
        return [f"image: spatial shape {reference} must be at least 1x1"]

    aligned = True
    malformed = set()
    for name in PLANES:
        plane = np.asarray(getattr(sample, name))
        expected_ndim = 3 if name in _RGB_PLANES else 2
        if plane.ndim != expected_ndim or (expected_ndim == 3 and plane.shape[2] != 3):
            violations.append(f"{name}: expected {'(H, W, 3)' if expected_ndim == 3 else '(H, W)'} plane, got shape {plane.shape}")
            aligned = False
            malformed.add(name)
            continue
        if plane.shape[:2] != reference:
            violations.append(f"{name}: shape mismatch, {plane.shape[:2]} vs image {reference}")
            aligned = False

    for name in PLANES:
        if name in malformed:
            continue
        plane = np.asarray(getattr(sample, name))
        if name == "trimap":
            bad = ~np.isin(plane, [int(label) for label in TrimapLabel])
            if np.any(bad):
                row, col = _first(bad)
                violations.append(f"trimap: invalid label {plane[row, col]} at ({row}, {col})")
            continue
        bad = ~((plane >= 0.0) & (plane <= 1.0))
        if plane.ndim == 3:
            bad = bad.any(axis=2)
        if np.any(bad):
            row, col = _first(bad)
            value = plane[row, col]
            shown = value.tolist() if np.ndim(value) else float(value)
            violations.append(f"{name}: value {shown} at ({row}, {col}) outside [0, 1]")

    if aligned and not violations:
        expected = np.asarray(sample.gt_alpha, dtype=np.float64)[..., None] * sample.gt_foreground + (
            1.0 - np.asarray(sample.gt_alpha, dtype=np.float64)[..., None]
        ) * sample.gt_background
        error = np.abs(np.clip(expected, 0.0, 1.0) - sample.image).max(axis=2)
        bad = error > COMPOSITE_TOLERANCE
        if np.any(bad):
            row, col = _first(bad)
            violations.append(
                f"image: differs from composite(gt_foreground, gt_background, gt_alpha) by {error[row, col]:.3g} at ({row}, {col})"
            )
    return violations
