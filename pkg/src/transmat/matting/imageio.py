"""
PNG reading and writing for matting planes.

8-bit inputs are divided by 255 and 16-bit inputs by 65535. Colour planes
are converted between OpenCV's BGR order and RGB at the boundary.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import cv2
import numpy as np

from transmat.core.errors import DataError
from transmat.matting.types import AlphaMatte, ImageRGB, Trimap, trimap_decode, trimap_encode

PathLike = Union[str, Path]


def _read_raw(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"Could not decode image: {path}")
    return raw


def _normalize(raw: np.ndarray, path: PathLike) -> np.ndarray:
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float32) / 65535.0
    raise DataError(f"Unsupported bit depth {raw.dtype} in {path}; expected 8- or 16-bit PNG")


def read_image(path: PathLike) -> ImageRGB:
    raw = _read_raw(path)
    if raw.ndim == 2:
        raw = np.repeat(raw[..., None], 3, axis=2)
    elif raw.shape[2] == 4:
        raw = raw[..., :3]
    rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    return _normalize(rgb, path)


def read_alpha(path: PathLike) -> AlphaMatte:
    raw = _read_raw(path)
    if raw.ndim == 3:
        # RGBA foreground files carry alpha in the last channel
        raw = raw[..., 3] if raw.shape[2] == 4 else raw[..., 0]
    return _normalize(raw, path)


def read_trimap(path: PathLike) -> Trimap:
    raw = _read_raw(path)
    if raw.ndim == 3:
        raw = raw[..., 0]
    if raw.dtype != np.uint8:
        raise DataError(f"Trimap {path} must be an 8-bit PNG, got {raw.dtype}")
    return trimap_decode(raw)


def _write(path: PathLike, plane: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), plane):
        raise DataError(f"Could not write image: {path}")


def write_image(path: PathLike, image: ImageRGB):
    """8-bit RGB PNG."""
    quantized = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    _write(path, cv2.cvtColor(quantized, cv2.COLOR_RGB2BGR))


def write_alpha(path: PathLike, alpha: AlphaMatte, bits: int = 16):
    scale, dtype = (65535.0, np.uint16) if bits == 16 else (255.0, np.uint8)
    _write(path, np.round(np.clip(alpha, 0.0, 1.0) * scale).astype(dtype))


def write_trimap(path: PathLike, trimap: Trimap):
    _write(path, trimap_encode(trimap))
