"""
Inference
---------
Runs a trained network on one image + trimap. Inputs are reflect-padded to
a multiple of the network stride. Images whose longer side exceeds
`max_side` are processed in overlapping tiles blended with linear ramps.
"""

from __future__ import annotations

from typing import Iterator, List, Tuple

import numpy as np
import torch

from transmat.core.config import NETWORK_STRIDE, EvalConfig
from transmat.core.errors import ShapeMismatchError
from transmat.core.logger import log
from transmat.matting.types import BG, FG, ImageRGB, MattingSample, Trimap
from transmat.model.network import TriTokenMattingNet


def pad_amounts(size: int, multiple: int = NETWORK_STRIDE) -> int:
    return (multiple - size % multiple) % multiple


def reflect_pad(plane: np.ndarray, pad_h: int, pad_w: int) -> np.ndarray:
    widths = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (plane.ndim - 2)
    if not (pad_h or pad_w):
        return plane
    mode = "reflect" if min(plane.shape[:2]) > 1 else "edge"
    return np.pad(plane, widths, mode=mode)


def tile_starts(size: int, tile: int, overlap: int) -> List[int]:
    """Tile origins covering [0, size); the last tile is flush with the end."""
    if size <= tile:
        return [0]
    stride = tile - overlap
    starts = list(range(0, size - tile, stride))
    starts.append(size - tile)
    return starts


def blend_ramp(length: int, overlap: int) -> np.ndarray:
    """1-D weight: rises linearly over `overlap` pixels at both ends, 1 in between."""
    if overlap <= 0:
        return np.ones(length)
    i = np.arange(length, dtype=np.float64)
    return np.minimum(1.0, np.minimum(i + 1, length - i) / (overlap + 1))


def iter_tiles(height: int, width: int, tile: int, overlap: int) -> Iterator[Tuple[int, int, int, int]]:
    th, tw = min(tile, height), min(tile, width)
    for top in tile_starts(height, th, overlap):
        for left in tile_starts(width, tw, overlap):
            yield top, left, th, tw


@torch.no_grad()
def run_network(model: TriTokenMattingNet, image: ImageRGB, trimap: Trimap) -> np.ndarray:
    """Padded-size forward pass; (H, W, 3) image and (H, W) labels -> (H, W) alpha."""
    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).unsqueeze(0).to(dtype)
    t = torch.from_numpy(np.ascontiguousarray(trimap).astype(np.int64)).unsqueeze(0)
    return model(x, t)[0, 0].double().numpy()


def predict_alpha(model: TriTokenMattingNet, image: ImageRGB, trimap: Trimap, cfg: EvalConfig) -> np.ndarray:
    image = np.asarray(image, dtype=np.float32)
    trimap = np.asarray(trimap)
    if image.shape[:2] != trimap.shape:
        raise ShapeMismatchError(f"Image {image.shape[:2]} and trimap {trimap.shape} differ in size")
    height, width = trimap.shape
    model.eval()

    pad_h, pad_w = pad_amounts(height), pad_amounts(width)
    image_p = reflect_pad(image, pad_h, pad_w)
    trimap_p = reflect_pad(trimap, pad_h, pad_w)
    H, W = trimap_p.shape

    if max(height, width) <= cfg.max_side:
        alpha = run_network(model, image_p, trimap_p)
    else:
        weights = np.zeros((H, W))
        accum = np.zeros((H, W))
        for top, left, th, tw in iter_tiles(H, W, cfg.tile_size, cfg.tile_overlap):
            log(f"tile ({top}, {left}) {th}x{tw}", verbose_only=True)
            window = (slice(top, top + th), slice(left, left + tw))
            pred = run_network(model, image_p[window], trimap_p[window])
            ramp = np.outer(blend_ramp(th, cfg.tile_overlap), blend_ramp(tw, cfg.tile_overlap))
            accum[window] += pred * ramp
            weights[window] += ramp
        alpha = accum / weights

    alpha = np.clip(alpha[:height, :width], 0.0, 1.0)
    if cfg.trust_trimap:
        alpha = np.where(trimap == FG, 1.0, np.where(trimap == BG, 0.0, alpha))
    return alpha


def predict_sample(model: TriTokenMattingNet, sample: MattingSample, cfg: EvalConfig) -> np.ndarray:
    return predict_alpha(model, sample.image, sample.trimap, cfg)
