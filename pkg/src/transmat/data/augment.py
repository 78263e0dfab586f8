"""
Augmentation
------------
Flip, rotation, scaling and shearing applied with one set of parameters to
every plane of a sample.

Parameters are drawn separately (`draw_params`) from their application
(`apply_augmentation`) so a draw can be replayed. Exact pixel permutations
(flips and multiples of 90 degrees at unit scale, no shear) permute all
planes without resampling; any other draw warps foreground, background and
alpha with one affine matrix, recomposites the image and regenerates the
trimap from the warped alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from transmat.core.config import AugmentationConfig
from transmat.data.composition import composite
from transmat.data.trimap import generate_trimap
from transmat.matting.types import MattingSample, PLANES


@dataclass(frozen=True)
class AugmentParams:
    flip: bool = False
    angle: float = 0.0
    scale: float = 1.0
    shear: float = 0.0
    erode_radius: int = 1
    dilate_radius: int = 1

    @property
    def is_identity(self) -> bool:
        return not self.flip and self.angle % 360.0 == 0.0 and self.scale == 1.0 and self.shear == 0.0

    @property
    def quarter_turns(self):
        """Number of 90-degree turns if this draw is an exact pixel permutation, else None."""
        if self.scale != 1.0 or self.shear != 0.0 or self.angle % 90.0 != 0.0:
            return None
        return int(self.angle // 90.0) % 4


def draw_params(cfg: AugmentationConfig, rng: np.random.Generator) -> AugmentParams:
    flip = bool(rng.random() < cfg.flip_probability)
    angle = float(rng.uniform(-cfg.rotation_range, cfg.rotation_range)) if cfg.rotation_range > 0 else 0.0
    low, high = cfg.scale_range
    scale = float(rng.uniform(low, high)) if high > low else float(low)
    shear = float(rng.uniform(-cfg.shear_range, cfg.shear_range)) if cfg.shear_range > 0 else 0.0
    erode_radius = int(rng.integers(cfg.trimap_kernel_min, cfg.trimap_kernel_max + 1))
    dilate_radius = int(rng.integers(cfg.trimap_kernel_min, cfg.trimap_kernel_max + 1))
    return AugmentParams(flip, angle, scale, shear, erode_radius, dilate_radius)


def affine_matrix(params: AugmentParams, height: int, width: int) -> np.ndarray:
    """2x3 matrix: rotation, shear and scale about the image center."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    theta = math.radians(params.angle)
    # counter-clockwise on screen (y axis points down), same as cv2.getRotationMatrix2D
    rotation = np.array([[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]])
    shear = np.array([[1.0, math.tan(math.radians(params.shear))], [0.0, 1.0]])
    linear = rotation @ shear * params.scale
    center = np.array([cx, cy])
    offset = center - linear @ center
    return np.hstack([linear, offset[:, None]]).astype(np.float64)


def _warp(plane: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    height, width = plane.shape[:2]
    warped = cv2.warpAffine(
        plane, matrix, (width, height), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REFLECT
    )
    return np.clip(warped, 0.0, 1.0).astype(np.float32)


def _permute(plane: np.ndarray, flip: bool, turns: int) -> np.ndarray:
    if flip:
        plane = plane[:, ::-1]
    if turns:
        plane = np.rot90(plane, k=turns, axes=(0, 1))
    return np.ascontiguousarray(plane)


def apply_augmentation(sample: MattingSample, params: AugmentParams) -> MattingSample:
    if params.is_identity:
        return sample
    turns = params.quarter_turns
    if turns is not None:
        return sample.with_planes(**{name: _permute(getattr(sample, name), params.flip, turns) for name in PLANES})

    fg, bg, alpha = sample.gt_foreground, sample.gt_background, sample.gt_alpha
    if params.flip:
        fg, bg, alpha = (np.ascontiguousarray(p[:, ::-1]) for p in (fg, bg, alpha))
    matrix = affine_matrix(params, *alpha.shape)
    fg, bg, alpha = _warp(fg, matrix), _warp(bg, matrix), _warp(alpha, matrix)
    return sample.with_planes(
        image=composite(fg, bg, alpha),
        trimap=generate_trimap(alpha, params.erode_radius, params.dilate_radius),
        gt_alpha=alpha,
        gt_foreground=fg,
        gt_background=bg,
    )


def augment(sample: MattingSample, cfg: AugmentationConfig, rng: np.random.Generator) -> MattingSample:
    return apply_augmentation(sample, draw_params(cfg, rng))
