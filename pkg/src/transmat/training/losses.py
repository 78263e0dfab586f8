"""
Losses
------
Alpha, composition and Laplacian-pyramid losses and their weighted total.

Alpha and composition losses are L1 over the unknown region, normalized by
the region's pixel count. The Laplacian loss compares pyramids of the
region-masked mattes (or the full planes with lap_region="full").
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import torch
import torch.nn.functional as F

from transmat.core.config import LossConfig
from transmat.core.errors import EmptyRegionError, ShapeMismatchError

MAX_PYRAMID_LEVELS = 5

_BINOMIAL = torch.tensor([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class LossComponents:
    alpha: torch.Tensor
    comp: torch.Tensor
    lap: torch.Tensor

    def as_floats(self) -> Dict[str, float]:
        return {
            "loss_alpha": float(self.alpha),
            "loss_comp": float(self.comp),
            "loss_lap": float(self.lap),
        }


def _region_count(region: torch.Tensor) -> torch.Tensor:
    count = region.sum()
    if float(count) == 0.0:
        raise EmptyRegionError("Loss region is empty (no unknown pixels in the batch).")
    return count


def _check_shapes(*tensors: torch.Tensor):
    shapes = {tuple(t.shape[-2:]) for t in tensors}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"Loss inputs disagree in spatial shape: {sorted(shapes)}")


def alpha_loss(pred: torch.Tensor, gt: torch.Tensor, region: torch.Tensor) -> torch.Tensor:
    _check_shapes(pred, gt, region)
    region = region.to(pred.dtype)
    return ((pred - gt).abs() * region).sum() / _region_count(region)


def composition_loss(
    pred_alpha: torch.Tensor,
    fg: torch.Tensor,
    bg: torch.Tensor,
    image: torch.Tensor,
    region: torch.Tensor,
) -> torch.Tensor:
    """L1 between composite(fg, bg, pred_alpha) and the image, channel-averaged."""
    if fg is None or bg is None:
        raise ShapeMismatchError("composition_loss needs ground-truth foreground and background planes")
    _check_shapes(pred_alpha, fg, bg, image, region)
    region = region.to(pred_alpha.dtype)
    recomposed = pred_alpha * fg + (1.0 - pred_alpha) * bg
    channels = image.shape[1]
    return ((recomposed - image).abs() * region).sum() / (channels * _region_count(region))


def _kernel(x: torch.Tensor, scale: float = 1.0) -> torch.Tensor:
    k1 = _BINOMIAL.to(device=x.device, dtype=x.dtype)
    return (torch.outer(k1, k1) * scale).expand(x.shape[1], 1, 5, 5).contiguous()


def _blur(x: torch.Tensor, scale: float = 1.0) -> torch.Tensor:
    mode = "reflect" if min(x.shape[-2:]) > 2 else "replicate"
    return F.conv2d(F.pad(x, (2, 2, 2, 2), mode=mode), _kernel(x, scale), groups=x.shape[1])


def pyramid_down(x: torch.Tensor) -> torch.Tensor:
    return _blur(x)[..., ::2, ::2]


def pyramid_up(x: torch.Tensor, size) -> torch.Tensor:
    B, C, h, w = x.shape
    up = torch.zeros(B, C, 2 * h, 2 * w, device=x.device, dtype=x.dtype)
    up[..., ::2, ::2] = x
    return _blur(up, scale=4.0)[..., : size[0], : size[1]]


def pyramid_levels(height: int, width: int, max_levels: int = MAX_PYRAMID_LEVELS) -> int:
    """min(max_levels, floor(log2(min side))), at least 1."""
    return max(1, min(max_levels, int(math.floor(math.log2(max(1, min(height, width)))))))


def laplacian_pyramid(x: torch.Tensor, levels: int) -> List[torch.Tensor]:
    """levels-1 band-pass residuals followed by the coarsest low-pass image."""
    pyramid = []
    current = x
    for _ in range(levels - 1):
        down = pyramid_down(current)
        pyramid.append(current - pyramid_up(down, current.shape[-2:]))
        current = down
    pyramid.append(current)
    return pyramid


def laplacian_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    region: Optional[torch.Tensor] = None,
    max_levels: int = MAX_PYRAMID_LEVELS,
) -> torch.Tensor:
    """sum_k 2^(k-1) * mean |Lap_k(pred * region) - Lap_k(gt * region)|."""
    _check_shapes(pred, gt)
    if region is not None:
        _check_shapes(pred, region)
        region = region.to(pred.dtype)
        pred, gt = pred * region, gt * region
    levels = pyramid_levels(*pred.shape[-2:], max_levels)
    total = pred.new_zeros(())
    for k, (lp, lg) in enumerate(zip(laplacian_pyramid(pred, levels), laplacian_pyramid(gt, levels)), start=1):
        total = total + (2.0 ** (k - 1)) * (lp - lg).abs().mean()
    return total


def total_loss(components: LossComponents, weights: LossConfig) -> torch.Tensor:
    return weights.w_alpha * components.alpha + weights.w_comp * components.comp + weights.w_lap * components.lap


def compute_losses(
    pred: torch.Tensor,
    gt_alpha: torch.Tensor,
    fg: torch.Tensor,
    bg: torch.Tensor,
    image: torch.Tensor,
    unknown: torch.Tensor,
    cfg: LossConfig,
) -> LossComponents:
    lap_region = unknown if cfg.lap_region == "unknown" else None
    return LossComponents(
        alpha=alpha_loss(pred, gt_alpha, unknown),
        comp=composition_loss(pred, fg, bg, image, unknown),
        lap=laplacian_loss(pred, gt_alpha, lap_region, cfg.lap_levels),
    )
