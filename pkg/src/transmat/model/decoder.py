"""
MGF decoder
-----------
Multi-scale Global-guided Fusion of three adjacent pyramid levels and the
UNet-style decoder that turns the pyramid into an alpha matte.

MGF on (T_prev, T_n, T_next) with the non-background mask:
  1. mask sampled (nearest) on T_prev's grid, T_prev * mask
  2. 2x average pool (ceil mode) to T_n's grid
  3. concat with T_n, 1x1 conv -> T_f
  4. GAP(T_next) -> FC -> ReLU -> {FC_gamma, FC_beta}
  5. T_f * sigmoid(gamma) + beta
  6. 3x3 fuse conv, plus T_n

Masking before pooling means T_prev values under BG never reach the output.
Pooling first would average BG and non-BG values into one coarse cell, and a
mask applied afterwards could not remove the BG share of that average.
"""

from __future__ import annotations

import math
from typing import List, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from transmat.core.config import NetworkConfig
from transmat.core.errors import ShapeMismatchError
from transmat.model.encoder import BasicBlock, FeaturePyramid
from transmat.model.tri_token import nearest_resample


def _half(size: int) -> int:
    return math.ceil(size / 2)


class ChannelGuidance(nn.Module):
    """Squeeze trunk producing per-channel (gamma, beta) from a pooled feature."""

    def __init__(self, in_ch: int, out_ch: int, squeeze_ratio: int, shared_trunk: bool = True):
        super().__init__()
        hidden = max(1, out_ch // squeeze_ratio)
        self.shared_trunk = shared_trunk
        self.trunk = nn.Sequential(nn.Linear(in_ch, hidden), nn.ReLU())
        self.beta_trunk = None if shared_trunk else nn.Sequential(nn.Linear(in_ch, hidden), nn.ReLU())
        self.fc_gamma = nn.Linear(hidden, out_ch)
        self.fc_beta = nn.Linear(hidden, out_ch)

    def forward(self, pooled: torch.Tensor):
        squeezed = self.trunk(pooled)
        gamma = self.fc_gamma(squeezed)
        beta = self.fc_beta(squeezed if self.shared_trunk else self.beta_trunk(pooled))
        return gamma, beta


class MGF(nn.Module):
    def __init__(
        self,
        prev_ch: int,
        ch: int,
        next_ch: int,
        squeeze_ratio: int = 4,
        local: bool = True,
        global_: bool = True,
        shared_trunk: bool = True,
    ):
        super().__init__()
        self.local = local
        self.global_ = global_
        self.align = nn.Conv2d((prev_ch if local else 0) + ch, ch, kernel_size=1)
        self.guidance = ChannelGuidance(next_ch, ch, squeeze_ratio, shared_trunk) if global_ else None
        self.fuse = nn.Conv2d(ch, ch, kernel_size=3, padding=1)

    def zero_init_fuse_(self):
        nn.init.zeros_(self.fuse.weight)
        nn.init.zeros_(self.fuse.bias)

    def forward(self, t_prev: torch.Tensor, t_n: torch.Tensor, t_next: torch.Tensor, nonbg: torch.Tensor) -> torch.Tensor:
        h, w = t_n.shape[-2:]
        if (_half(t_prev.shape[-2]), _half(t_prev.shape[-1])) != (h, w):
            raise ShapeMismatchError(f"MGF: T_prev {tuple(t_prev.shape[-2:])} is not at 2x the resolution of T_n {(h, w)}")
        if (_half(h), _half(w)) != tuple(t_next.shape[-2:]):
            raise ShapeMismatchError(f"MGF: T_next {tuple(t_next.shape[-2:])} is not at 1/2 the resolution of T_n {(h, w)}")

        if self.local:
            mask = nearest_resample(nonbg, *t_prev.shape[-2:]).to(t_prev.dtype)
            local = F.avg_pool2d(t_prev * mask, kernel_size=2, stride=2, ceil_mode=True)
            fused = self.align(torch.cat([local, t_n], dim=1))
        else:
            fused = self.align(t_n)

        if self.guidance is not None:
            gamma, beta = self.guidance(t_next.mean(dim=(2, 3)))
            fused = fused * torch.sigmoid(gamma)[:, :, None, None] + beta[:, :, None, None]

        return self.fuse(fused) + t_n


class DecoderLevel(nn.Module):
    def __init__(self, in_ch: int, skip_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(in_ch + skip_ch, out_ch, kernel_size=3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )
        self.block = BasicBlock(out_ch, out_ch)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear", align_corners=False)
        return self.block(self.conv(torch.cat([x, skip], dim=1)))


class Decoder(nn.Module):
    """
    Upsample-and-fuse from the deepest level back to 1/2 resolution; skips
    at levels with both neighbours go through MGF when enabled. A 1-channel
    sigmoid head runs at input resolution.
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        channels: Sequence[int] = cfg.pyramid_channels()
        self.use_mgf = cfg.use_mgf
        depth = len(channels)
        self.mgf = nn.ModuleDict()
        if cfg.use_mgf:
            for n in range(1, depth - 1):
                self.mgf[str(n)] = MGF(
                    channels[n - 1], channels[n], channels[n + 1],
                    squeeze_ratio=cfg.squeeze_ratio,
                    local=cfg.mgf_local,
                    global_=cfg.mgf_global,
                    shared_trunk=cfg.mgf_shared_trunk,
                )
        levels: List[nn.Module] = []
        in_ch = channels[-1]
        for n in range(depth - 2, -1, -1):
            levels.append(DecoderLevel(in_ch, channels[n], channels[n]))
            in_ch = channels[n]
        self.levels = nn.ModuleList(levels)
        self.head = nn.Sequential(
            nn.Conv2d(channels[0], channels[0], kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels[0], 1, kernel_size=3, padding=1),
        )

    def skip(self, pyramid: FeaturePyramid, n: int, nonbg: torch.Tensor) -> torch.Tensor:
        key = str(n)
        if key in self.mgf:
            return self.mgf[key](pyramid[n - 1], pyramid[n], pyramid[n + 1], nonbg)
        return pyramid[n]

    def forward(self, pyramid: FeaturePyramid, nonbg: torch.Tensor, size) -> torch.Tensor:
        x = pyramid[-1]
        depth = len(pyramid)
        for level, n in zip(self.levels, range(depth - 2, -1, -1)):
            x = level(x, self.skip(pyramid, n, nonbg))
        x = F.interpolate(x, size=size, mode="bilinear", align_corners=False)
        return torch.sigmoid(self.head(x))
