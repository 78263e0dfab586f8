"""
Encoder
-------
CNN local extractor (two residual stages at 1/2 and 1/4 resolution) followed
by four TGTB stages, each ending in a 2x2 patch merge. The pyramid is

  [stage1 (1/2), stage2 (1/4), tgtb1 (1/8), tgtb2 (1/16), tgtb3 (1/32), tgtb4 (1/64)]

as channel-first tensors; odd grids round up when halved.
"""

from __future__ import annotations

from typing import List, Tuple

import torch
from torch import nn

from transmat.core.config import NETWORK_STRIDE, NetworkConfig
from transmat.core.errors import ShapeMismatchError
from transmat.matting.types import FG, UNK, TRIMAP_ENCODING
from transmat.model.attention import TGTBStage

FeaturePyramid = List[torch.Tensor]


def conv3x3(in_ch: int, out_ch: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1, bias=False)


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, zero_init_residual: bool = False):
        super().__init__()
        self.conv1 = conv3x3(in_ch, out_ch, stride)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = conv3x3(out_ch, out_ch)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.downsample = None
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, kernel_size=1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        if zero_init_residual:
            nn.init.zeros_(self.bn2.weight)

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


def encode_trimap_plane(trimap: torch.Tensor, dtype=torch.float32) -> torch.Tensor:
    """(B, H, W) labels -> (B, 1, H, W) plane: FG 1, BG 0, UNK 128/255."""
    plane = torch.zeros(trimap.shape, dtype=dtype, device=trimap.device)
    plane = plane.masked_fill(trimap == FG, 1.0)
    plane = plane.masked_fill(trimap == UNK, TRIMAP_ENCODING[UNK] / 255.0)
    return plane.unsqueeze(1)


class CNNLocalExtractor(nn.Module):
    """RGB + trimap plane -> features at 1/2 and 1/4 resolution."""

    def __init__(self, widths: Tuple[int, int], blocks: Tuple[int, int], zero_init_residual: bool = False):
        super().__init__()
        w1, w2 = widths
        stem = [
            nn.Conv2d(4, w1, kernel_size=3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(w1),
            nn.ReLU(inplace=True),
        ]
        stem += [BasicBlock(w1, w1, zero_init_residual=zero_init_residual) for _ in range(blocks[0])]
        self.stage1 = nn.Sequential(*stem)
        layer = [BasicBlock(w1, w2, stride=2, zero_init_residual=zero_init_residual)]
        layer += [BasicBlock(w2, w2, zero_init_residual=zero_init_residual) for _ in range(blocks[1] - 1)]
        self.stage2 = nn.Sequential(*layer)

    def forward(self, image: torch.Tensor, trimap: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([image, encode_trimap_plane(trimap, image.dtype)], dim=1)
        s1 = self.stage1(x)
        return s1, self.stage2(s1)


def check_input_size(height: int, width: int):
    if height % NETWORK_STRIDE or width % NETWORK_STRIDE:
        raise ShapeMismatchError(
            f"Input size {height}x{width} must be divisible by {NETWORK_STRIDE} in both dimensions"
        )


class Encoder(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        self.local = CNNLocalExtractor(cfg.cnn_widths, cfg.cnn_blocks, cfg.zero_init_residual)
        self.embed = nn.Conv2d(cfg.cnn_widths[1], cfg.embed_dims[0], kernel_size=1)
        out_dims = cfg.stage_out_dims()
        enabled = set(cfg.active_tri_token_stages)
        self.stages = nn.ModuleList(
            TGTBStage(
                dim=cfg.embed_dims[i],
                out_dim=out_dims[i],
                depth=cfg.blocks_per_stage[i],
                num_heads=cfg.num_heads[i],
                window_size=cfg.window_size,
                mlp_ratio=cfg.mlp_ratio,
                tri_token_period=cfg.tri_token_period,
                use_tri_tokens=(i + 1) in enabled,
                shift_windows=cfg.shift_windows,
                tri_token_shift=cfg.tri_token_shift,
                rel_pos_bias=cfg.rel_pos_bias,
                zero_init_residual=cfg.zero_init_residual,
            )
            for i in range(4)
        )

    def forward(self, image: torch.Tensor, trimap: torch.Tensor) -> FeaturePyramid:
        check_input_size(*image.shape[-2:])
        s1, s2 = self.local(image, trimap)
        x = self.embed(s2).permute(0, 2, 3, 1)
        pyramid = [s1, s2]
        for stage in self.stages:
            x = stage(x, trimap)
            pyramid.append(x.permute(0, 3, 1, 2).contiguous())
        return pyramid
