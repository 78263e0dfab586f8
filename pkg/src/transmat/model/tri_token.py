"""
Tri-tokens
----------
Three learnable vectors (FG=0, BG=1, UNK=2) that replace trimap labels on a
feature grid. The trimap is resampled by nearest neighbour on labels, then
each position looks up its token, so every output vector is bit-equal to
one of the three tokens.
"""

from __future__ import annotations

from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from transmat.core.errors import ShapeMismatchError

TOKEN_COUNT = 3
TOKEN_INIT_STD = 0.02


def nearest_indices(source: int, target: int, device=None) -> torch.Tensor:
    """Source index of each of `target` positions: floor(i * source / target)."""
    return (torch.arange(target, device=device) * source) // target


def nearest_resample(plane: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Nearest-neighbour resampling over the last two dims (labels or masks)."""
    src_h, src_w = plane.shape[-2:]
    if height > src_h or width > src_w:
        raise ShapeMismatchError(f"Cannot downsample a {src_h}x{src_w} plane to a larger {height}x{width} grid")
    rows = nearest_indices(src_h, height, plane.device)
    cols = nearest_indices(src_w, width, plane.device)
    return plane.index_select(-2, rows).index_select(-1, cols)


def init_tokens(dim: int, generator: Optional[torch.Generator] = None, dtype=torch.float32) -> torch.Tensor:
    """Three mutually distinct N(0, 0.02^2) vectors of length dim."""
    if dim < 1:
        raise ValueError(f"token dimension must be >= 1, got {dim}")
    while True:
        tokens = torch.randn(TOKEN_COUNT, dim, generator=generator, dtype=dtype) * TOKEN_INIT_STD
        if torch.all(torch.pdist(tokens) > 0):
            return tokens


class TriTokenSet(nn.Module):
    def __init__(self, dim: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.dim = dim
        self.tokens = nn.Parameter(init_tokens(dim, generator))

    def forward(self, trimap: torch.Tensor, height: int, width: int) -> torch.Tensor:
        return expand(trimap, self.tokens, height, width)

    def extra_repr(self) -> str:
        return f"dim={self.dim}"


def expand(trimap: torch.Tensor, tokens: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """
    (B, H, W) label trimap -> (B, height, width, C) tri-token map.

    The gradient of token i is the sum of upstream gradients over the
    positions labeled i.
    """
    if tokens.shape[0] != TOKEN_COUNT:
        raise ShapeMismatchError(f"expected {TOKEN_COUNT} tokens, got {tokens.shape[0]}")
    labels = nearest_resample(trimap.long(), height, width)
    return F.embedding(labels, tokens)


def labels_from_map(tri_map: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Recover labels from a tri-token map by nearest-token matching."""
    distances = ((tri_map.unsqueeze(-2) - tokens) ** 2).sum(-1)
    return distances.argmin(-1)
