"""
Windowed attention
------------------
Window partitioning, plain and tri-token scaled dot-product attention, and
the Tri-token Guided Transformer Block (TGTB) with its stage.

Feature maps inside transformer stages are channels-last (B, H, W, C).
Grids not divisible by the window size M are zero-padded; padded keys get
an additive -1e4 bias so they receive (numerically) zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from transmat.core.errors import ShapeMismatchError
from transmat.model.tri_token import TriTokenSet

MASK_VALUE = -1e4


@dataclass
class WindowBatch:
    """(B * num_windows, M * M, C) windows plus what is needed to undo the partition."""

    windows: torch.Tensor
    batch: int
    height: int
    width: int
    padded_height: int
    padded_width: int
    window_size: int

    @property
    def num_windows(self) -> int:
        return (self.padded_height // self.window_size) * (self.padded_width // self.window_size)


def window_partition(x: torch.Tensor, window_size: int) -> WindowBatch:
    B, H, W, C = x.shape
    M = window_size
    pad_h = (M - H % M) % M
    pad_w = (M - W % M) % M
    if pad_h or pad_w:
        x = F.pad(x, (0, 0, 0, pad_w, 0, pad_h))
    Hp, Wp = H + pad_h, W + pad_w
    windows = x.reshape(B, Hp // M, M, Wp // M, M, C).permute(0, 1, 3, 2, 4, 5).reshape(-1, M * M, C)
    return WindowBatch(windows, B, H, W, Hp, Wp, M)


def window_reverse(batch: WindowBatch, windows: Optional[torch.Tensor] = None) -> torch.Tensor:
    windows = batch.windows if windows is None else windows
    M = batch.window_size
    C = windows.shape[-1]
    x = windows.reshape(batch.batch, batch.padded_height // M, batch.padded_width // M, M, M, C)
    x = x.permute(0, 1, 3, 2, 4, 5).reshape(batch.batch, batch.padded_height, batch.padded_width, C)
    return x[:, :batch.height, :batch.width, :].contiguous()


def window_bias(
    height: int,
    width: int,
    window_size: int,
    shift: Tuple[int, int] = (0, 0),
    device=None,
    dtype=torch.float32,
) -> Optional[torch.Tensor]:
    """
    Additive (num_windows, N, N) bias that hides padded keys and, for shifted
    windows, keys from the other side of the cyclic wrap. None when nothing
    needs masking.
    """
    M = window_size
    pad_h = (M - height % M) % M
    pad_w = (M - width % M) % M
    shift_h, shift_w = shift
    if not (pad_h or pad_w or shift_h or shift_w):
        return None

    rows = torch.arange(height + pad_h, device=device)
    cols = torch.arange(width + pad_w, device=device)
    # region ids on the rolled frame: 0 = not wrapped, 1 = wrapped, per axis
    region_h = (rows >= height - shift_h).long() if shift_h else torch.zeros_like(rows)
    region_w = (cols >= width - shift_w).long() if shift_w else torch.zeros_like(cols)
    region = region_h[:, None] * 2 + region_w[None, :]
    valid = (rows < height)[:, None] & (cols < width)[None, :]

    plane = torch.stack([region, valid.long()], dim=-1).unsqueeze(0)
    windows = window_partition(plane, M).windows
    region_win, valid_win = windows[..., 0], windows[..., 1].bool()
    blocked = (region_win.unsqueeze(2) != region_win.unsqueeze(1)) | ~valid_win.unsqueeze(1)
    return torch.zeros(blocked.shape, device=device, dtype=dtype).masked_fill(blocked, MASK_VALUE)


def attention_weights(q: torch.Tensor, k: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    logits = (q @ k.transpose(-2, -1)) * q.shape[-1] ** -0.5
    if bias is not None:
        logits = logits + bias
    return logits.softmax(dim=-1)


def attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """softmax(Q K^T / sqrt(d)) V over the last two dims."""
    return attention_weights(q, k, bias) @ v


def tri_token_attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    tri_tokens: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """softmax((Q + T) K^T / sqrt(d)) V with T the per-position tri-token."""
    if tri_tokens.shape != q.shape:
        raise ShapeMismatchError(f"tri-token map {tuple(tri_tokens.shape)} does not align with queries {tuple(q.shape)}")
    return attention(q + tri_tokens, k, v, bias)


def relative_position_index(window_size: int) -> torch.Tensor:
    coords = torch.stack(torch.meshgrid(torch.arange(window_size), torch.arange(window_size), indexing="ij"))
    coords = coords.flatten(1)
    relative = (coords[:, :, None] - coords[:, None, :]).permute(1, 2, 0).contiguous()
    relative[:, :, 0] += window_size - 1
    relative[:, :, 1] += window_size - 1
    relative[:, :, 0] *= 2 * window_size - 1
    return relative.sum(-1)


class WindowAttention(nn.Module):
    def __init__(self, dim: int, num_heads: int, window_size: int, rel_pos_bias: bool = False):
        super().__init__()
        if dim % num_heads:
            raise ValueError(f"dim {dim} is not divisible by num_heads {num_heads}")
        self.dim = dim
        self.num_heads = num_heads
        self.window_size = window_size
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        if rel_pos_bias:
            self.relative_position_bias_table = nn.Parameter(torch.zeros((2 * window_size - 1) ** 2, num_heads))
            nn.init.trunc_normal_(self.relative_position_bias_table, std=0.02)
            self.register_buffer("relative_position_index", relative_position_index(window_size), persistent=False)
        else:
            self.relative_position_bias_table = None

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        B_, N, C = x.shape
        return x.reshape(B_, N, self.num_heads, C // self.num_heads).transpose(1, 2)

    def forward(
        self,
        x: torch.Tensor,
        tri_map: Optional[torch.Tensor] = None,
        mask: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        B_, N, C = x.shape
        qkv = self.qkv(x).reshape(B_, N, 3, self.num_heads, C // self.num_heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)

        bias = None
        if self.relative_position_bias_table is not None:
            table = self.relative_position_bias_table[self.relative_position_index.view(-1)]
            bias = table.view(N, N, -1).permute(2, 0, 1).unsqueeze(0)
        if mask is not None:
            num_windows = mask.shape[0]
            window_mask = mask.unsqueeze(0).expand(B_ // num_windows, -1, -1, -1).reshape(B_, 1, N, N)
            bias = window_mask if bias is None else bias + window_mask

        if tri_map is not None:
            out = tri_token_attention(q, k, v, self._split_heads(tri_map), bias)
        else:
            out = attention(q, k, v, bias)
        return self.proj(out.transpose(1, 2).reshape(B_, N, C))


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class TGTBBlock(nn.Module):
    """
    Pre-norm residual block: x + MHSA(norm(x)), then x + MLP(norm(x)).
    MHSA is tri-token attention when `use_tri_token`, plain window attention
    otherwise.
    """

    def __init__(
        self,
        dim: int,
        num_heads: int,
        window_size: int,
        mlp_ratio: float = 4.0,
        shift: bool = False,
        use_tri_token: bool = False,
        rel_pos_bias: bool = False,
    ):
        super().__init__()
        self.window_size = window_size
        self.shift = shift
        self.use_tri_token = use_tri_token
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, num_heads, window_size, rel_pos_bias)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def shift_size(self, height: int, width: int) -> Tuple[int, int]:
        if not self.shift:
            return 0, 0
        half = self.window_size // 2
        return (half if height > self.window_size else 0), (half if width > self.window_size else 0)

    def zero_init_(self):
        """Zero both residual branch outputs, which makes the block an identity map."""
        for layer in (self.attn.proj, self.mlp.fc2):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def _attn(self, x: torch.Tensor, tri_map: Optional[torch.Tensor]) -> torch.Tensor:
        _, H, W, _ = x.shape
        shift = self.shift_size(H, W)
        if any(shift):
            x = torch.roll(x, shifts=(-shift[0], -shift[1]), dims=(1, 2))
            if tri_map is not None:
                tri_map = torch.roll(tri_map, shifts=(-shift[0], -shift[1]), dims=(1, 2))

        batch = window_partition(x, self.window_size)
        tri_windows = window_partition(tri_map, self.window_size).windows if tri_map is not None else None
        mask = window_bias(H, W, self.window_size, shift, device=x.device, dtype=x.dtype)
        x = window_reverse(batch, self.attn(batch.windows, tri_windows, mask))

        if any(shift):
            x = torch.roll(x, shifts=shift, dims=(1, 2))
        return x

    def forward(self, x: torch.Tensor, tri_map: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.use_tri_token and tri_map is None:
            raise ValueError("tri-token block called without a tri-token map")
        x = x + self._attn(self.norm1(x), tri_map if self.use_tri_token else None)
        return x + self.mlp(self.norm2(x))


class PatchMerging(nn.Module):
    """2x2 neighbourhood concat + linear; odd grids are zero-padded to even."""

    def __init__(self, dim: int, out_dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(4 * dim)
        self.reduction = nn.Linear(4 * dim, out_dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, H, W, C = x.shape
        x = F.pad(x, (0, 0, 0, W % 2, 0, H % 2))
        _, H, W, _ = x.shape
        x = x.reshape(B, H // 2, 2, W // 2, 2, C).permute(0, 1, 3, 4, 2, 5).flatten(3)
        return self.reduction(self.norm(x))


class TGTBStage(nn.Module):
    """
    `depth` TGTB blocks followed by a patch merge. Block b uses tri-token
    attention iff the stage has tri-tokens and b % tri_token_period == 0.
    Odd blocks use shifted windows.
    """

    def __init__(
        self,
        dim: int,
        out_dim: int,
        depth: int,
        num_heads: int,
        window_size: int,
        mlp_ratio: float = 4.0,
        tri_token_period: int = 5,
        use_tri_tokens: bool = True,
        shift_windows: bool = True,
        tri_token_shift: bool = True,
        rel_pos_bias: bool = False,
        zero_init_residual: bool = False,
    ):
        super().__init__()
        self.tokens = TriTokenSet(dim) if use_tri_tokens else None
        blocks = []
        for b in range(depth):
            use_tri = use_tri_tokens and b % tri_token_period == 0
            shift = shift_windows and b % 2 == 1 and (tri_token_shift or not use_tri)
            block = TGTBBlock(dim, num_heads, window_size, mlp_ratio, shift, use_tri, rel_pos_bias)
            if zero_init_residual:
                block.zero_init_()
            blocks.append(block)
        self.blocks = nn.ModuleList(blocks)
        self.downsample = PatchMerging(dim, out_dim)

    @property
    def tri_token_blocks(self) -> List[int]:
        return [b for b, block in enumerate(self.blocks) if block.use_tri_token]

    def forward(self, x: torch.Tensor, trimap: torch.Tensor) -> torch.Tensor:
        _, H, W, _ = x.shape
        tri_map = self.tokens(trimap, H, W) if self.tokens is not None else None
        for block in self.blocks:
            x = block(x, tri_map)
        return self.downsample(x)
