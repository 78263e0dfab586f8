"""
Tests for single-image inference.

Coverage:
- Padding amounts, tile origins and blend ramps
- Tiled prediction agrees with whole-image prediction for a pointwise model
- Output shape after padding, clipping, trust_trimap
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import torch
from torch import nn

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from transmat.core.config import EvalConfig, NetworkConfig
from transmat.core.errors import ShapeMismatchError
from transmat.data.dataset import sample_rng
from transmat.data.synthetic import synthetic_sample
from transmat.evaluation.inference import (
    blend_ramp,
    iter_tiles,
    pad_amounts,
    predict_alpha,
    predict_sample,
    reflect_pad,
    tile_starts,
)
from transmat.matting.types import BG, FG, UNK
from transmat.model.network import build_model

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

SMALL = NetworkConfig(
    cnn_widths=(4, 8),
    cnn_blocks=(1, 1),
    embed_dims=(8, 8, 16, 16),
    num_heads=(2, 2, 2, 2),
    blocks_per_stage=(2, 1, 1, 1),
    window_size=2,
    mlp_ratio=2.0,
    squeeze_ratio=2,
)


class PointwiseNet(nn.Module):
    """Per-pixel alpha from the image alone; tiling must not change it."""

    def __init__(self):
        super().__init__()
        self.scale = nn.Parameter(torch.tensor(3.0))

    def forward(self, image, trimap):
        if image.shape[-1] % 32 or image.shape[-2] % 32:
            raise AssertionError(f"unpadded input {tuple(image.shape)}")
        return torch.sigmoid(self.scale * (image.mean(dim=1, keepdim=True) - 0.5))


def _planes(height: int, width: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    image = rng.random((height, width, 3)).astype(np.float32)
    trimap = rng.integers(0, 3, (height, width)).astype(np.uint8)
    return image, trimap


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

class TestHelpers:
    def test_pad_amounts(self):
        assert [pad_amounts(n) for n in (32, 33, 50, 64, 1)] == [0, 31, 14, 0, 31]

    def test_reflect_pad(self):
        plane = np.arange(6, dtype=np.float64).reshape(2, 3)
        padded = reflect_pad(plane, 1, 2)
        assert padded.shape == (3, 5)
        assert padded[2].tolist() == [0.0, 1.0, 2.0, 1.0, 0.0]
        assert reflect_pad(plane, 0, 0) is plane

    def test_reflect_pad_single_row(self):
        assert reflect_pad(np.ones((1, 4)), 3, 0).shape == (4, 4)

    def test_tile_starts(self):
        assert tile_starts(50, 64, 16) == [0]
        assert tile_starts(100, 64, 16) == [0, 36]
        assert tile_starts(160, 64, 16) == [0, 48, 96]

    def test_tiles_cover_grid(self):
        covered = np.zeros((128, 160), bool)
        for top, left, th, tw in iter_tiles(128, 160, 64, 16):
            covered[top:top + th, left:left + tw] = True
        assert covered.all()

    def test_blend_ramp(self):
        assert np.allclose(blend_ramp(5, 2), [1 / 3, 2 / 3, 1.0, 2 / 3, 1 / 3])
        assert np.array_equal(blend_ramp(4, 0), np.ones(4))
        assert blend_ramp(64, 16).min() > 0


# ---------------------------------------------------------------------------
# predict_alpha
# ---------------------------------------------------------------------------

class TestPredict:
    def test_tiled_matches_whole_image(self):
        model = PointwiseNet()
        image, trimap = _planes(100, 130, seed=1)
        whole = predict_alpha(model, image, trimap, EvalConfig(max_side=1024))
        tiled = predict_alpha(model, image, trimap, EvalConfig(max_side=64, tile_size=64, tile_overlap=16))
        assert whole.shape == (100, 130)
        assert np.abs(whole - tiled).max() <= 1e-6

    def test_network_output_is_cropped_and_bounded(self):
        model = build_model(SMALL, seed=0)
        image, trimap = _planes(40, 50, seed=2)
        alpha = predict_alpha(model, image, trimap, EvalConfig())
        assert alpha.shape == (40, 50)
        assert alpha.min() >= 0.0 and alpha.max() <= 1.0

    def test_network_tiles(self):
        model = build_model(SMALL, seed=0)
        image, trimap = _planes(70, 90, seed=3)
        alpha = predict_alpha(model, image, trimap, EvalConfig(max_side=64, tile_size=64, tile_overlap=16))
        assert alpha.shape == (70, 90)
        assert np.isfinite(alpha).all()

    def test_trust_trimap(self):
        model = PointwiseNet()
        image, trimap = _planes(32, 32, seed=4)
        free = predict_alpha(model, image, trimap, EvalConfig())
        trusted = predict_alpha(model, image, trimap, EvalConfig(trust_trimap=True))
        assert np.all(trusted[trimap == FG] == 1.0)
        assert np.all(trusted[trimap == BG] == 0.0)
        assert np.array_equal(trusted[trimap == UNK], free[trimap == UNK])

    def test_deterministic(self):
        model = build_model(SMALL, seed=5)
        sample = synthetic_sample(sample_rng(5), size=64)
        assert np.array_equal(predict_sample(model, sample, EvalConfig()), predict_sample(model, sample, EvalConfig()))

    def test_size_mismatch(self):
        image, trimap = _planes(32, 32)
        with pytest.raises(ShapeMismatchError):
            predict_alpha(PointwiseNet(), image, trimap[:, :16], EvalConfig())
