"""
Tests for the training losses.

Coverage:
- alpha_loss and composition_loss against brute-force sums
- Laplacian pyramid: level count, explicit-convolution oracle, constant offsets
- total_loss weighting and compute_losses region modes
- Error cases: empty region, missing planes, shape mismatch
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from transmat.core.config import LossConfig
from transmat.core.errors import EmptyRegionError, ShapeMismatchError
from transmat.training.losses import (
    LossComponents,
    alpha_loss,
    composition_loss,
    compute_losses,
    laplacian_loss,
    laplacian_pyramid,
    pyramid_levels,
    total_loss,
)

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _rand(*shape, seed: int = 0) -> torch.Tensor:
    return torch.rand(*shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)


def _np_blur(plane: np.ndarray, scale: float = 1.0) -> np.ndarray:
    padded = np.pad(plane, 2, mode="reflect")
    out = np.zeros_like(plane)
    for dy in range(5):
        for dx in range(5):
            weight = BINOMIAL[dy] * BINOMIAL[dx] * scale
            out += weight * padded[dy:dy + plane.shape[0], dx:dx + plane.shape[1]]
    return out


def _np_pyramid(plane: np.ndarray, levels: int):
    pyramid = []
    current = plane
    for _ in range(levels - 1):
        down = _np_blur(current)[::2, ::2]
        up = np.zeros((2 * down.shape[0], 2 * down.shape[1]))
        up[::2, ::2] = down
        up = _np_blur(up, scale=4.0)[: current.shape[0], : current.shape[1]]
        pyramid.append(current - up)
        current = down
    pyramid.append(current)
    return pyramid


# ---------------------------------------------------------------------------
# Alpha and composition losses
# ---------------------------------------------------------------------------

class TestAlphaLoss:
    def test_identical_is_zero(self):
        gt = _rand(1, 1, 4, 4)
        assert float(alpha_loss(gt, gt, torch.ones_like(gt))) == 0.0

    def test_constant_offset(self):
        gt = _rand(1, 1, 4, 4) * 0.5
        assert float(alpha_loss(gt + 0.1, gt, torch.ones_like(gt))) == pytest.approx(0.1, abs=1e-12)

    def test_brute_force(self):
        pred, gt = _rand(1, 1, 4, 4, seed=1), _rand(1, 1, 4, 4, seed=2)
        region = (_rand(1, 1, 4, 4, seed=3) > 0.4).double()
        total, count = 0.0, 0
        for y in range(4):
            for x in range(4):
                if region[0, 0, y, x]:
                    total += abs(float(pred[0, 0, y, x]) - float(gt[0, 0, y, x]))
                    count += 1
        assert float(alpha_loss(pred, gt, region)) == pytest.approx(total / count, abs=1e-12)

    def test_empty_region(self):
        gt = _rand(1, 1, 4, 4)
        with pytest.raises(EmptyRegionError):
            alpha_loss(gt, gt, torch.zeros_like(gt))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            alpha_loss(_rand(1, 1, 4, 4), _rand(1, 1, 4, 5), torch.ones(1, 1, 4, 4))


class TestCompositionLoss:
    def test_equal_planes_cancel(self):
        fg = _rand(1, 3, 5, 5, seed=4)
        loss = composition_loss(_rand(1, 1, 5, 5, seed=5), fg, fg.clone(), fg.clone(), torch.ones(1, 1, 5, 5))
        assert float(loss) == pytest.approx(0.0, abs=1e-12)

    def test_ground_truth_recomposes(self):
        alpha, fg, bg = _rand(1, 1, 6, 6, seed=6), _rand(1, 3, 6, 6, seed=7), _rand(1, 3, 6, 6, seed=8)
        image = alpha * fg + (1 - alpha) * bg
        assert float(composition_loss(alpha, fg, bg, image, torch.ones_like(alpha))) <= 1e-12

    def test_brute_force(self):
        pred, fg, bg, image = (_rand(1, c, 3, 3, seed=s) for c, s in [(1, 9), (3, 10), (3, 11), (3, 12)])
        region = torch.tensor([[[[1.0, 0.0, 1.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]]], dtype=torch.float64)
        total, count = 0.0, 0
        for y in range(3):
            for x in range(3):
                if not region[0, 0, y, x]:
                    continue
                count += 1
                a = float(pred[0, 0, y, x])
                for c in range(3):
                    recomposed = a * float(fg[0, c, y, x]) + (1 - a) * float(bg[0, c, y, x])
                    total += abs(recomposed - float(image[0, c, y, x])) / 3
        loss = composition_loss(pred, fg, bg, image, region)
        assert float(loss) == pytest.approx(total / count, abs=1e-12)

    def test_missing_planes(self):
        alpha = _rand(1, 1, 4, 4)
        with pytest.raises(ShapeMismatchError, match="foreground"):
            composition_loss(alpha, None, None, _rand(1, 3, 4, 4), torch.ones_like(alpha))


# ---------------------------------------------------------------------------
# Laplacian loss
# ---------------------------------------------------------------------------

class TestLaplacian:
    @pytest.mark.parametrize("size,levels", [((16, 16), 4), ((32, 32), 5), ((64, 48), 5), ((5, 7), 2), ((1, 1), 1)])
    def test_level_count(self, size, levels):
        assert pyramid_levels(*size) == levels

    def test_pyramid_matches_explicit_convolution(self):
        plane = _rand(1, 1, 16, 16, seed=13)
        pyramid = laplacian_pyramid(plane, 4)
        expected = _np_pyramid(plane[0, 0].numpy(), 4)
        assert [tuple(level.shape[-2:]) for level in pyramid] == [(16, 16), (8, 8), (4, 4), (2, 2)]
        for level, oracle in zip(pyramid, expected):
            assert np.abs(level[0, 0].numpy() - oracle).max() <= 1e-12

    def test_loss_matches_explicit_pyramid(self):
        pred, gt = _rand(1, 1, 16, 16, seed=14), _rand(1, 1, 16, 16, seed=15)
        levels = _np_pyramid(pred[0, 0].numpy() - gt[0, 0].numpy(), 4)
        expected = sum(2.0 ** k * np.abs(level).mean() for k, level in enumerate(levels))
        assert float(laplacian_loss(pred, gt)) == pytest.approx(expected, abs=1e-10)

    def test_constant_offset_lands_in_coarsest_level(self):
        gt = _rand(1, 1, 32, 32, seed=16)
        loss = laplacian_loss(gt + 0.25, gt, torch.ones_like(gt))
        assert float(loss) == pytest.approx(16 * 0.25, abs=1e-9)

    def test_identical_is_zero(self):
        gt = _rand(2, 1, 16, 16, seed=17)
        assert float(laplacian_loss(gt, gt)) == 0.0

    def test_region_masks_before_pyramid(self):
        pred, gt = _rand(1, 1, 16, 16, seed=18), _rand(1, 1, 16, 16, seed=19)
        region = torch.zeros_like(pred)
        region[..., 4:12, 4:12] = 1.0
        changed = pred.clone()
        changed[..., 0, 0] = 0.0
        assert float(laplacian_loss(pred, gt, region)) == float(laplacian_loss(changed, gt, region))

    def test_small_planes_use_fewer_levels(self):
        assert float(laplacian_loss(_rand(1, 1, 3, 3, seed=20), _rand(1, 1, 3, 3, seed=21))) > 0.0


# ---------------------------------------------------------------------------
# Total loss
# ---------------------------------------------------------------------------

class TestTotalLoss:
    def test_unit_components(self):
        one = torch.tensor(1.0, dtype=torch.float64)
        assert float(total_loss(LossComponents(one, one, one), LossConfig())) == pytest.approx(1.76, abs=1e-12)

    def test_linear_in_each_component(self):
        weights = LossConfig(w_alpha=0.5, w_comp=2.0, w_lap=0.25)
        parts = LossComponents(torch.tensor(2.0), torch.tensor(3.0), torch.tensor(4.0))
        assert float(total_loss(parts, weights)) == pytest.approx(0.5 * 2 + 2.0 * 3 + 0.25 * 4)

    def test_compute_losses_zero_for_ground_truth(self):
        alpha, fg, bg = _rand(1, 1, 16, 16, seed=22), _rand(1, 3, 16, 16, seed=23), _rand(1, 3, 16, 16, seed=24)
        image = alpha * fg + (1 - alpha) * bg
        unknown = torch.ones_like(alpha, dtype=torch.bool)
        for lap_region in ("unknown", "full"):
            parts = compute_losses(alpha, alpha, fg, bg, image, unknown, LossConfig(lap_region=lap_region))
            assert float(parts.alpha) == 0.0
            assert float(parts.comp) <= 1e-12
            assert float(parts.lap) == 0.0

    def test_full_region_sees_known_pixels(self):
        gt = _rand(1, 1, 16, 16, seed=25)
        pred = gt.clone()
        pred[..., :4, :] += 0.3
        unknown = torch.zeros_like(gt, dtype=torch.bool)
        unknown[..., 8:, :] = True
        image = fg = bg = torch.zeros(1, 3, 16, 16, dtype=torch.float64)
        masked = compute_losses(pred, gt, fg, bg, image, unknown, LossConfig(lap_region="unknown"))
        full = compute_losses(pred, gt, fg, bg, image, unknown, LossConfig(lap_region="full"))
        assert float(masked.lap) == 0.0
        assert float(full.lap) > 0.0
        assert full.as_floats()["loss_alpha"] == 0.0
