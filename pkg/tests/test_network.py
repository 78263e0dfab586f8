"""
Tests for the encoder, the MGF decoder and the assembled network.

Coverage:
- Encoder pyramid shapes and input size checks
- MGF: straight-line float64 oracle, background suppression, zero-fuse identity
- Decoder output range and shape
- Ablation presets: parameter ordering and tri-token stage subsets
- BatchNorm calibration; per-sample outputs independent of batch composition
"""

import sys
from dataclasses import replace
from pathlib import Path

import pytest
import torch
import torch.nn.functional as F

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from transmat.core.config import PRESETS, NetworkConfig, load_config
from transmat.core.errors import ConfigError, ShapeMismatchError
from transmat.matting.types import BG, FG, UNK
from transmat.model.decoder import MGF
from transmat.model.encoder import CNNLocalExtractor, encode_trimap_plane
from transmat.model.network import build_model, calibrate_batchnorm, parameter_breakdown, parameter_count
from transmat.model.tri_token import nearest_indices, nearest_resample

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


def _gen(seed: int = 0) -> torch.Generator:
    return torch.Generator().manual_seed(seed)


def _inputs(size: int = 64, batch: int = 1, seed: int = 0):
    gen = _gen(seed)
    image = torch.rand(batch, 3, size, size, generator=gen)
    trimap = torch.randint(0, 3, (batch, size, size), generator=gen)
    return image, trimap


def _calibrated(cfg: NetworkConfig, seed: int):
    model = build_model(cfg, seed=seed)
    return calibrate_batchnorm(model, *_inputs(64, batch=4, seed=seed + 100))


def _mgf(seed: int, local: bool = True, global_: bool = True) -> MGF:
    torch.manual_seed(seed)
    module = MGF(4, 6, 8, squeeze_ratio=2, local=local, global_=global_).double()
    gen = _gen(seed + 1000)
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.5)
    return module


def _mgf_inputs(seed: int, size: int = 8):
    gen = _gen(seed)
    half, quarter = (size + 1) // 2, (size + 3) // 4
    t_prev = torch.randn(2, 4, size, size, generator=gen, dtype=torch.float64)
    t_n = torch.randn(2, 6, half, half, generator=gen, dtype=torch.float64)
    t_next = torch.randn(2, 8, quarter, quarter, generator=gen, dtype=torch.float64)
    nonbg = torch.randint(0, 2, (2, 1, 2 * size, 2 * size), generator=gen).double()
    return t_prev, t_n, t_next, nonbg


def _mgf_reference(module: MGF, t_prev, t_n, t_next, nonbg) -> torch.Tensor:
    B, C, H, W = t_prev.shape
    rows = nearest_indices(nonbg.shape[-2], H)
    cols = nearest_indices(nonbg.shape[-1], W)
    mask = nonbg[:, :, rows][:, :, :, cols]
    local = (t_prev * mask).reshape(B, C, H // 2, 2, W // 2, 2).mean(dim=(3, 5))

    stacked = torch.cat([local, t_n], dim=1)
    align_w = module.align.weight[:, :, 0, 0]
    fused = torch.einsum("oc,bchw->bohw", align_w, stacked) + module.align.bias[None, :, None, None]

    guidance = module.guidance
    pooled = t_next.mean(dim=(2, 3))
    hidden = torch.relu(pooled @ guidance.trunk[0].weight.T + guidance.trunk[0].bias)
    gamma = hidden @ guidance.fc_gamma.weight.T + guidance.fc_gamma.bias
    beta = hidden @ guidance.fc_beta.weight.T + guidance.fc_beta.bias
    fused = fused * torch.sigmoid(gamma)[:, :, None, None] + beta[:, :, None, None]

    return F.conv2d(fused, module.fuse.weight, module.fuse.bias, padding=1) + t_n


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

class TestEncoder:
    def test_pyramid_shapes(self):
        model = build_model(SMALL, seed=0).eval()
        image, trimap = _inputs(64)
        pyramid = model.encode(image, trimap)
        assert [tuple(t.shape[-2:]) for t in pyramid] == [(32, 32), (16, 16), (8, 8), (4, 4), (2, 2), (1, 1)]
        assert [t.shape[1] for t in pyramid] == list(SMALL.pyramid_channels())

    def test_default_pyramid_channels(self):
        model = build_model(NetworkConfig(), seed=0).eval()
        image, trimap = _inputs(64)
        with torch.no_grad():
            pyramid = model.encode(image, trimap)
        assert [t.shape[1] for t in pyramid] == [16, 32, 64, 128, 256, 512]

    def test_rejects_unaligned_input(self):
        model = build_model(SMALL, seed=0).eval()
        image, trimap = _inputs(64)
        with pytest.raises(ShapeMismatchError, match="32"):
            model(image[..., :60, :], trimap[..., :60, :])

    def test_trimap_plane_encoding(self):
        trimap = torch.tensor([[[int(FG), int(BG), int(UNK)]]])
        plane = encode_trimap_plane(trimap)
        assert plane.shape == (1, 1, 1, 3)
        assert torch.allclose(plane.flatten(), torch.tensor([1.0, 0.0, 128 / 255]))


# ---------------------------------------------------------------------------
# MGF
# ---------------------------------------------------------------------------

class TestMGF:
    @pytest.mark.parametrize("seed", range(50))
    def test_matches_straight_line_oracle(self, seed):
        module = _mgf(seed)
        inputs = _mgf_inputs(seed)
        out = module(*inputs)
        expected = _mgf_reference(module, *inputs)
        assert float((out - expected).abs().max()) <= 1e-10

    @pytest.mark.parametrize("size", [8, 7])
    def test_background_never_reaches_output(self, size):
        module = _mgf(3)
        t_prev, t_n, t_next, nonbg = _mgf_inputs(4, size)
        mask = nearest_resample(nonbg, size, size)
        noise = torch.randn(t_prev.shape, generator=_gen(5), dtype=torch.float64) * 100.0
        changed = t_prev + noise * (1.0 - mask)
        assert torch.equal(module(t_prev, t_n, t_next, nonbg), module(changed, t_n, t_next, nonbg))

    def test_zero_fuse_is_identity(self):
        module = _mgf(6)
        module.zero_init_fuse_()
        t_prev, t_n, t_next, nonbg = _mgf_inputs(7)
        assert torch.equal(module(t_prev, t_n, t_next, nonbg), t_n)

    def test_ablated_branches(self):
        t_prev, t_n, t_next, nonbg = _mgf_inputs(8)
        for local, global_ in [(True, False), (False, True)]:
            module = _mgf(9, local=local, global_=global_)
            assert module(t_prev, t_n, t_next, nonbg).shape == t_n.shape
        assert _mgf(9, global_=False).guidance is None
        assert _mgf(9, local=False).align.in_channels == 6

    def test_rejects_misaligned_levels(self):
        module = _mgf(10)
        t_prev, t_n, t_next, nonbg = _mgf_inputs(11)
        with pytest.raises(ShapeMismatchError, match="T_prev"):
            module(t_prev[..., :4, :4], t_n, t_next, nonbg)
        with pytest.raises(ShapeMismatchError, match="T_next"):
            module(t_prev, t_n, t_next[..., :1, :1], nonbg)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class TestNetwork:
    def test_output_is_alpha_shaped_and_bounded(self):
        model = build_model(SMALL, seed=1).eval()
        image, trimap = _inputs(64, batch=2, seed=2)
        with torch.no_grad():
            alpha = model(image, trimap)
        assert alpha.shape == (2, 1, 64, 64)
        assert float(alpha.min()) >= 0.0 and float(alpha.max()) <= 1.0

    def test_non_square_input(self):
        model = build_model(SMALL, seed=1).eval()
        image, trimap = _inputs(96, seed=3)
        with torch.no_grad():
            assert model(image[..., :64, :], trimap[..., :64, :]).shape == (1, 1, 64, 96)

    def test_seeded_build_is_reproducible(self):
        a = build_model(SMALL, seed=4).state_dict()
        b = build_model(SMALL, seed=4).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    def test_invalid_config(self):
        with pytest.raises(ConfigError, match="num_heads"):
            build_model(NetworkConfig(num_heads=(3, 4, 8, 8)))

    def test_baseline_has_no_guidance(self):
        model = build_model(load_config(preset="baseline").model, seed=0)
        breakdown = parameter_breakdown(model)
        assert breakdown["tri_tokens"] == 0
        assert breakdown["mgf"] == 0
        assert breakdown["total"] == parameter_count(model)

    def test_ablation_parameter_ordering(self):
        totals = {
            preset: parameter_count(build_model(load_config(preset=preset).model, seed=0))
            for preset in ("baseline", "tgtb-only", "mgf-only", "full")
        }
        assert totals["baseline"] < totals["tgtb-only"] < totals["full"]
        assert totals["baseline"] < totals["mgf-only"] < totals["full"]
        tokens = parameter_breakdown(build_model(load_config(preset="full").model, seed=0))["tri_tokens"]
        assert totals["tgtb-only"] - totals["baseline"] == tokens

    def test_every_preset_builds(self):
        for preset in PRESETS:
            assert parameter_count(build_model(load_config(preset=preset).model, seed=0)) > 0

    @pytest.mark.parametrize("stages", [(1,), (4,), (1, 2, 3, 4)])
    def test_tri_token_stage_subsets(self, stages):
        cfg = replace(SMALL, tri_token_stages=stages)
        model = build_model(cfg, seed=5).eval()
        enabled = [stage.tokens is not None for stage in model.encoder.stages]
        assert enabled == [i + 1 in stages for i in range(4)]
        image, trimap = _inputs(64, seed=6)
        with torch.no_grad():
            assert model(image, trimap).shape == (1, 1, 64, 64)

    def test_trimap_changes_prediction(self):
        model = _calibrated(SMALL, seed=7)
        image, trimap = _inputs(64, seed=8)
        with torch.no_grad():
            a = model(image, trimap)
            b = model(image, torch.full_like(trimap, int(UNK)))
        assert (a - b).abs().max().item() > 1e-3


# ---------------------------------------------------------------------------
# BatchNorm calibration
# ---------------------------------------------------------------------------

class TestCalibration:
    def test_running_stats_match_batch(self):
        extractor = CNNLocalExtractor((4, 8), (1, 1))
        image, trimap = _inputs(32, batch=4, seed=21)
        calibrate_batchnorm(extractor, image, trimap)
        assert not extractor.training
        conv, norm = extractor.stage1[0], extractor.stage1[1]
        with torch.no_grad():
            x = conv(torch.cat([image, encode_trimap_plane(trimap)], dim=1))
        assert torch.allclose(norm.running_mean, x.mean(dim=(0, 2, 3)), atol=1e-5)
        assert torch.allclose(norm.running_var, x.var(dim=(0, 2, 3), unbiased=True), rtol=1e-4, atol=1e-6)
        assert norm.momentum == 0.1

    def test_calibrated_output_varies_over_pixels(self):
        image, trimap = _inputs(64, seed=22)
        fresh = build_model(SMALL, seed=3).eval()
        calibrated = _calibrated(SMALL, seed=3)
        with torch.no_grad():
            assert calibrated(image, trimap).std().item() > fresh(image, trimap).std().item()
            assert calibrated(image, trimap).std().item() > 1e-3


# ---------------------------------------------------------------------------
# Batch independence
# ---------------------------------------------------------------------------

# float32 eval mode; convolution kernels may block differently per batch size
BATCH_ATOL = 1e-5


class TestBatchIndependence:
    def test_network_sample_alone_matches_batch(self):
        model = _calibrated(SMALL, seed=11)
        image, trimap = _inputs(64, batch=3, seed=12)
        with torch.no_grad():
            batched = model(image, trimap)
            for i in range(3):
                alone = model(image[i : i + 1], trimap[i : i + 1])
                assert torch.allclose(batched[i : i + 1], alone, atol=BATCH_ATOL)

    def test_network_permuted_batch_gives_permuted_outputs(self):
        model = _calibrated(SMALL, seed=13)
        image, trimap = _inputs(64, batch=4, seed=14)
        order = torch.tensor([2, 0, 3, 1])
        with torch.no_grad():
            out = model(image, trimap)
            permuted = model(image[order], trimap[order])
        assert torch.allclose(permuted, out[order], atol=BATCH_ATOL)

    def test_encoder_permuted_batch_gives_permuted_pyramid(self):
        model = _calibrated(replace(SMALL, tri_token_stages=(1, 2, 3, 4)), seed=15)
        image, trimap = _inputs(64, batch=3, seed=16)
        order = torch.tensor([1, 2, 0])
        with torch.no_grad():
            pyramid = model.encoder(image, trimap)
            permuted = model.encoder(image[order], trimap[order])
        assert len(pyramid) == len(permuted) == 6
        for a, b in zip(pyramid, permuted):
            assert torch.allclose(b, a[order], rtol=1e-4, atol=BATCH_ATOL)
