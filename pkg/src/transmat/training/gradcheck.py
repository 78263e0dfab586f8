"""
Gradient check
--------------
Central finite differences against autograd, in double precision, on small
seeded inputs. Components register a builder that returns a GradCase: a
scalar-valued closure plus the leaf tensors to check. Each tensor gets

    rel = max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-12)

and a component passes when the worst tensor is within its tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import torch

from transmat.core.config import LossConfig, NetworkConfig
from transmat.core.errors import ConfigError
from transmat.core.logger import log
from transmat.matting.types import BG, UNK
from transmat.model.attention import MASK_VALUE, TGTBBlock, attention, tri_token_attention
from transmat.model.decoder import MGF
from transmat.model.encoder import CNNLocalExtractor
from transmat.model.network import build_model, calibrate_batchnorm
from transmat.model.tri_token import TriTokenSet
from transmat.training.losses import alpha_loss, composition_loss, laplacian_loss

EPSILON = 1e-5
TOLERANCE = 1e-4
MODEL_TOLERANCE = 1e-3
MODEL_ENTRIES_PER_TENSOR = 3
CALIBRATION_BATCH = 4
DTYPE = torch.float64


@dataclass
class GradCase:
    loss: Callable[[], torch.Tensor]
    tensors: Dict[str, torch.Tensor]
    tolerance: float = TOLERANCE
    # None checks every entry; otherwise a seeded subset per tensor
    max_entries: Optional[int] = None


@dataclass
class TensorCheck:
    name: str
    rel_error: float
    entries: int


@dataclass
class GradCheckReport:
    component: str
    seed: int
    tolerance: float
    tensors: List[TensorCheck] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((t.rel_error for t in self.tensors), default=0.0)

    @property
    def worst_tensor(self) -> str:
        if not self.tensors:
            return ""
        return max(self.tensors, key=lambda t: t.rel_error).name

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_row(self) -> dict:
        return {
            "component": self.component,
            "seed": self.seed,
            "status": "pass" if self.passed else "FAIL",
            "max_rel_error": self.max_rel_error,
            "tolerance": self.tolerance,
            "worst_tensor": self.worst_tensor,
            "tensors": len(self.tensors),
        }


COMPONENTS: Dict[str, Callable[[torch.Generator], GradCase]] = {}
DEFAULT_COMPONENTS = (
    "attention",
    "tri_token_attention",
    "tgtb_block",
    "mgf_fuse",
    "alpha_loss",
    "composition_loss",
    "laplacian_loss",
    "full_model_toy",
)


def register(name: str):
    def decorator(builder: Callable[[torch.Generator], GradCase]):
        COMPONENTS[name] = builder
        return builder
    return decorator


def _rand(gen: torch.Generator, *shape, requires_grad: bool = True) -> torch.Tensor:
    return torch.randn(*shape, generator=gen, dtype=DTYPE).requires_grad_(requires_grad)


def _weighted(out: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    return (out * weights).sum()


def _module_tensors(module: torch.nn.Module, prefix: str) -> Dict[str, torch.Tensor]:
    return {f"{prefix}.{name}": p for name, p in module.named_parameters()}


def _labels(gen: torch.Generator, *shape) -> torch.Tensor:
    return torch.randint(0, 3, shape, generator=gen)


@register("attention")
def _attention_case(gen: torch.Generator) -> GradCase:
    q, k, v = (_rand(gen, 4, 2, 6, 4) for _ in range(3))
    # last key hidden, as padding would be
    bias = torch.zeros(1, 1, 6, 6, dtype=DTYPE)
    bias[..., -1] = MASK_VALUE
    weights = _rand(gen, 4, 2, 6, 4, requires_grad=False)
    return GradCase(lambda: _weighted(attention(q, k, v, bias), weights), {"q": q, "k": k, "v": v})


@register("tri_token_attention")
def _tri_token_attention_case(gen: torch.Generator) -> GradCase:
    q, k, v, t = (_rand(gen, 3, 2, 4, 4) for _ in range(4))
    weights = _rand(gen, 3, 2, 4, 4, requires_grad=False)
    return GradCase(
        lambda: _weighted(tri_token_attention(q, k, v, t), weights),
        {"q": q, "k": k, "v": v, "tri_tokens": t},
    )


@register("tgtb_block")
def _tgtb_block_case(gen: torch.Generator) -> GradCase:
    block = TGTBBlock(8, 2, 2, mlp_ratio=2.0, shift=True, use_tri_token=True, rel_pos_bias=True).to(DTYPE)
    tokens = TriTokenSet(8, generator=gen).to(DTYPE)
    # nonzero init so the gradient reaches every parameter
    with torch.no_grad():
        for p in block.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=DTYPE) * 0.3)
        tokens.tokens.copy_(torch.randn(tokens.tokens.shape, generator=gen, dtype=DTYPE))
    x = _rand(gen, 1, 5, 5, 8)
    trimap = _labels(gen, 1, 10, 10)
    weights = _rand(gen, 1, 5, 5, 8, requires_grad=False)
    tensors = {"x": x, "tokens": tokens.tokens}
    tensors.update(_module_tensors(block, "block"))
    return GradCase(lambda: _weighted(block(x, tokens(trimap, 5, 5)), weights), tensors)


@register("mgf_fuse")
def _mgf_case(gen: torch.Generator) -> GradCase:
    mgf = MGF(4, 6, 8, squeeze_ratio=2).to(DTYPE)
    with torch.no_grad():
        for p in mgf.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=DTYPE) * 0.5)
    t_prev, t_n, t_next = _rand(gen, 2, 4, 7, 7), _rand(gen, 2, 6, 4, 4), _rand(gen, 2, 8, 2, 2)
    nonbg = (torch.rand(2, 1, 14, 14, generator=gen) > 0.3).to(DTYPE)
    weights = _rand(gen, 2, 6, 4, 4, requires_grad=False)
    tensors = {"t_prev": t_prev, "t_n": t_n, "t_next": t_next}
    tensors.update(_module_tensors(mgf, "mgf"))
    return GradCase(lambda: _weighted(mgf(t_prev, t_n, t_next, nonbg), weights), tensors)


def _loss_inputs(gen: torch.Generator):
    size = (2, 1, 16, 16)
    pred = (0.05 + 0.9 * torch.rand(*size, generator=gen, dtype=DTYPE)).requires_grad_(True)
    gt = torch.rand(*size, generator=gen, dtype=DTYPE)
    unknown = torch.rand(*size, generator=gen) > 0.4
    return pred, gt, unknown


@register("alpha_loss")
def _alpha_loss_case(gen: torch.Generator) -> GradCase:
    pred, gt, unknown = _loss_inputs(gen)
    return GradCase(lambda: alpha_loss(pred, gt, unknown), {"pred": pred})


@register("composition_loss")
def _composition_loss_case(gen: torch.Generator) -> GradCase:
    pred, _, unknown = _loss_inputs(gen)
    fg = torch.rand(2, 3, 16, 16, generator=gen, dtype=DTYPE).requires_grad_(True)
    bg = torch.rand(2, 3, 16, 16, generator=gen, dtype=DTYPE).requires_grad_(True)
    image = torch.rand(2, 3, 16, 16, generator=gen, dtype=DTYPE)
    return GradCase(lambda: composition_loss(pred, fg, bg, image, unknown), {"pred": pred, "fg": fg, "bg": bg})


@register("laplacian_loss")
def _laplacian_loss_case(gen: torch.Generator) -> GradCase:
    pred, gt, unknown = _loss_inputs(gen)
    levels = LossConfig().lap_levels
    # unknown-region and full-image variants
    return GradCase(
        lambda: laplacian_loss(pred, gt, unknown, levels) + laplacian_loss(pred, gt, None, levels),
        {"pred": pred},
    )


TOY_NETWORK = NetworkConfig(
    cnn_widths=(4, 8),
    cnn_blocks=(1, 1),
    embed_dims=(8, 8, 16, 16),
    num_heads=(2, 2, 2, 2),
    blocks_per_stage=(2, 1, 1, 1),
    window_size=2,
    mlp_ratio=2.0,
    rel_pos_bias=True,
    squeeze_ratio=2,
)


def _spread_normalization(model: torch.nn.Module, gen: torch.Generator) -> None:
    # affine params drawn around identity; running stats are refit afterwards
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, torch.nn.modules.batchnorm._BatchNorm):
                m.weight.copy_(1.0 + 0.3 * torch.randn(m.weight.shape, generator=gen, dtype=DTYPE))
                m.bias.copy_(0.3 * torch.randn(m.bias.shape, generator=gen, dtype=DTYPE))


@register("full_model_toy")
def _full_model_case(gen: torch.Generator) -> GradCase:
    model = build_model(TOY_NETWORK, seed=int(torch.randint(0, 2**31 - 1, (1,), generator=gen)), dtype=DTYPE)
    _spread_normalization(model, gen)
    calib_trimap = _labels(gen, CALIBRATION_BATCH, 32, 32)
    calib_trimap[:, 0, 0] = UNK
    calibrate_batchnorm(model, torch.rand(CALIBRATION_BATCH, 3, 32, 32, generator=gen, dtype=DTYPE), calib_trimap)
    image = torch.rand(1, 3, 32, 32, generator=gen, dtype=DTYPE).requires_grad_(True)
    trimap = _labels(gen, 1, 32, 32)
    trimap[0, 0, 0] = UNK
    trimap[0, -1, -1] = BG
    weights = _rand(gen, 1, 1, 32, 32, requires_grad=False)
    tensors = {"image": image}
    tensors.update(_module_tensors(model, "model"))
    return GradCase(
        lambda: _weighted(model(image, trimap), weights),
        tensors,
        tolerance=MODEL_TOLERANCE,
        max_entries=MODEL_ENTRIES_PER_TENSOR,
    )


@register("cnn_local_extractor")
def _cnn_case(gen: torch.Generator) -> GradCase:
    extractor = CNNLocalExtractor((4, 8), (1, 1)).to(DTYPE)
    _spread_normalization(extractor, gen)
    calibrate_batchnorm(
        extractor,
        torch.rand(CALIBRATION_BATCH, 3, 16, 16, generator=gen, dtype=DTYPE),
        _labels(gen, CALIBRATION_BATCH, 16, 16),
    )
    image = torch.rand(1, 3, 16, 16, generator=gen, dtype=DTYPE).requires_grad_(True)
    trimap = _labels(gen, 1, 16, 16)
    w1, w2 = _rand(gen, 1, 4, 8, 8, requires_grad=False), _rand(gen, 1, 8, 4, 4, requires_grad=False)

    def loss():
        s1, s2 = extractor(image, trimap)
        return _weighted(s1, w1) + _weighted(s2, w2)

    tensors = {"image": image}
    tensors.update(_module_tensors(extractor, "cnn"))
    return GradCase(loss, tensors, tolerance=MODEL_TOLERANCE, max_entries=MODEL_ENTRIES_PER_TENSOR * 2)


def _entries(tensor: torch.Tensor, max_entries: Optional[int], gen: torch.Generator) -> List[int]:
    total = tensor.numel()
    if max_entries is None or total <= max_entries:
        return list(range(total))
    return sorted(torch.randperm(total, generator=gen)[:max_entries].tolist())


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    scale = max(float(analytic.abs().max()), float(numeric.abs().max()), 1e-12)
    return float((analytic - numeric).abs().max()) / scale


def analytic_gradients(case: GradCase) -> Dict[str, torch.Tensor]:
    for tensor in case.tensors.values():
        tensor.grad = None
    case.loss().backward()
    return {
        name: (t.grad.detach().clone() if t.grad is not None else torch.zeros_like(t))
        for name, t in case.tensors.items()
    }


def numeric_gradient(case: GradCase, tensor: torch.Tensor, indices: List[int], eps: float = EPSILON) -> torch.Tensor:
    flat = tensor.detach().view(-1)
    out = torch.zeros(len(indices), dtype=DTYPE)
    with torch.no_grad():
        for j, i in enumerate(indices):
            original = float(flat[i])
            flat[i] = original + eps
            plus = float(case.loss())
            flat[i] = original - eps
            minus = float(case.loss())
            flat[i] = original
            out[j] = (plus - minus) / (2 * eps)
    return out


def check_case(name: str, case: GradCase, seed: int, eps: float = EPSILON) -> GradCheckReport:
    report = GradCheckReport(component=name, seed=seed, tolerance=case.tolerance)
    analytic = analytic_gradients(case)
    pick = torch.Generator().manual_seed(seed)
    for tensor_name, tensor in case.tensors.items():
        indices = _entries(tensor, case.max_entries, pick)
        numeric = numeric_gradient(case, tensor, indices, eps)
        expected = analytic[tensor_name].reshape(-1)[indices]
        rel = relative_error(expected, numeric)
        report.tensors.append(TensorCheck(tensor_name, rel, len(indices)))
        log(f"{name}: {tensor_name} rel_error={rel:.3e} ({len(indices)} entries)", verbose_only=True)
    return report


def run_gradcheck(name: str, seed: int = 0, eps: float = EPSILON) -> GradCheckReport:
    if name not in COMPONENTS:
        raise ConfigError(f"Unknown gradcheck component '{name}'. Allowed: {', '.join(COMPONENTS)}")
    gen = torch.Generator().manual_seed(seed)
    return check_case(name, COMPONENTS[name](gen), seed, eps)
