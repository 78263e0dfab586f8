"""
Full matting network: encoder pyramid -> MGF decoder -> alpha in [0, 1].
"""

from __future__ import annotations

from typing import Dict, Optional

import torch
from torch import nn

from transmat.core.config import NetworkConfig
from transmat.core.errors import ConfigError
from transmat.matting.types import BG
from transmat.model.decoder import Decoder
from transmat.model.encoder import Encoder, FeaturePyramid


class TriTokenMattingNet(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        problems = cfg.violations()
        if problems:
            raise ConfigError("; ".join(problems))
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)

    def encode(self, image: torch.Tensor, trimap: torch.Tensor) -> FeaturePyramid:
        return self.encoder(image, trimap)

    def forward(self, image: torch.Tensor, trimap: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) image, (B, H, W) label trimap -> (B, 1, H, W) alpha."""
        pyramid = self.encoder(image, trimap)
        nonbg = (trimap != BG).to(image.dtype).unsqueeze(1)
        return self.decoder(pyramid, nonbg, image.shape[-2:])


def build_model(cfg: NetworkConfig, seed: Optional[int] = None, dtype: torch.dtype = torch.float32) -> TriTokenMattingNet:
    """Construct the network; with a seed, initialization is reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return TriTokenMattingNet(cfg).to(dtype)


def calibrate_batchnorm(model: nn.Module, image: torch.Tensor, trimap: torch.Tensor) -> nn.Module:
    """
    Set every BatchNorm running mean/var to the batch statistics of one
    forward pass over (image, trimap), then leave the model in eval mode.
    The batch needs more than one value per channel at the deepest level.
    """
    norms = [m for m in model.modules() if isinstance(m, nn.modules.batchnorm._BatchNorm)]
    momenta = [m.momentum for m in norms]
    for m in norms:
        m.reset_running_stats()
        m.momentum = None
    model.train()
    with torch.no_grad():
        model(image, trimap)
    for m, momentum in zip(norms, momenta):
        m.momentum = momentum
    return model.eval()


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def parameter_breakdown(model: TriTokenMattingNet) -> Dict[str, int]:
    """Parameter counts per top-level part, for ablation reports."""
    tokens = sum(
        stage.tokens.tokens.numel() for stage in model.encoder.stages if stage.tokens is not None
    )
    mgf = sum(p.numel() for p in model.decoder.mgf.parameters())
    return {
        "encoder": parameter_count(model.encoder),
        "tri_tokens": tokens,
        "decoder": parameter_count(model.decoder),
        "mgf": mgf,
        "total": parameter_count(model),
    }
