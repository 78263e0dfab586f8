# transmat/commands/infer.py
"""
Infer Command Module
--------------------
Predict the alpha matte of one image from its trimap.
"""

import time
from pathlib import Path
from typing import Optional

import typer

from transmat.commands.common import (
    CONFIG_OPTION,
    MAX_SIDE_OPTION,
    TILE_OVERLAP_OPTION,
    TILE_SIZE_OPTION,
    TRUST_TRIMAP_OPTION,
    load_model,
    resolve_config,
)
from transmat.core.errors import TransmatError
from transmat.core.notifier import fail, success, timed_summary
from transmat.evaluation.inference import predict_alpha
from transmat.matting.imageio import read_image, read_trimap, write_alpha


def infer_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", "-k", help="Checkpoint file."),
    image: Path = typer.Option(..., "--image", "-i", help="RGB input image (PNG)."),
    trimap: Path = typer.Option(..., "--trimap", "-t", help="Trimap PNG with values 0/128/255."),
    out: Path = typer.Option(..., "--out", "-o", help="Output alpha PNG (16-bit grayscale)."),
    config: Optional[Path] = CONFIG_OPTION,
    force: bool = typer.Option(False, "--force", help="Load even if the checkpoint's model config differs."),
    trust_trimap: Optional[bool] = TRUST_TRIMAP_OPTION,
    max_side: Optional[int] = MAX_SIDE_OPTION,
    tile_size: Optional[int] = TILE_SIZE_OPTION,
    tile_overlap: Optional[int] = TILE_OVERLAP_OPTION,
):
    """
    Write the predicted alpha of IMAGE as a 16-bit PNG.
    """
    started_at = time.perf_counter()
    try:
        flags = {
            "max_side": max_side,
            "tile_size": tile_size,
            "tile_overlap": tile_overlap,
            "trust_trimap": trust_trimap,
        }
        cfg = resolve_config(config, None, {"eval": flags})
        model = load_model(checkpoint, cfg if config is not None else None, force=force)
        alpha = predict_alpha(model, read_image(image), read_trimap(trimap), cfg.eval)
        write_alpha(out, alpha)
    except TransmatError as exc:
        fail(exc)

    success(f"Alpha written to {out}")
    timed_summary("Inference finished", time.perf_counter() - started_at)
