# transmat/commands/evaluate.py
"""
Eval Command Module
-------------------
Run a checkpoint over the fixed evaluation compositions and report SAD,
MSE, Grad and Conn per sample, overall and per object category.

Samples whose metric region is empty are skipped with a warning; the run
fails only when nothing is left to evaluate.
"""

import time
from pathlib import Path
from typing import List, Optional

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
from transmat.core.concurrency import parallel_map
from transmat.core.errors import EmptyRegionError, TransmatError
from transmat.core.logger import log
from transmat.core.notifier import fail, info, success, timed_summary, warning
from transmat.core.output_manager import FORMATS, export_data, write_jsonl
from transmat.core.validators import validate_choice
from transmat.data.dataset import open_dataset, sample_stream
from transmat.evaluation.inference import predict_sample
from transmat.evaluation.metrics import MetricReport, evaluate, split_evaluable, summary_reports
from transmat.matting.imageio import write_alpha
from transmat.schemas.metrics_schema import schema as metrics_schema


def evaluate_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", "-k", help="Checkpoint file."),
    data: Path = typer.Option(..., "--data", "-d", help="Dataset directory or index file."),
    config: Optional[Path] = CONFIG_OPTION,
    force: bool = typer.Option(False, "--force", help="Load even if the checkpoint's model config differs."),
    whole_image: Optional[bool] = typer.Option(
        None, "--whole-image/--no-whole-image", help="Compute metrics over all pixels instead of the unknown region."
    ),
    trust_trimap: Optional[bool] = TRUST_TRIMAP_OPTION,
    max_side: Optional[int] = MAX_SIDE_OPTION,
    tile_size: Optional[int] = TILE_SIZE_OPTION,
    tile_overlap: Optional[int] = TILE_OVERLAP_OPTION,
    grad_sigma: Optional[float] = typer.Option(None, "--grad-sigma", help="Gaussian sigma of the gradient error."),
    conn_step: Optional[float] = typer.Option(None, "--conn-step", help="Threshold step of the connectivity error."),
    eval_backgrounds_per_fg: Optional[int] = typer.Option(
        None, "--eval-backgrounds-per-fg", help="Fixed backgrounds per foreground."
    ),
    eval_trimap_radius: Optional[int] = typer.Option(
        None, "--eval-trimap-radius", help="Trimap radius for foregrounds without a shipped trimap."
    ),
    limit: Optional[int] = typer.Option(None, "--limit", help="Evaluate at most N samples."),
    save_dir: Optional[Path] = typer.Option(None, "--save-dir", help="Write predicted mattes as 16-bit PNG here."),
    report: Optional[Path] = typer.Option(None, "--report", help="Write the JSON-lines metric report here."),
    fmt: str = typer.Option("table", "--format", "-f", help="Output format: table|json|jsonl|csv"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="Output file for json/jsonl/csv."),
):
    """
    Evaluate a checkpoint on a dataset.
    """
    started_at = time.perf_counter()
    try:
        fmt = validate_choice(fmt, FORMATS, "--format")
        cfg = resolve_config(
            config,
            None,
            {
                "eval": {
                    "max_side": max_side,
                    "tile_size": tile_size,
                    "tile_overlap": tile_overlap,
                    "whole_image": whole_image,
                    "trust_trimap": trust_trimap,
                    "grad_sigma": grad_sigma,
                    "conn_step": conn_step,
                },
                "data": {
                    "eval_backgrounds_per_fg": eval_backgrounds_per_fg,
                    "eval_trimap_radius": eval_trimap_radius,
                },
            },
        )
        model = load_model(checkpoint, cfg if config is not None else None, force=force)
        manifest = open_dataset(data)
        if cfg.eval.whole_image:
            info("Metrics computed over the whole image.")

        streamed = list(sample_stream(manifest, cfg.data, split="eval", limit=limit))
        samples, empty = split_evaluable(streamed, cfg.eval.whole_image)
        for sample in empty:
            warning(f"Skipping sample '{sample.sample_id}': its trimap has no unknown pixels to score.")
        if not samples:
            raise EmptyRegionError("No sample has an unknown region to score; use --whole-image to score every pixel.")

        predictions = []
        for sample in samples:
            pred = predict_sample(model, sample, cfg.eval)
            log(f"predicted {sample.sample_id}", verbose_only=True)
            if save_dir is not None:
                write_alpha(save_dir / f"{sample.sample_id.replace('#', '_')}.png", pred)
            predictions.append(pred)

        reports: List[MetricReport] = parallel_map(
            lambda pair: evaluate(pair[0], pair[1], cfg.eval), list(zip(predictions, samples))
        )
    except TransmatError as exc:
        fail(exc)

    rows = reports + summary_reports(reports)
    if report is not None:
        write_jsonl([r.to_record() for r in rows], report)
        success(f"Metric report written to {report}")
    export_data([r.to_record() for r in rows], schema=metrics_schema, fmt=fmt, output=output, title="Metrics")
    skipped = f", skipped {len(empty)}" if empty else ""
    timed_summary(f"Evaluated {len(reports)} sample(s){skipped}", time.perf_counter() - started_at)
