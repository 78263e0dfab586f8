# transmat/commands/train.py
"""
Train Command Module
--------------------
Train a matting network on a dataset directory (or index file).

Every key of the model, data, train and loss config sections is also a flag
here; flags win over --config, --preset and TRANSMAT_SEED.
"""

import time
from pathlib import Path
from typing import Optional

import typer

from transmat.commands.common import (
    CONFIG_OPTION,
    PRESET_OPTION,
    data_overrides,
    loss_overrides,
    model_overrides,
    resolve_config,
)
from transmat.core.errors import TransmatError
from transmat.core.logger import log
from transmat.core.notifier import fail, info, success, timed_summary
from transmat.data.dataset import open_dataset
from transmat.training.trainer import train


def train_command(
    data: Path = typer.Option(..., "--data", "-d", help="Dataset directory (fg/, alpha/, bg/) or index file."),
    out: Path = typer.Option(Path("runs/latest"), "--out", "-o", help="Output directory for checkpoints and logs."),
    config: Optional[Path] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    # model
    cnn_widths: Optional[str] = typer.Option(None, "--cnn-widths", help="Two CNN stage widths, e.g. 16,32."),
    cnn_blocks: Optional[str] = typer.Option(None, "--cnn-blocks", help="Residual blocks per CNN stage, e.g. 2,2."),
    embed_dims: Optional[str] = typer.Option(None, "--embed-dims", help="Four transformer stage widths."),
    num_heads: Optional[str] = typer.Option(None, "--num-heads", help="Attention heads per stage (four values)."),
    blocks_per_stage: Optional[str] = typer.Option(None, "--blocks-per-stage", help="Blocks per stage (four values)."),
    window_size: Optional[int] = typer.Option(None, "--window-size", help="Attention window side."),
    mlp_ratio: Optional[float] = typer.Option(None, "--mlp-ratio", help="MLP hidden width / block width."),
    tri_token_period: Optional[int] = typer.Option(None, "--tri-token-period", help="Tri-token block every N blocks."),
    use_tgtb: Optional[bool] = typer.Option(None, "--use-tgtb/--no-use-tgtb", help="Tri-token guided blocks."),
    tri_token_stages: Optional[str] = typer.Option(None, "--tri-token-stages", help="Comma-separated stages, e.g. 1,4."),
    tri_token_shift: Optional[bool] = typer.Option(
        None, "--tri-token-shift/--no-tri-token-shift", help="Allow shifted windows in tri-token blocks."
    ),
    shift_windows: Optional[bool] = typer.Option(None, "--shift-windows/--no-shift-windows", help="Alternate shifted windows."),
    rel_pos_bias: Optional[bool] = typer.Option(None, "--rel-pos-bias/--no-rel-pos-bias", help="Relative position bias."),
    use_mgf: Optional[bool] = typer.Option(None, "--use-mgf/--no-use-mgf", help="Multi-scale global-guided fusion."),
    mgf_local: Optional[bool] = typer.Option(None, "--mgf-local/--no-mgf-local", help="MGF local (spatial) branch."),
    mgf_global: Optional[bool] = typer.Option(None, "--mgf-global/--no-mgf-global", help="MGF global (channel) branch."),
    mgf_shared_trunk: Optional[bool] = typer.Option(
        None, "--mgf-shared-trunk/--no-mgf-shared-trunk", help="One squeeze trunk for the MGF gamma and beta heads."
    ),
    squeeze_ratio: Optional[int] = typer.Option(None, "--squeeze-ratio", help="Channel squeeze ratio of MGF guidance."),
    zero_init_residual: Optional[bool] = typer.Option(
        None, "--zero-init-residual/--no-zero-init-residual", help="Zero-init the last layer of residual branches."
    ),
    # data
    crop_size: Optional[int] = typer.Option(None, "--crop-size", help="Training crop side (multiple of 32)."),
    trimap_kernel_min: Optional[int] = typer.Option(None, "--trimap-kernel-min", help="Smallest trimap erosion radius."),
    trimap_kernel_max: Optional[int] = typer.Option(None, "--trimap-kernel-max", help="Largest trimap erosion radius."),
    flip_probability: Optional[float] = typer.Option(None, "--flip-probability", help="Horizontal flip probability."),
    scale_range: Optional[str] = typer.Option(None, "--scale-range", help="Scale factor range, e.g. 0.8,1.25."),
    rotation_range: Optional[float] = typer.Option(None, "--rotation-range", help="Max rotation in degrees."),
    shear_range: Optional[float] = typer.Option(None, "--shear-range", help="Max shear in degrees."),
    eval_backgrounds_per_fg: Optional[int] = typer.Option(
        None, "--eval-backgrounds-per-fg", help="Fixed backgrounds per foreground at evaluation."
    ),
    eval_trimap_radius: Optional[int] = typer.Option(None, "--eval-trimap-radius", help="Trimap radius at evaluation."),
    # train
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Optimizer steps."),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Samples per step."),
    learning_rate: Optional[float] = typer.Option(None, "--learning-rate", help="Peak learning rate."),
    lr_floor: Optional[float] = typer.Option(None, "--lr-floor", help="Learning rate at the end of each cosine period."),
    restart_divisor: Optional[int] = typer.Option(None, "--restart-divisor", help="First period = iterations / N."),
    restart_mult: Optional[int] = typer.Option(None, "--restart-mult", help="Period growth factor per restart."),
    beta1: Optional[float] = typer.Option(None, "--beta1", help="Adam beta1."),
    beta2: Optional[float] = typer.Option(None, "--beta2", help="Adam beta2."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for initialization and sampling."),
    grad_clip: Optional[float] = typer.Option(None, "--grad-clip", help="Clip gradient norm (0 disables)."),
    checkpoint_every: Optional[int] = typer.Option(None, "--checkpoint-every", help="Periodic checkpoint interval."),
    log_every: Optional[int] = typer.Option(None, "--log-every", help="Progress line interval."),
    # loss
    w_alpha: Optional[float] = typer.Option(None, "--w-alpha", help="Weight of the alpha loss."),
    w_comp: Optional[float] = typer.Option(None, "--w-comp", help="Weight of the composition loss."),
    w_lap: Optional[float] = typer.Option(None, "--w-lap", help="Weight of the Laplacian loss."),
    lap_levels: Optional[int] = typer.Option(None, "--lap-levels", help="Laplacian pyramid levels."),
    lap_region: Optional[str] = typer.Option(None, "--lap-region", help="Laplacian loss region: unknown|full"),
):
    """
    Train with Adam and the warm-restart cosine schedule.
    """
    started_at = time.perf_counter()
    try:
        cfg = resolve_config(
            config,
            preset,
            {
                "model": model_overrides({
                    "cnn_widths": cnn_widths,
                    "cnn_blocks": cnn_blocks,
                    "embed_dims": embed_dims,
                    "num_heads": num_heads,
                    "blocks_per_stage": blocks_per_stage,
                    "window_size": window_size,
                    "mlp_ratio": mlp_ratio,
                    "tri_token_period": tri_token_period,
                    "use_tgtb": use_tgtb,
                    "tri_token_stages": tri_token_stages,
                    "tri_token_shift": tri_token_shift,
                    "shift_windows": shift_windows,
                    "rel_pos_bias": rel_pos_bias,
                    "use_mgf": use_mgf,
                    "mgf_local": mgf_local,
                    "mgf_global": mgf_global,
                    "mgf_shared_trunk": mgf_shared_trunk,
                    "squeeze_ratio": squeeze_ratio,
                    "zero_init_residual": zero_init_residual,
                }),
                "data": data_overrides({
                    "crop_size": crop_size,
                    "trimap_kernel_min": trimap_kernel_min,
                    "trimap_kernel_max": trimap_kernel_max,
                    "flip_probability": flip_probability,
                    "scale_range": scale_range,
                    "rotation_range": rotation_range,
                    "shear_range": shear_range,
                    "eval_backgrounds_per_fg": eval_backgrounds_per_fg,
                    "eval_trimap_radius": eval_trimap_radius,
                }),
                "train": {
                    "iterations": iterations,
                    "batch_size": batch_size,
                    "learning_rate": learning_rate,
                    "lr_floor": lr_floor,
                    "restart_divisor": restart_divisor,
                    "restart_mult": restart_mult,
                    "beta1": beta1,
                    "beta2": beta2,
                    "seed": seed,
                    "grad_clip": grad_clip,
                    "checkpoint_every": checkpoint_every,
                    "log_every": log_every,
                },
                "loss": loss_overrides({
                    "w_alpha": w_alpha,
                    "w_comp": w_comp,
                    "w_lap": w_lap,
                    "lap_levels": lap_levels,
                    "lap_region": lap_region,
                }),
            },
        )
        manifest = open_dataset(data)
        info(f"Training on {len(manifest.entries)} foregrounds x {len(manifest.backgrounds)} backgrounds for {cfg.train.iterations} iterations.")
        result = train(cfg, manifest, out)
    except TransmatError as exc:
        fail(exc)

    log(f"Loss log: {result.loss_log}", verbose_only=True)
    success(f"Final checkpoint: {result.checkpoint} (loss_total={result.last_record.get('loss_total', float('nan')):.5g})")
    timed_summary(f"Trained {result.iterations} iterations", time.perf_counter() - started_at)
