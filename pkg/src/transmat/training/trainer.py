"""
Training loop
-------------
Adam with the warm-restart cosine schedule, one optimizer thread, samples
from the deterministic stream. Writes under the output directory:

  config.yaml           effective configuration
  loss.jsonl            one record per iteration
  ckpt-<iteration>.ckpt periodic checkpoints
  model.ckpt            final checkpoint
  nan-batch-<it>.pt     only when a loss turns non-finite
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import torch

from transmat.core.config import ExperimentConfig, dump_config
from transmat.core.errors import NumericalError
from transmat.core.logger import log, log_values
from transmat.data.dataset import DatasetManifest, MattingBatch, batches, sample_stream
from transmat.model.network import TriTokenMattingNet, build_model, parameter_count
from transmat.training.checkpoint import save_checkpoint
from transmat.training.losses import compute_losses, total_loss
from transmat.training.schedule import WarmRestartScheduler

LOSS_LOG = "loss.jsonl"
FINAL_CHECKPOINT = "model.ckpt"
CONFIG_COPY = "config.yaml"
LOSS_FIELDS = ("iteration", "lr", "loss_alpha", "loss_comp", "loss_lap", "loss_total")


@dataclass
class TrainResult:
    checkpoint: Path
    loss_log: Path
    iterations: int
    last_record: Dict[str, float]
    checkpoints: List[Path] = field(default_factory=list)
    elapsed: float = 0.0


def make_deterministic(seed: int):
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def build_optimizer(model: torch.nn.Module, config: ExperimentConfig) -> torch.optim.Adam:
    train = config.train
    return torch.optim.Adam(model.parameters(), lr=train.learning_rate, betas=(train.beta1, train.beta2), weight_decay=0.0)


def loss_record(iteration: int, lr: float, components, total: torch.Tensor) -> Dict[str, float]:
    record = {"iteration": iteration, "lr": lr}
    record.update(components.as_floats())
    record["loss_total"] = float(total)
    return record


def dump_nan_batch(out_dir: Path, iteration: int, batch: MattingBatch) -> Path:
    path = Path(out_dir) / f"nan-batch-{iteration}.pt"
    torch.save(
        {
            "iteration": iteration,
            "sample_ids": batch.sample_ids,
            "image": batch.image,
            "trimap": batch.trimap,
            "alpha": batch.alpha,
            "foreground": batch.foreground,
            "background": batch.background,
        },
        path,
    )
    return path


def train_step(
    model: TriTokenMattingNet,
    optimizer: torch.optim.Optimizer,
    batch: MattingBatch,
    config: ExperimentConfig,
):
    """One optimizer step; returns (components, total) computed before the update."""
    pred = model(batch.image, batch.trimap)
    components = compute_losses(
        pred, batch.alpha, batch.foreground, batch.background, batch.image, batch.unknown, config.loss
    )
    total = total_loss(components, config.loss)
    if not torch.isfinite(total):
        return components, total
    optimizer.zero_grad(set_to_none=True)
    total.backward()
    if config.train.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.train.grad_clip)
    optimizer.step()
    return components, total


def train(
    config: ExperimentConfig,
    manifest: DatasetManifest,
    out_dir: Path,
    workers: Optional[int] = None,
    model: Optional[TriTokenMattingNet] = None,
    on_record: Optional[Callable[[Dict[str, float]], None]] = None,
) -> TrainResult:
    """Train from scratch (or from the given model) for config.train.iterations steps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    train_cfg = config.train

    make_deterministic(train_cfg.seed)
    if model is None:
        model = build_model(config.model, seed=train_cfg.seed)
    model.train()
    log(f"Model: {parameter_count(model):,} parameters", verbose_only=True)

    dump_config(config, out_dir / CONFIG_COPY)
    optimizer = build_optimizer(model, config)
    scheduler = WarmRestartScheduler(optimizer, train_cfg)

    stream = sample_stream(manifest, config.data, split="train", workers=workers)
    loss_path = out_dir / LOSS_LOG
    checkpoints: List[Path] = []
    record: Dict[str, float] = {}

    with open(loss_path, "w", encoding="utf-8") as loss_log:
        for iteration, batch in zip(range(train_cfg.iterations), batches(stream, train_cfg.batch_size)):
            lr = optimizer.param_groups[0]["lr"]
            components, total = train_step(model, optimizer, batch, config)
            if not torch.isfinite(total):
                dump = dump_nan_batch(out_dir, iteration, batch)
                raise NumericalError(
                    f"Non-finite loss at iteration {iteration} on batch [{', '.join(batch.sample_ids)}]; "
                    f"batch dumped to {dump}"
                )
            scheduler.step()

            record = loss_record(iteration, lr, components, total)
            loss_log.write(json.dumps(record) + "\n")
            if on_record is not None:
                on_record(record)

            log(f"it {iteration} lr={lr:.3g} batch={','.join(batch.sample_ids)}", verbose_only=True)
            if train_cfg.log_every and (iteration + 1) % train_cfg.log_every == 0:
                log_values(f"[{iteration + 1}/{train_cfg.iterations}]", {k: record[k] for k in LOSS_FIELDS[1:]})

            done = iteration + 1
            if train_cfg.checkpoint_every and done % train_cfg.checkpoint_every == 0 and done < train_cfg.iterations:
                checkpoints.append(save_checkpoint(out_dir / f"ckpt-{done}.ckpt", model, config.model, done))

    final = save_checkpoint(out_dir / FINAL_CHECKPOINT, model, config.model, int(record.get("iteration", -1)) + 1)
    return TrainResult(
        checkpoint=final,
        loss_log=loss_path,
        iterations=int(record.get("iteration", -1)) + 1,
        last_record=record,
        checkpoints=checkpoints,
        elapsed=time.time() - started,
    )


def read_loss_log(path: Path) -> List[Dict[str, float]]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
