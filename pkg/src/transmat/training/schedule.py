"""
Learning-rate schedule: cosine decay with warm restarts.

The first period lasts max(1, iterations // restart_divisor) iterations and
each following period is restart_mult times longer. Within a period of
length T, step t gets floor + (peak - floor) * (1 + cos(pi * t / (T - 1))) / 2,
so the last step of a period sits exactly on the floor and the next step is
back at the peak.
"""

from __future__ import annotations

import math
from typing import Tuple

import torch

from transmat.core.config import TrainConfig


def restart_position(iteration: int, first_period: int, mult: int) -> Tuple[int, int]:
    """(step within period, period length) for a global iteration."""
    period = max(1, first_period)
    t = iteration
    while t >= period:
        t -= period
        period *= max(1, mult)
    return t, period


def schedule_lr(iteration: int, cfg: TrainConfig) -> float:
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    first = max(1, cfg.iterations // cfg.restart_divisor)
    t, period = restart_position(iteration, first, cfg.restart_mult)
    if period == 1:
        return cfg.learning_rate
    cosine = (1.0 + math.cos(math.pi * t / (period - 1))) / 2.0
    return cfg.lr_floor + (cfg.learning_rate - cfg.lr_floor) * cosine


class WarmRestartScheduler(torch.optim.lr_scheduler.LambdaLR):
    """LambdaLR driving an optimizer whose base lr is the schedule's peak."""

    def __init__(self, optimizer: torch.optim.Optimizer, cfg: TrainConfig, last_epoch: int = -1):
        self.cfg = cfg
        super().__init__(optimizer=optimizer, lr_lambda=self.scale_lr, last_epoch=last_epoch)

    def scale_lr(self, iteration: int) -> float:
        return schedule_lr(iteration, self.cfg) / self.cfg.learning_rate
