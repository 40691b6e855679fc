"""Learning-rate schedules, gradient clipping, and the guarded optimizer step."""

from __future__ import annotations

import math
from typing import Iterable

import torch


class NonFiniteGradientError(RuntimeError):
    """Raised when a step is aborted because gradients are not finite."""


def lr_at_step(step: int, base_lr: float, total_steps: int, schedule: str, warmup_steps: int = 0) -> float:
    """Learning rate for a zero-based step index.

    - "warmup_cosine": linear ramp over ``warmup_steps`` then cosine to zero.
    - "cosine": cosine annealing from base to zero over all steps.
    - "constant": fixed base rate.
    """
    if schedule == "constant":
        return base_lr
    if schedule == "warmup_cosine" and warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    if schedule not in ("cosine", "warmup_cosine"):
        raise ValueError(f"unknown schedule {schedule!r}")
    start = warmup_steps if schedule == "warmup_cosine" else 0
    span = max(total_steps - start, 1)
    progress = min(max(step - start, 0) / span, 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def clip_global_norm(params: Iterable[torch.Tensor], max_norm: float) -> float:
    """Scale gradients so their global norm is at most ``max_norm``; returns the pre-clip norm."""
    params = [p for p in params if p.grad is not None]
    return float(torch.nn.utils.clip_grad_norm_(params, max_norm))


def optimizer_step(
    optimizer: torch.optim.Optimizer,
    params: list[torch.Tensor],
    lr: float,
    clip_norm: float,
) -> float:
    """Set the rate, clip, verify finiteness, and apply one Adam update."""
    for group in optimizer.param_groups:
        group["lr"] = lr
    pre_norm = clip_global_norm(params, clip_norm)
    if not math.isfinite(pre_norm):
        optimizer.zero_grad(set_to_none=True)
        raise NonFiniteGradientError(f"aborting step: gradient norm is {pre_norm}")
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)
    return pre_norm
