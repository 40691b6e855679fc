"""Training objectives for the three stages.

Norms follow the sum convention: squared error summed over all element
dimensions and timesteps, then averaged over the batch. The combined
prediction loss rolls the predictor out on its own outputs (no teacher
forcing) with the scene parser frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from ..models.codebook import LatentAction
from ..models.world import WorldModel


@dataclass
class LossWeights:
    image: float = 1.0
    slot: float = 1.0
    vq: float = 0.25

    def __post_init__(self) -> None:
        if min(self.image, self.slot, self.vq) < 0:
            raise ValueError("loss weights must be nonnegative")


def _sum_sq(x: torch.Tensor) -> torch.Tensor:
    """Sum of squares over all non-batch dims, mean over the batch."""
    return (x**2).flatten(1).sum(dim=1).mean()


def parser_reconstruction_loss(
    parser, frames: torch.Tensor, generator: Optional[torch.Generator] = None
) -> torch.Tensor:
    """Sequence reconstruction: parse, decode, squared error summed over t."""
    if frames.shape[1] < 1:
        raise ValueError("need at least one frame")
    slots = parser.parse_video(frames, generator)
    recon = parser.reconstruct_video(slots)
    return _sum_sq(recon - frames)


def vq_loss(z: torch.Tensor, prototype: torch.Tensor, squared: bool = True) -> torch.Tensor:
    """Codebook + commitment terms with stop-gradients, per latent batch.

    ``prototype`` must be the raw codebook entry (no straight-through); the
    commitment weight is fixed at 0.25. With EMA-updated prototypes the first
    term carries no gradient but is still reported.
    """
    if squared:
        codebook_term = _sum_sq(z.detach() - prototype)
        commit_term = _sum_sq(z - prototype.detach())
    else:
        # Per-latent L2 norms, summed over time/slot axes, mean over batch.
        eps = 1e-12
        codebook_term = torch.sqrt((z.detach() - prototype).pow(2).sum(-1) + eps).flatten(1).sum(1).mean()
        commit_term = torch.sqrt((z - prototype.detach()).pow(2).sum(-1) + eps).flatten(1).sum(1).mean()
    return codebook_term + 0.25 * commit_term


def infer_sequence_actions(
    model: WorldModel,
    slots: torch.Tensor,
    mode: str,
    generator: Optional[torch.Generator] = None,
) -> LatentAction:
    """Latent actions for every consecutive slot pair of a (B, T, N, D) batch.

    Returns stacked LatentAction tensors with a time axis of length T-1 at
    dim 1 (scene variant: (B, T-1, D_z); object variant: (B, T-1, N, D_z)).
    """
    b, t, n, d = slots.shape
    post = model.dynamics.posterior(slots.reshape(b * t, n, d))
    mean = post.mean.reshape(b, t, *post.mean.shape[1:])
    sigma = post.sigma.reshape(b, t, *post.sigma.shape[1:])
    d_mean = mean[:, 1:] - mean[:, :-1]
    d_sigma = torch.sqrt(sigma[:, 1:] ** 2 + sigma[:, :-1] ** 2)
    if mode == "mean":
        z = d_mean
    else:
        noise = torch.randn(d_mean.shape, generator=generator, dtype=d_mean.dtype)
        z = d_mean + d_sigma * noise
    if not bool(model.dynamics.codebook.initialized):
        model.dynamics.codebook.seed_from_batch(z, generator)
    return model.dynamics.codebook.quantize(z)


def conditioning_tensors(
    model: WorldModel,
    actions: Optional[LatentAction],
    oracle_actions: Optional[torch.Tensor] = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(prototype, variability) histories according to the model's action space."""
    space = model.action_space
    if space == "oracle":
        if oracle_actions is None:
            raise ValueError("oracle action space needs ground-truth action indices")
        assert model.oracle_embed is not None
        proto = model.oracle_embed(oracle_actions)
        return proto, torch.zeros_like(proto)
    assert actions is not None
    if space == "hybrid":
        return actions.prototype, actions.variability
    if space == "continuous":
        return torch.zeros_like(actions.z), actions.z
    if space == "discrete":
        return actions.prototype, torch.zeros_like(actions.variability)
    raise ValueError(f"unknown action space {space!r}")


def prediction_loss(
    model: WorldModel,
    frames: torch.Tensor,
    n_seed: int,
    weights: LossWeights,
    sample_mode: str = "sample",
    vq_squared: bool = True,
    generator: Optional[torch.Generator] = None,
    oracle_actions: Optional[torch.Tensor] = None,
    update_codebook: bool = False,
) -> tuple[torch.Tensor, dict]:
    """Combined image/slot/VQ objective over an autoregressive rollout.

    frames: (B, T, 3, H, W) with T >= n_seed + 1. Latent actions are inferred
    from consecutive ground-truth slot pairs; the rollout history starts from
    the ground-truth seed slots and then feeds back predictions.
    """
    t_total = frames.shape[1]
    if t_total < n_seed + 1:
        raise ValueError("sequence must be at least n_seed + 1 frames long")
    with torch.no_grad():
        slots_gt = model.parser.parse_video(frames, generator).detach()

    actions = None
    if model.action_space != "oracle":
        actions = infer_sequence_actions(model, slots_gt, sample_mode, generator)
    protos, varis = conditioning_tensors(model, actions, oracle_actions)

    history = [slots_gt[:, t] for t in range(n_seed)]
    predictions = []
    for step in range(t_total - n_seed):
        t_now = n_seed + step  # predicting slots at index t_now
        slot_hist = torch.stack(history, dim=1)
        pred = model.predictor(slot_hist, protos[:, :t_now], varis[:, :t_now])
        predictions.append(pred)
        history.append(pred)

    pred_slots = torch.stack(predictions, dim=1)  # (B, P, N, D)
    target_slots = slots_gt[:, n_seed:]
    loss_slot = _sum_sq(pred_slots - target_slots)

    b, p = pred_slots.shape[:2]
    decoded = model.parser.decode_slots(pred_slots.reshape(b * p, *pred_slots.shape[2:]))
    recon = decoded.reconstruction.reshape(b, p, *decoded.reconstruction.shape[1:])
    loss_img = _sum_sq(recon - frames[:, n_seed:])

    if actions is not None and model.action_space in ("hybrid", "discrete"):
        raw_proto = model.dynamics.codebook.lookup(actions.index)
        loss_vq = vq_loss(actions.z, raw_proto, squared=vq_squared)
        if update_codebook:
            model.dynamics.codebook.ema_update(actions.z, actions.index, generator)
    else:
        loss_vq = torch.zeros((), dtype=frames.dtype)

    total = weights.image * loss_img + weights.slot * loss_slot + weights.vq * loss_vq
    components = {
        "image": float(loss_img.detach()),
        "slot": float(loss_slot.detach()),
        "vq": float(loss_vq.detach()),
        "total": float(total.detach()),
    }
    return total, components


def policy_regression_loss(predicted_z: torch.Tensor, target_z: torch.Tensor, squared: bool = False) -> torch.Tensor:
    """Behavior-cloning loss on latent actions; unsquared L2 by default."""
    diff = predicted_z - target_z
    if squared:
        return _sum_sq(diff)
    return torch.sqrt(diff.pow(2).sum(dim=-1) + 1e-12).mean()
