"""Latent-action inverse dynamics.

Each timestep's slots are summarized into a Gaussian scene-dynamics posterior;
the latent action for a transition is distributed as the difference of the two
posteriors (mean difference, variance sum). Sampled latents are factored by
the codebook into a discrete prototype plus a continuous variability residual.

Two summarizers are provided: a scene-level transformer that reads a single
posterior off a learned readout token (one action per scene), and a shared
per-slot MLP (one action per slot).
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .codebook import ActionCodebook, LatentAction
from .config import DynamicsConfig
from .layers import TransformerStack


class GaussianPosterior(NamedTuple):
    mean: torch.Tensor  # (..., D_z)
    sigma: torch.Tensor  # (..., D_z), strictly positive


def action_distribution(post_t: GaussianPosterior, post_t1: GaussianPosterior) -> GaussianPosterior:
    """Distribution of the transition latent between two consecutive posteriors.

    The mean is the posterior-mean difference; scales combine as variances
    (the difference of independent Gaussians sums their variances).
    """
    mean = post_t1.mean - post_t.mean
    sigma = torch.sqrt(post_t1.sigma**2 + post_t.sigma**2)
    return GaussianPosterior(mean=mean, sigma=sigma)


def sample_latent(
    dist: GaussianPosterior,
    mode: str = "sample",
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Reparameterized draw (gradients flow to mean and sigma) or the mean."""
    if mode == "mean":
        return dist.mean
    if mode != "sample":
        raise ValueError(f"unknown sampling mode {mode!r}")
    noise = torch.randn(dist.mean.shape, generator=generator, dtype=dist.mean.dtype)
    return dist.mean + dist.sigma * noise


class SceneDynamicsEncoder(nn.Module):
    """Transformer over {readout token} + slots; posterior read from the token."""

    def __init__(self, slot_dim: int, config: DynamicsConfig):
        super().__init__()
        self.act_token = nn.Parameter(torch.randn(config.token_dim) * 0.02)
        self.proj = nn.Linear(slot_dim, config.token_dim)
        self.stack = TransformerStack(config.token_dim, config.depth, config.heads, config.hidden)
        self.mean_head = nn.Linear(config.token_dim, config.action_dim)
        self.sigma_head = nn.Linear(config.token_dim, config.action_dim)
        self.sigma_floor = config.sigma_floor

    def forward(self, slots: torch.Tensor) -> GaussianPosterior:
        """(B, N, D_slot) -> posterior with (B, D_z) stats."""
        tokens = self.proj(slots)
        act = self.act_token.to(tokens.dtype).expand(tokens.shape[0], 1, -1)
        out = self.stack(torch.cat([act, tokens], dim=1))
        readout = out[:, 0]
        mean = self.mean_head(readout)
        sigma = F.softplus(self.sigma_head(readout)) + self.sigma_floor
        return GaussianPosterior(mean=mean, sigma=sigma)


class ObjectDynamicsEncoder(nn.Module):
    """Shared two-layer MLP applied per slot; one posterior per slot."""

    def __init__(self, slot_dim: int, config: DynamicsConfig):
        super().__init__()
        self.norm = nn.LayerNorm(slot_dim)
        self.net = nn.Sequential(
            nn.Linear(slot_dim, config.mlp_hidden),
            nn.ReLU(),
            nn.Linear(config.mlp_hidden, 2 * config.action_dim),
        )
        self.action_dim = config.action_dim
        self.sigma_floor = config.sigma_floor

    def forward(self, slots: torch.Tensor) -> GaussianPosterior:
        """(B, N, D_slot) -> posterior with (B, N, D_z) stats."""
        out = self.net(self.norm(slots))
        mean, raw_sigma = out.split(self.action_dim, dim=-1)
        return GaussianPosterior(mean=mean, sigma=F.softplus(raw_sigma) + self.sigma_floor)


class InverseDynamics(nn.Module):
    """Posterior encoder + codebook; infers hybrid latent actions from slot pairs."""

    def __init__(self, slot_dim: int, config: DynamicsConfig):
        super().__init__()
        self.config = config
        if config.variant == "scene":
            self.encoder: nn.Module = SceneDynamicsEncoder(slot_dim, config)
        else:
            self.encoder = ObjectDynamicsEncoder(slot_dim, config)
        self.codebook = ActionCodebook(
            config.n_prototypes,
            config.action_dim,
            ema_decay=config.ema_decay,
            dead_code_steps=config.dead_code_steps,
        )

    @property
    def variant(self) -> str:
        return self.config.variant

    def posterior(self, slots: torch.Tensor) -> GaussianPosterior:
        return self.encoder(slots)

    def transition_distribution(
        self, slots_t: torch.Tensor, slots_t1: torch.Tensor
    ) -> GaussianPosterior:
        if slots_t.shape != slots_t1.shape:
            raise ValueError("consecutive slot sets must have matching shapes")
        return action_distribution(self.posterior(slots_t), self.posterior(slots_t1))

    def infer_actions(
        self,
        slots_t: torch.Tensor,
        slots_t1: torch.Tensor,
        mode: str = "sample",
        generator: Optional[torch.Generator] = None,
    ) -> LatentAction:
        """Full pipeline: posteriors -> difference -> sample -> quantize.

        Scene variant returns stats shaped (B, D_z); object variant (B, N, D_z)
        with every slot quantized against the shared codebook.
        """
        dist = self.transition_distribution(slots_t, slots_t1)
        z = sample_latent(dist, mode=mode, generator=generator)
        if not bool(self.codebook.initialized):
            self.codebook.seed_from_batch(z, generator)
        return self.codebook.quantize(z)

    def action_from_index(self, index: torch.Tensor | int, variability: Optional[torch.Tensor] = None) -> LatentAction:
        """Build a latent action from an explicit prototype choice (user input)."""
        prototype = self.codebook.lookup(index)
        if variability is None:
            variability = torch.zeros_like(prototype)
        z = prototype + variability
        idx = index if isinstance(index, torch.Tensor) else torch.tensor(index, dtype=torch.long)
        return LatentAction(z=z, index=idx, prototype=prototype, variability=variability)
