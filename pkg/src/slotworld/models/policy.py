"""Latent behavior policy and environment-action decoder.

The policy regresses a latent action from the current slot set through a
transformer with a learned readout token (permutation-invariant over slots).
The action decoder is a three-layer MLP mapping latent actions to discrete
environment-action logits; it is only needed to execute latents in the
simulator.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import PolicyConfig
from .layers import TransformerStack


class LatentPolicy(nn.Module):
    def __init__(self, slot_dim: int, action_dim: int, config: PolicyConfig):
        super().__init__()
        self.readout_token = nn.Parameter(torch.randn(config.token_dim) * 0.02)
        self.proj = nn.Linear(slot_dim, config.token_dim)
        self.stack = TransformerStack(config.token_dim, config.depth, config.heads, config.hidden)
        self.head = nn.Linear(config.token_dim, action_dim)

    def forward(self, slots: torch.Tensor) -> torch.Tensor:
        """(B, N, D_slot) -> predicted latent action (B, D_z)."""
        tokens = self.proj(slots)
        token = self.readout_token.to(tokens.dtype).expand(tokens.shape[0], 1, -1)
        out = self.stack(torch.cat([token, tokens], dim=1))
        return self.head(out[:, 0])


class ActionDecoder(nn.Module):
    """Three-layer MLP: latent action -> environment-action logits."""

    def __init__(self, action_dim: int, config: PolicyConfig):
        super().__init__()
        h = config.decoder_hidden
        self.net = nn.Sequential(
            nn.Linear(action_dim, h),
            nn.ReLU(),
            nn.Linear(h, h),
            nn.ReLU(),
            nn.Linear(h, config.n_env_actions),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        """Argmax environment action indices."""
        return self.forward(z).argmax(dim=-1)
