"""Action-conditioned autoregressive slot forecaster.

All slots in the history window, each conditioned by adding linear projections
of its action prototype and variability embedding plus a temporal positional
encoding shared within a timestep, attend jointly in a transformer encoder.
The output tokens at the final timestep are projected back to slot space to
form the next slot set. Rollouts feed predictions back in; histories beyond
the configured context window drop their oldest timesteps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import torch
import torch.nn as nn

from .codebook import LatentAction
from .config import PredictorConfig
from .layers import TransformerStack, sinusoidal_encoding


class SlotPredictor(nn.Module):
    def __init__(self, slot_dim: int, action_dim: int, config: PredictorConfig):
        super().__init__()
        self.config = config
        self.slot_dim = slot_dim
        self.action_dim = action_dim
        self.proj_slot = nn.Linear(slot_dim, config.token_dim)
        self.proj_proto = nn.Linear(action_dim, config.token_dim)
        self.proj_var = nn.Linear(action_dim, config.token_dim)
        self.stack = TransformerStack(config.token_dim, config.depth, config.heads, config.hidden)
        self.readout = nn.Linear(config.token_dim, slot_dim)
        self.register_buffer(
            "time_encoding", sinusoidal_encoding(config.max_context, config.token_dim), persistent=False
        )

    def condition_tokens(
        self,
        slots: torch.Tensor,
        prototypes: torch.Tensor,
        variability: torch.Tensor,
        time_index: int,
    ) -> torch.Tensor:
        """Tokens for one timestep: (B, N, D_slot) + actions -> (B, N, token_dim).

        Scene-level actions of shape (B, D_z) broadcast to every slot of the
        timestep; per-slot actions must be (B, N, D_z).
        """
        b, n, _ = slots.shape
        for name, a in (("prototype", prototypes), ("variability", variability)):
            if a.ndim == 3 and a.shape[1] != n:
                raise ValueError(f"{name} has {a.shape[1]} per-slot entries for {n} slots")
        if prototypes.ndim == 2:
            prototypes = prototypes.unsqueeze(1).expand(b, n, self.action_dim)
        if variability.ndim == 2:
            variability = variability.unsqueeze(1).expand(b, n, self.action_dim)
        tokens = self.proj_slot(slots) + self.proj_proto(prototypes) + self.proj_var(variability)
        return tokens + self.time_encoding[time_index].to(tokens.dtype)

    def forward(
        self,
        slot_history: torch.Tensor,
        prototype_history: torch.Tensor,
        variability_history: torch.Tensor,
    ) -> torch.Tensor:
        """Predict the next slot set from aligned histories.

        slot_history: (B, T, N, D_slot); action histories (B, T, D_z) or
        (B, T, N, D_z), one action per history timestep (the action at t
        conditions the transition leaving t). Returns (B, N, D_slot).
        """
        if slot_history.ndim != 4 or slot_history.shape[1] < 1:
            raise ValueError("need at least one timestep of slot history")
        t_total = slot_history.shape[1]
        if prototype_history.shape[1] != t_total or variability_history.shape[1] != t_total:
            raise ValueError("action history length must match slot history length")
        window = self.config.max_context
        if t_total > window:
            slot_history = slot_history[:, -window:]
            prototype_history = prototype_history[:, -window:]
            variability_history = variability_history[:, -window:]
            t_total = window
        b, t, n, _ = slot_history.shape
        tokens = torch.stack(
            [
                self.condition_tokens(
                    slot_history[:, i], prototype_history[:, i], variability_history[:, i], i
                )
                for i in range(t)
            ],
            dim=1,
        )  # (B, T, N, token)
        out = self.stack(tokens.reshape(b, t * n, -1))
        last = out[:, (t - 1) * n :]
        return self.readout(last)


@dataclass
class RolloutState:
    """Aligned slot/action histories for an autoregressive rollout.

    Actions are appended lazily: the action at position t conditions the
    transition leaving slot set t, so at prediction time both lists have equal
    length.
    """

    slots: list[torch.Tensor] = field(default_factory=list)  # each (B, N, D_slot)
    prototypes: list[torch.Tensor] = field(default_factory=list)
    variability: list[torch.Tensor] = field(default_factory=list)
    steps_predicted: int = 0

    @classmethod
    def from_seed(
        cls, seed_slots: torch.Tensor, seed_actions: Optional[list[LatentAction]] = None
    ) -> "RolloutState":
        """seed_slots: (B, T0, N, D). Optional actions for the seed transitions."""
        state = cls()
        for t in range(seed_slots.shape[1]):
            state.slots.append(seed_slots[:, t])
        for action in seed_actions or []:
            state.append_action(action)
        if len(state.prototypes) >= len(state.slots):
            raise ValueError("seed actions must number at most len(seed slots) - 1")
        return state

    def append_action(self, action: LatentAction) -> None:
        self.prototypes.append(action.prototype)
        self.variability.append(action.variability)

    def append_slots(self, slots: torch.Tensor) -> None:
        self.slots.append(slots)

    def stacked(self) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        if len(self.prototypes) != len(self.slots):
            raise ValueError("one action per history timestep is required to predict")
        return (
            torch.stack(self.slots, dim=1),
            torch.stack(self.prototypes, dim=1),
            torch.stack(self.variability, dim=1),
        )


ActionProvider = Callable[[int, RolloutState], LatentAction]


def rollout(
    predictor: SlotPredictor,
    state: RolloutState,
    action_provider: ActionProvider,
    horizon: int,
) -> list[torch.Tensor]:
    """Autoregressive prediction for ``horizon`` steps.

    ``action_provider(step, state)`` supplies the latent action conditioning
    the transition out of the latest timestep; predicted slots are fed back
    into the history with no ground-truth re-injection. Raises LookupError if
    the provider is exhausted before the horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    predicted = []
    for step in range(horizon):
        action = action_provider(step, state)
        if action is None:
            raise LookupError(f"action provider exhausted at step {step}")
        state.append_action(action)
        slots, protos, varis = state.stacked()
        next_slots = predictor(slots, protos, varis)
        state.append_slots(next_slots)
        state.steps_predicted += 1
        predicted.append(next_slots)
    return predicted
