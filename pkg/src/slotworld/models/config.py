"""Model hyperparameter dataclasses and the two standard profiles.

``full`` mirrors the reference setup (64x64 frames, 128-dim slots, 4-layer
transformers with 256-dim tokens); ``desk`` is a reduced profile sized for
CPU training on 32x32 frames.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass
class EncoderConfig:
    channels: int = 32
    feature_dim: int = 32
    kernel_size: int = 5
    strides: tuple[int, ...] = (1, 1, 1, 1)


@dataclass
class DecoderConfig:
    broadcast_size: int = 8
    channels: int = 32
    fourier_features: bool = False
    sigmoid_rgb: bool = False  # saturating color head; linear otherwise


@dataclass
class ParserConfig:
    """Recurrent slot parser: encoder, slot attention, broadcast decoder."""

    image_size: int = 64
    n_slots: int = 3
    slot_dim: int = 128
    slot_hidden: int = 256  # residual MLP hidden width inside slot attention
    iters_first: int = 3
    iters_later: int = 1
    per_slot_init: bool = False
    bilevel_first: bool = False  # detach-and-reattach the initializer on the first frame
    transition_heads: int = 4
    transition_hidden: int = 256
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)


@dataclass
class DynamicsConfig:
    """Latent-action inverse dynamics with a vector-quantized prototype codebook.

    ``variant`` is "scene" (one action per scene, transformer with a readout
    token) or "object" (one action per slot, shared per-slot MLP).
    """

    variant: str = "object"
    action_dim: int = 8
    n_prototypes: int = 5
    token_dim: int = 256
    depth: int = 4
    heads: int = 4
    hidden: int = 1024
    mlp_hidden: int = 256
    sigma_floor: float = 1e-4
    ema_decay: float = 0.99
    dead_code_steps: int = 200

    def __post_init__(self) -> None:
        if self.variant not in ("scene", "object"):
            raise ValueError(f"unknown dynamics variant {self.variant!r}")


@dataclass
class PredictorConfig:
    token_dim: int = 256
    depth: int = 4
    heads: int = 8
    hidden: int = 1024
    max_context: int = 14  # timesteps kept in the attention window


@dataclass
class PolicyConfig:
    token_dim: int = 256
    depth: int = 4
    heads: int = 4
    hidden: int = 1024
    decoder_hidden: int = 128
    n_env_actions: int = 5


@dataclass
class WorldConfig:
    """Full model bundle configuration."""

    parser: ParserConfig = field(default_factory=ParserConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def __post_init__(self) -> None:
        # The latent action is an information bottleneck by construction.
        if self.dynamics.action_dim >= self.parser.slot_dim:
            raise ValueError(
                f"action_dim ({self.dynamics.action_dim}) must be well below "
                f"slot_dim ({self.parser.slot_dim})"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "WorldConfig":
        parser = dict(data["parser"])
        parser["encoder"] = EncoderConfig(**{**data["parser"]["encoder"], "strides": tuple(data["parser"]["encoder"]["strides"])})
        parser["decoder"] = DecoderConfig(**data["parser"]["decoder"])
        return cls(
            parser=ParserConfig(**parser),
            dynamics=DynamicsConfig(**data["dynamics"]),
            predictor=PredictorConfig(**data["predictor"]),
            policy=PolicyConfig(**data["policy"]),
        )


def full_profile(n_slots: int = 3, variant: str = "object", action_dim: int = 8, n_prototypes: int = 5) -> WorldConfig:
    """Reference-scale profile: 64x64 frames, stride-preserving encoder, 128-dim slots."""
    return WorldConfig(
        parser=ParserConfig(image_size=64, n_slots=n_slots, slot_dim=128),
        dynamics=DynamicsConfig(
            variant=variant, action_dim=action_dim, n_prototypes=n_prototypes
        ),
        predictor=PredictorConfig(),
        policy=PolicyConfig(),
    )


def desk_profile(
    n_slots: int = 2,
    variant: str = "object",
    action_dim: int = 8,
    n_prototypes: int = 5,
    max_context: int = 12,
    image_size: int = 32,
) -> WorldConfig:
    """Reduced profile for CPU-scale runs: 32x32 frames, 64-dim slots, 2-layer stacks."""
    return WorldConfig(
        parser=ParserConfig(
            image_size=image_size,
            n_slots=n_slots,
            slot_dim=64,
            slot_hidden=128,
            iters_later=2,
            per_slot_init=True,
            transition_hidden=128,
            encoder=EncoderConfig(channels=32, feature_dim=32, strides=(2, 1, 1)),
            decoder=DecoderConfig(broadcast_size=image_size, channels=32, sigmoid_rgb=True),
        ),
        dynamics=DynamicsConfig(
            variant=variant,
            action_dim=action_dim,
            n_prototypes=n_prototypes,
            token_dim=128,
            depth=2,
            heads=4,
            hidden=256,
            mlp_hidden=128,
        ),
        predictor=PredictorConfig(token_dim=128, depth=2, heads=4, hidden=256, max_context=max_context),
        policy=PolicyConfig(token_dim=128, depth=2, heads=4, hidden=256),
    )


def tiny_profile(
    n_slots: int = 2,
    variant: str = "object",
    action_dim: int = 4,
    n_prototypes: int = 3,
    image_size: int = 16,
) -> WorldConfig:
    """Throwaway profile for unit tests and gradient checks."""
    return WorldConfig(
        parser=ParserConfig(
            image_size=image_size,
            n_slots=n_slots,
            slot_dim=16,
            slot_hidden=32,
            transition_hidden=32,
            transition_heads=2,
            encoder=EncoderConfig(channels=8, feature_dim=8, strides=(2, 1)),
            decoder=DecoderConfig(broadcast_size=4, channels=8),
        ),
        dynamics=DynamicsConfig(
            variant=variant,
            action_dim=action_dim,
            n_prototypes=n_prototypes,
            token_dim=16,
            depth=1,
            heads=2,
            hidden=32,
            mlp_hidden=16,
        ),
        predictor=PredictorConfig(token_dim=16, depth=1, heads=2, hidden=32, max_context=8),
        policy=PolicyConfig(token_dim=16, depth=1, heads=2, hidden=32, decoder_hidden=16),
    )
