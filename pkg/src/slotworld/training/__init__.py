from .data import EpisodeCache, step_generator
from .losses import (
    LossWeights,
    conditioning_tensors,
    infer_sequence_actions,
    parser_reconstruction_loss,
    policy_regression_loss,
    prediction_loss,
    vq_loss,
)
from .loop import (
    STAGES,
    MetricsLog,
    PrerequisiteError,
    TrainConfig,
    build_world_config,
    default_train_config,
    train_stage,
)
from .schedules import NonFiniteGradientError, clip_global_norm, lr_at_step, optimizer_step

__all__ = [
    "EpisodeCache",
    "step_generator",
    "LossWeights",
    "conditioning_tensors",
    "infer_sequence_actions",
    "parser_reconstruction_loss",
    "policy_regression_loss",
    "prediction_loss",
    "vq_loss",
    "STAGES",
    "MetricsLog",
    "PrerequisiteError",
    "TrainConfig",
    "build_world_config",
    "default_train_config",
    "train_stage",
    "NonFiniteGradientError",
    "clip_global_norm",
    "lr_at_step",
    "optimizer_step",
]
