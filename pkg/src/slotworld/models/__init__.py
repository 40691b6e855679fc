from .config import (
    DecoderConfig,
    DynamicsConfig,
    EncoderConfig,
    ParserConfig,
    PolicyConfig,
    PredictorConfig,
    WorldConfig,
    desk_profile,
    full_profile,
    tiny_profile,
)
from .codebook import ActionCodebook, LatentAction
from .invdyn import (
    GaussianPosterior,
    InverseDynamics,
    ObjectDynamicsEncoder,
    SceneDynamicsEncoder,
    action_distribution,
    sample_latent,
)
from .parser import (
    DecodedObjects,
    FrameEncoder,
    SceneParser,
    SlotAttention,
    SlotInitializer,
    SlotTransition,
    SpatialBroadcastDecoder,
)
from .policy import ActionDecoder, LatentPolicy
from .predictor import RolloutState, SlotPredictor, rollout
from .world import (
    CHECKPOINT_VERSION,
    CheckpointError,
    CheckpointShapeError,
    CheckpointVersionError,
    WorldModel,
    load_checkpoint,
    read_checkpoint_meta,
    save_checkpoint,
)

__all__ = [
    "DecoderConfig",
    "DynamicsConfig",
    "EncoderConfig",
    "ParserConfig",
    "PolicyConfig",
    "PredictorConfig",
    "WorldConfig",
    "desk_profile",
    "full_profile",
    "tiny_profile",
    "ActionCodebook",
    "LatentAction",
    "GaussianPosterior",
    "InverseDynamics",
    "ObjectDynamicsEncoder",
    "SceneDynamicsEncoder",
    "action_distribution",
    "sample_latent",
    "DecodedObjects",
    "FrameEncoder",
    "SceneParser",
    "SlotAttention",
    "SlotInitializer",
    "SlotTransition",
    "SpatialBroadcastDecoder",
    "ActionDecoder",
    "LatentPolicy",
    "RolloutState",
    "SlotPredictor",
    "rollout",
    "CHECKPOINT_VERSION",
    "CheckpointError",
    "CheckpointShapeError",
    "CheckpointVersionError",
    "WorldModel",
    "load_checkpoint",
    "read_checkpoint_meta",
    "save_checkpoint",
]
