from .learning import (
    AnnotatedDemo,
    annotate_demos,
    annotate_episode_frames,
    decoder_accuracy,
    train_behavior_stage,
    write_annotations,
)
from .protocols import (
    PROTOCOLS,
    EpisodeSetup,
    evaluate_protocol,
    execute_actions,
    imagine_rollout,
    random_baseline,
    run_imagination_episode,
    run_simulation_episode,
    sample_episode_setup,
)

__all__ = [
    "AnnotatedDemo",
    "annotate_demos",
    "annotate_episode_frames",
    "decoder_accuracy",
    "train_behavior_stage",
    "write_annotations",
    "PROTOCOLS",
    "EpisodeSetup",
    "evaluate_protocol",
    "execute_actions",
    "imagine_rollout",
    "random_baseline",
    "run_imagination_episode",
    "run_simulation_episode",
    "sample_episode_setup",
]
