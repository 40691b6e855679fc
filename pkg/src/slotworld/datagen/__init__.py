from .shapes import (
    GOAL_MARKER_COLOR,
    MOVE_NAMES,
    MOVES,
    SHAPE_KINDS,
    GridConfig,
    ShapeState,
    apply_move,
    render_frame,
    render_shape_masks,
    reverse_move,
    sample_initial_state,
    shape_stencil,
    step_dynamics,
)
from .episodes import (
    EpisodeRecord,
    ExpertEpisode,
    episode_shape_masks,
    expert_action,
    generate_episode,
    generate_expert_episode,
    replay_actions,
)
from .storage import (
    FORMAT_VERSION,
    CorruptIndexError,
    DatasetError,
    MissingFramesError,
    MissingIndexError,
    StoredEpisode,
    VersionMismatchError,
    read_dataset,
    read_index,
    write_dataset,
)

__all__ = [
    "GOAL_MARKER_COLOR",
    "MOVE_NAMES",
    "MOVES",
    "SHAPE_KINDS",
    "GridConfig",
    "ShapeState",
    "apply_move",
    "render_frame",
    "render_shape_masks",
    "reverse_move",
    "sample_initial_state",
    "shape_stencil",
    "step_dynamics",
    "EpisodeRecord",
    "ExpertEpisode",
    "episode_shape_masks",
    "expert_action",
    "generate_episode",
    "generate_expert_episode",
    "replay_actions",
    "FORMAT_VERSION",
    "CorruptIndexError",
    "DatasetError",
    "MissingFramesError",
    "MissingIndexError",
    "StoredEpisode",
    "VersionMismatchError",
    "read_dataset",
    "read_index",
    "write_dataset",
]
