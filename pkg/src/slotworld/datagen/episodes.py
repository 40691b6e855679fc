"""Episode generation: stochastic worlds, scripted goal-seeking experts, replay."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .shapes import (
    MOVE_NAMES,
    GridConfig,
    ShapeState,
    apply_move,
    render_frame,
    render_shape_masks,
    sample_initial_state,
    step_dynamics,
)


@dataclass
class EpisodeRecord:
    """A generated video episode, reproducible from (config, seed).

    ``actions[t][i]`` is the move applied to shape ``i`` on the transition from
    frame ``t`` to frame ``t + 1``, so ``len(actions) == len(frames) - 1``.
    """

    frames: np.ndarray  # (T, H, W, 3) float32 in [0, 1]
    actions: list[list[str]]
    config: GridConfig
    seed: int
    states: list[list[ShapeState]]
    goal: Optional[tuple[int, int]] = None


@dataclass
class ExpertEpisode(EpisodeRecord):
    """Episode where one shape is steered toward a goal cell."""

    agent_index: int = 0
    success: bool = False
    gt_agent_actions: Optional[list[str]] = None  # pre-noise expert choices


def resolve_goal(
    config: GridConfig, rng: np.random.Generator, agent_cell: Optional[tuple[int, int]]
) -> tuple[GridConfig, Optional[tuple[int, int]]]:
    """Fix the goal cell, sampling one if the config asks for a random goal."""
    if config.goal_marker is None:
        return config, None
    if isinstance(config.goal_marker, tuple):
        return config, config.goal_marker
    if config.goal_marker != "random":
        raise ValueError(f"unsupported goal_marker {config.goal_marker!r}")
    n = config.n_cells
    while True:
        goal = (int(rng.integers(0, n)), int(rng.integers(0, n)))
        if agent_cell is None:
            break
        dist = abs(goal[0] - agent_cell[0]) + abs(goal[1] - agent_cell[1])
        if dist >= config.min_goal_distance:
            break
    return replace(config, goal_marker=goal), goal


def generate_episode(config: GridConfig, seed: int) -> EpisodeRecord:
    """Roll the stochastic dynamics for ``episode_length`` frames."""
    rng = np.random.default_rng(seed)
    state = sample_initial_state(config, rng)
    config, goal = resolve_goal(config, rng, state[0].position if config.n_shapes else None)
    frames = [render_frame(state, config)]
    states = [state]
    actions: list[list[str]] = []
    for _ in range(config.episode_length - 1):
        state, moves = step_dynamics(state, config, rng)
        frames.append(render_frame(state, config))
        states.append(state)
        actions.append(moves)
    return EpisodeRecord(
        frames=np.stack(frames), actions=actions, config=config, seed=seed, states=states, goal=goal
    )


def expert_action(position: tuple[int, int], goal: tuple[int, int]) -> str:
    """Greedy move toward the goal: larger axis gap first, ties horizontal."""
    dr = goal[0] - position[0]
    dc = goal[1] - position[1]
    if dr == 0 and dc == 0:
        return "stay"
    if abs(dr) > abs(dc):
        return "down" if dr > 0 else "up"
    return "right" if dc > 0 else "left"


def generate_expert_episode(
    config: GridConfig,
    seed: int,
    agent_index: int = 0,
    action_noise: float = 0.0,
) -> ExpertEpisode:
    """Scripted goal-seeking episode.

    The agent shape moves greedily toward the goal marker; with probability
    ``action_noise`` its move is replaced by a uniform random one. Remaining
    shapes follow the stochastic grid dynamics. Success means the agent sits
    on the goal cell in the final frame.
    """
    if config.goal_marker is None:
        raise ValueError("expert episodes need a goal_marker in the config")
    if not 0 <= agent_index < config.n_shapes:
        raise ValueError("agent_index out of range")
    rng = np.random.default_rng(seed)
    state = sample_initial_state(config, rng)
    config, goal = resolve_goal(config, rng, state[agent_index].position)
    assert goal is not None

    frames = [render_frame(state, config)]
    states = [state]
    actions: list[list[str]] = []
    intended: list[str] = []
    for _ in range(config.episode_length - 1):
        # Non-agent shapes get their stochastic draws first so the agent's
        # noise draw does not perturb their stream layout.
        next_state, moves = step_dynamics(state, config, rng)
        choice = expert_action(state[agent_index].position, goal)
        intended.append(choice)
        if action_noise > 0.0 and rng.random() < action_noise:
            choice = MOVE_NAMES[rng.integers(0, len(MOVE_NAMES))]
        agent = apply_move(state[agent_index], choice, config.n_cells)
        next_state = list(next_state)
        next_state[agent_index] = agent
        moves = list(moves)
        moves[agent_index] = agent.velocity
        state = next_state
        frames.append(render_frame(state, config))
        states.append(state)
        actions.append(moves)
    success = state[agent_index].position == goal
    return ExpertEpisode(
        frames=np.stack(frames),
        actions=actions,
        config=config,
        seed=seed,
        states=states,
        goal=goal,
        agent_index=agent_index,
        success=success,
        gt_agent_actions=intended,
    )


def replay_actions(
    initial_state: list[ShapeState], actions: list[list[str]], config: GridConfig
) -> list[list[ShapeState]]:
    """Re-simulate a recorded move log; positions must match the original run."""
    states = [initial_state]
    state = initial_state
    for moves in actions:
        state = [apply_move(shape, move, config.n_cells) for shape, move in zip(state, moves)]
        states.append(state)
    return states


def episode_shape_masks(episode: EpisodeRecord) -> np.ndarray:
    """Analytic visible-pixel masks, bool (T, n_shapes, H, W)."""
    return np.stack([render_shape_masks(state, episode.config) for state in episode.states])
