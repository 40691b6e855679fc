"""Behavior evaluation: latent-imagination vs in-simulator protocols.

Simulation: each policy latent is decoded and executed immediately, the next
frame comes from the simulator, and the recurrent parse tracks it. Imagination:
the whole action sequence is produced inside the learned world model from a
single seed frame, then executed once, open loop, in the simulator. Success
means the agent reaches the goal cell within the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..datagen.episodes import resolve_goal
from ..datagen.shapes import MOVE_NAMES, GridConfig, apply_move, render_frame, sample_initial_state
from ..models.codebook import LatentAction
from ..models.predictor import RolloutState
from ..models.world import WorldModel

PROTOCOLS = ("simulation", "latent_imagination")


@dataclass
class EpisodeSetup:
    config: GridConfig  # goal resolved to a concrete cell
    state: list  # initial ShapeState list
    goal: tuple[int, int]
    agent_index: int = 0


def sample_episode_setup(config: GridConfig, seed: int, agent_index: int = 0) -> EpisodeSetup:
    """Fresh (agent, goal) placement drawn exactly like the episode generator."""
    if config.goal_marker is None:
        raise ValueError("behavior evaluation needs a goal_marker")
    rng = np.random.default_rng(seed)
    state = sample_initial_state(config, rng)
    resolved, goal = resolve_goal(config, rng, state[agent_index].position)
    assert goal is not None
    return EpisodeSetup(config=resolved, state=state, goal=goal, agent_index=agent_index)


def execute_actions(setup: EpisodeSetup, action_indices: list[int]) -> bool:
    """Open-loop execution in the simulator; true if the goal is ever reached."""
    state = list(setup.state)
    agent = setup.agent_index
    if state[agent].position == setup.goal:
        return True
    for a in action_indices:
        move = MOVE_NAMES[a]
        state[agent] = apply_move(state[agent], move, setup.config.n_cells)
        if state[agent].position == setup.goal:
            return True
    return False


@torch.no_grad()
def run_simulation_episode(model: WorldModel, setup: EpisodeSetup, horizon: int, seed: int) -> bool:
    """Closed loop: decode each policy latent, step the simulator, re-parse."""
    assert model.policy is not None and model.action_decoder is not None
    gen = torch.Generator().manual_seed(seed)
    state = list(setup.state)
    agent = setup.agent_index
    frame = torch.from_numpy(render_frame(state, setup.config)).permute(2, 0, 1).unsqueeze(0)
    slots = model.parser.parse_step(frame, None, gen)
    if state[agent].position == setup.goal:
        return True
    for _ in range(horizon):
        z = model.policy(slots)
        action = int(model.action_decoder.decode(z)[0])
        state[agent] = apply_move(state[agent], MOVE_NAMES[action], setup.config.n_cells)
        if state[agent].position == setup.goal:
            return True
        frame = torch.from_numpy(render_frame(state, setup.config)).permute(2, 0, 1).unsqueeze(0)
        slots = model.parser.parse_step(frame, slots, gen)
    return False


@torch.no_grad()
def imagine_rollout(
    model: WorldModel,
    seed_frame: torch.Tensor,
    horizon: int,
    seed: int = 0,
) -> tuple[list[LatentAction], list[int]]:
    """Unfold the policy inside the learned world model from one frame.

    Returns the latent trajectory (each policy output decomposed into
    prototype + variability) and the decoded environment-action sequence.
    """
    assert model.policy is not None and model.action_decoder is not None
    gen = torch.Generator().manual_seed(seed)
    slots = model.parser.parse_step(seed_frame.unsqueeze(0), None, gen)
    state = RolloutState.from_seed(slots.unsqueeze(1))
    latents: list[LatentAction] = []
    decoded: list[int] = []
    current = slots
    for _ in range(horizon):
        z_hat = model.policy(current)
        action = model.dynamics.codebook.quantize(z_hat)
        latents.append(action)
        decoded.append(int(model.action_decoder.decode(z_hat)[0]))
        state.append_action(action)
        slot_hist, protos, varis = state.stacked()
        current = model.predictor(slot_hist, protos, varis)
        state.append_slots(current)
    return latents, decoded


@torch.no_grad()
def run_imagination_episode(model: WorldModel, setup: EpisodeSetup, horizon: int, seed: int) -> bool:
    frame = torch.from_numpy(render_frame(setup.state, setup.config)).permute(2, 0, 1)
    _, decoded = imagine_rollout(model, frame, horizon, seed)
    return execute_actions(setup, decoded)


def run_random_episode(setup: EpisodeSetup, horizon: int, seed: int) -> bool:
    rng = np.random.default_rng(seed)
    actions = [int(rng.integers(0, len(MOVE_NAMES))) for _ in range(horizon)]
    return execute_actions(setup, actions)


def evaluate_protocol(
    models: list[WorldModel] | WorldModel,
    protocol: str,
    env_config: GridConfig,
    n_episodes: int,
    horizon: int,
    seed: int = 0,
) -> dict:
    """Success rate of one or more trained policies under a protocol.

    With several models (independently trained seeds) the report carries the
    mean success rate and its standard deviation across them.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    if isinstance(models, WorldModel):
        models = [models]
    runner = run_simulation_episode if protocol == "simulation" else run_imagination_episode
    per_model = []
    successes = []
    for m_idx, model in enumerate(models):
        model.eval()
        wins = 0
        for e in range(n_episodes):
            setup = sample_episode_setup(env_config, seed=seed * 100_003 + e)
            wins += bool(runner(model, setup, horizon, seed=seed + m_idx * 7919 + e))
        per_model.append(wins / n_episodes)
        successes.append(wins)
    rates = np.array(per_model)
    return {
        "protocol": protocol,
        "n": n_episodes,
        "successes": successes,
        "rate": float(rates.mean()),
        "stddev": float(rates.std()),
        "seeds": list(range(len(models))),
        "per_model_rate": per_model,
    }


def random_baseline(env_config: GridConfig, n_episodes: int, horizon: int, seed: int = 0) -> float:
    """Success rate of uniform random actions; the sanity floor."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    wins = 0
    for e in range(n_episodes):
        setup = sample_episode_setup(env_config, seed=seed * 100_003 + e)
        wins += bool(run_random_episode(setup, horizon, seed=seed + e))
    return wins / n_episodes
