"""In-memory dataset cache with deterministic, stateless batch sampling.

Every batch is derived from (seed, step) alone, so resuming a run at step k
continues the exact same batch stream with no sampler state to serialize.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np
import torch

from ..datagen.shapes import MOVE_NAMES
from ..datagen.storage import read_dataset

MOVE_INDEX = {name: i for i, name in enumerate(MOVE_NAMES)}


class EpisodeCache:
    """Loads a stored split fully into RAM as uint8 frames and int64 actions."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        stored = read_dataset(self.path)
        if not stored:
            raise ValueError(f"dataset at {self.path} has no episodes")
        self.config = stored[0].config
        frames = []
        actions = []
        agent_actions = []
        self.successes: list[bool] = []
        for handle in stored:
            ep = handle.load()
            frames.append(np.round(ep.frames * 255.0).astype(np.uint8))
            acts = np.array(
                [[MOVE_INDEX[m] for m in step] for step in ep.actions], dtype=np.int64
            )
            actions.append(acts)
            agent_idx = getattr(ep, "agent_index", 0)
            agent_actions.append(acts[:, agent_idx])
            self.successes.append(bool(getattr(ep, "success", False)))
        self.frames = np.stack(frames)  # (E, T, H, W, 3) uint8
        self.actions = np.stack(actions)  # (E, T-1, S)
        self.agent_actions = np.stack(agent_actions)  # (E, T-1)

    @property
    def n_episodes(self) -> int:
        return self.frames.shape[0]

    @property
    def episode_length(self) -> int:
        return self.frames.shape[1]

    def episode_frames(self, index: int) -> torch.Tensor:
        """(T, 3, H, W) float tensor for one episode."""
        return torch.from_numpy(self.frames[index]).float().permute(0, 3, 1, 2) / 255.0

    def sample_batch(
        self, generator: torch.Generator, batch_size: int, t_len: int
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Random (episode, window) picks: frames (B, T, 3, H, W), agent actions (B, T-1)."""
        if t_len > self.episode_length:
            raise ValueError(
                f"requested window {t_len} exceeds episode length {self.episode_length}"
            )
        ep_idx = torch.randint(self.n_episodes, (batch_size,), generator=generator).numpy()
        max_start = self.episode_length - t_len
        starts = (
            torch.randint(max_start + 1, (batch_size,), generator=generator).numpy()
            if max_start > 0
            else np.zeros(batch_size, dtype=np.int64)
        )
        frames = np.stack([self.frames[e, s : s + t_len] for e, s in zip(ep_idx, starts)])
        acts = np.stack([self.agent_actions[e, s : s + t_len - 1] for e, s in zip(ep_idx, starts)])
        frames_t = torch.from_numpy(frames).float().permute(0, 1, 4, 2, 3) / 255.0
        return frames_t, torch.from_numpy(acts)


def step_generator(seed: int, stage: str, step: int) -> torch.Generator:
    """Deterministic per-step RNG; independent of any previous step.

    Uses a process-stable stage hash (Python's str hash is salted per run).
    """
    stage_mix = zlib.crc32(stage.encode()) % 1_000_003
    mix = (seed * 1_000_003 + stage_mix) % (2**31)
    return torch.Generator().manual_seed(mix * 100_003 + step)
