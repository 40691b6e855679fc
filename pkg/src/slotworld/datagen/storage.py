"""On-disk dataset format.

A split is a directory with ``index.json`` (version, generator config, episode
listing) plus one subdirectory per episode holding lossless 8-bit PNG frames
named ``frame_00000.png`` ... and an ``actions.json`` with per-transition,
per-shape move names. Expert splits additionally record agent/goal/success.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from .episodes import EpisodeRecord, ExpertEpisode
from .shapes import GridConfig

FORMAT_VERSION = 1


class DatasetError(Exception):
    """Base class for dataset storage failures."""


class MissingIndexError(DatasetError):
    pass


class CorruptIndexError(DatasetError):
    pass


class MissingFramesError(DatasetError):
    pass


class VersionMismatchError(DatasetError):
    pass


def frame_to_uint8(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def uint8_to_frame(img: np.ndarray) -> np.ndarray:
    return img.astype(np.float32) / 255.0


def _episode_dirname(episode_id: int) -> str:
    return f"ep_{episode_id:05d}"


def write_dataset(path: str | Path, episodes: Sequence[EpisodeRecord]) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for episode_id, episode in enumerate(episodes):
        ep_dir = root / _episode_dirname(episode_id)
        ep_dir.mkdir(exist_ok=True)
        for t, frame in enumerate(episode.frames):
            Image.fromarray(frame_to_uint8(frame)).save(ep_dir / f"frame_{t:05d}.png")
        meta: dict = {"actions": episode.actions}
        if isinstance(episode, ExpertEpisode):
            meta.update(
                {
                    "agent_index": episode.agent_index,
                    "success": episode.success,
                    "goal": list(episode.goal) if episode.goal else None,
                    "gt_agent_actions": episode.gt_agent_actions,
                }
            )
        elif episode.goal is not None:
            meta["goal"] = list(episode.goal)
        with open(ep_dir / "actions.json", "w") as f:
            json.dump(meta, f)
        entry = {
            "episode_id": episode_id,
            "length": int(episode.frames.shape[0]),
            "seed": episode.seed,
        }
        if isinstance(episode, ExpertEpisode):
            entry["success"] = episode.success
        entries.append(entry)
    index = {
        "version": FORMAT_VERSION,
        "config": episodes[0].config.to_dict() if episodes else None,
        "episodes": entries,
    }
    with open(root / "index.json", "w") as f:
        json.dump(index, f, indent=2)


def read_index(path: str | Path) -> dict:
    root = Path(path)
    index_path = root / "index.json"
    if not index_path.exists():
        raise MissingIndexError(f"missing index: no index.json under {root}")
    try:
        with open(index_path) as f:
            index = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptIndexError(f"corrupt index at {index_path}: {exc}") from exc
    for key in ("version", "config", "episodes"):
        if key not in index:
            raise CorruptIndexError(f"corrupt index at {index_path}: missing key {key!r}")
    if index["version"] != FORMAT_VERSION:
        raise VersionMismatchError(
            f"dataset version {index['version']} != supported {FORMAT_VERSION}"
        )
    return index


class StoredEpisode:
    """Lazy handle to one stored episode."""

    def __init__(self, root: Path, entry: dict, config: GridConfig):
        self.root = root
        self.entry = entry
        self.config = config
        self.episode_id = int(entry["episode_id"])
        self.length = int(entry["length"])
        self.seed = int(entry["seed"])

    def _dir(self) -> Path:
        return self.root / _episode_dirname(self.episode_id)

    def load_frames(self) -> np.ndarray:
        frames = []
        for t in range(self.length):
            frame_path = self._dir() / f"frame_{t:05d}.png"
            if not frame_path.exists():
                raise MissingFramesError(f"missing frame {frame_path}")
            frames.append(uint8_to_frame(np.asarray(Image.open(frame_path).convert("RGB"))))
        return np.stack(frames)

    def load_meta(self) -> dict:
        meta_path = self._dir() / "actions.json"
        if not meta_path.exists():
            raise MissingFramesError(f"missing actions file {meta_path}")
        with open(meta_path) as f:
            return json.load(f)

    def load(self) -> EpisodeRecord:
        meta = self.load_meta()
        frames = self.load_frames()
        goal = tuple(meta["goal"]) if meta.get("goal") else None
        if "agent_index" in meta:
            return ExpertEpisode(
                frames=frames,
                actions=meta["actions"],
                config=self.config,
                seed=self.seed,
                states=[],
                goal=goal,
                agent_index=meta["agent_index"],
                success=meta["success"],
                gt_agent_actions=meta.get("gt_agent_actions"),
            )
        return EpisodeRecord(
            frames=frames, actions=meta["actions"], config=self.config, seed=self.seed, states=[], goal=goal
        )


def read_dataset(path: str | Path) -> list[StoredEpisode]:
    root = Path(path)
    index = read_index(root)
    config = GridConfig.from_dict(index["config"])
    episodes = [StoredEpisode(root, entry, config) for entry in index["episodes"]]
    for ep in episodes:
        if not ep._dir().exists():
            raise MissingFramesError(f"missing episode directory {ep._dir()}")
    return episodes


def iter_episode_frames(path: str | Path) -> Iterator[np.ndarray]:
    for episode in read_dataset(path):
        yield episode.load_frames()
