"""Registry of the standard desk-scale experiments.

Datasets and training runs used by the acceptance suite are declared here
with fixed seeds and step counts; ``ensure_dataset`` / ``ensure_model``
materialize them on demand under the artifact root (train once, reuse
thereafter). Everything is deterministic, so two builds of the same name
yield identical artifacts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .datagen.episodes import generate_episode, generate_expert_episode
from .datagen.shapes import GridConfig
from .datagen.storage import write_dataset
from .models.config import WorldConfig, desk_profile
from .training.loop import TrainConfig, train_stage

DEMO_ACTION_NOISE = 0.20  # calibrated: ~79% of scripted demos succeed


def artifact_root() -> Path:
    root = os.environ.get("SLOTWORLD_ARTIFACTS")
    if root:
        return Path(root)
    return Path(__file__).resolve().parents[2] / "artifacts"


def _grid(n_shapes: int, shape_size: int, **kw) -> GridConfig:
    # Large shapes on a 4px grid: the 8x8 cell layout with enough pixel mass
    # per object for slot discovery to happen within a CPU step budget.
    base = dict(
        image_size=32,
        grid_step=4,
        shape_size=shape_size,
        n_shapes=n_shapes,
        direction_change_prob=0.25,
        episode_length=24,
    )
    base.update(kw)
    return GridConfig(**base)


GOAL_GRID = _grid(
    1,
    12,
    episode_length=16,
    direction_change_prob=1.0,  # per-step resampling = random exploration agent
    goal_marker="random",
    min_goal_distance=4,
)

DEMO_GRID = _grid(
    1,
    12,
    episode_length=16,
    direction_change_prob=0.25,  # unused for the agent; experts are scripted
    goal_marker="random",
    min_goal_distance=4,
)


@dataclass
class DatasetSpec:
    config: GridConfig
    n_episodes: int
    seed: int
    expert: bool = False
    action_noise: float = 0.0


DATASETS: dict[str, DatasetSpec] = {
    "g1_train": DatasetSpec(_grid(1, 12), 500, seed=10_000),
    "g1_val": DatasetSpec(_grid(1, 12), 100, seed=90_000),
    "g3_train": DatasetSpec(_grid(3, 10), 500, seed=13_000),
    "g3_val": DatasetSpec(_grid(3, 10), 100, seed=93_000),
    "g5_train": DatasetSpec(_grid(5, 9), 500, seed=15_000),
    "g5_val": DatasetSpec(_grid(5, 9), 100, seed=95_000),
    "goal_train": DatasetSpec(GOAL_GRID, 600, seed=20_000),
    "goal_val": DatasetSpec(GOAL_GRID, 100, seed=92_000),
    "demos_train": DatasetSpec(DEMO_GRID, 500, seed=30_000, expert=True, action_noise=DEMO_ACTION_NOISE),
    "demos_heldout": DatasetSpec(DEMO_GRID, 100, seed=94_000, expert=True, action_noise=DEMO_ACTION_NOISE),
}


@dataclass
class RunSpec:
    stage: str
    data: str
    world: Optional[dict] = None  # desk_profile kwargs for fresh models
    base: Optional[str] = None  # name of the prerequisite run
    resume: Optional[str] = None  # run whose final checkpoint this continues
    val: Optional[str] = None
    train: dict = field(default_factory=dict)


# Parser training is two-phase: a discovery run whose cosine drops the rate
# decisively once slots specialize, then a low-rate polish resumed from it.
_PARSER_SEED = dict(
    total_steps=4000, batch_size=8, seq_len=4, base_lr=7e-4, warmup_steps=300,
    schedule="warmup_cosine", log_every=50, eval_every=500, ckpt_every=0, seed=1,
)
_PARSER_POLISH = dict(
    total_steps=7000, batch_size=8, seq_len=4, base_lr=2e-4, warmup_steps=0,
    schedule="cosine", log_every=50, eval_every=500, ckpt_every=0, seed=1,
)
_DYN_TRAIN = dict(
    total_steps=4000, batch_size=8, n_seed=6, n_predict=6, base_lr=2e-4,
    schedule="cosine", log_every=50, eval_every=0, ckpt_every=2000, seed=2,
)
_POLICY_TRAIN = dict(
    total_steps=3000, batch_size=64, base_lr=2e-4, schedule="constant",
    log_every=50, eval_every=0, ckpt_every=0, labeled_episodes=50,
)


def _resolve_world(name: str) -> dict:
    spec = MODELS[name]
    while spec.world is None:
        if spec.resume is None and spec.base is None:
            raise KeyError(f"run {name} has no world config in its chain")
        spec = MODELS[spec.resume or spec.base]
    return spec.world


def _dyn(data: str, base: str, variant: str, action_space: str = "hybrid", **train_kw) -> RunSpec:
    train = dict(_DYN_TRAIN)
    train["action_space"] = action_space
    train.update(train_kw)
    world = dict(n_slots=_resolve_world(base)["n_slots"], variant=variant)
    return RunSpec(stage="dynamics", data=data, world=world, base=base, train=train)


MODELS: dict[str, RunSpec] = {}
MODELS.update(
    {
        "parser_g1_seed": RunSpec("parser", "g1_train", world=dict(n_slots=2), val="g1_val",
                                  train=dict(_PARSER_SEED)),
        "parser_g1": RunSpec("parser", "g1_train", resume="parser_g1_seed", val="g1_val",
                             train=dict(_PARSER_POLISH)),
        "parser_g3_seed": RunSpec("parser", "g3_train", world=dict(n_slots=4), val="g3_val",
                                  train=dict(_PARSER_SEED, total_steps=5000)),
        "parser_g3": RunSpec("parser", "g3_train", resume="parser_g3_seed", val="g3_val",
                             train=dict(_PARSER_POLISH, total_steps=8000)),
        "parser_g5_seed": RunSpec("parser", "g5_train", world=dict(n_slots=6), val="g5_val",
                                  train=dict(_PARSER_SEED, total_steps=6000, batch_size=6)),
        "parser_g5": RunSpec("parser", "g5_train", resume="parser_g5_seed", val="g5_val",
                             train=dict(_PARSER_POLISH, total_steps=9000, batch_size=6)),
        "parser_goal_seed": RunSpec("parser", "goal_train", world=dict(n_slots=3), val="goal_val",
                                    train=dict(_PARSER_SEED)),
        "parser_goal": RunSpec("parser", "goal_train", resume="parser_goal_seed", val="goal_val",
                               train=dict(_PARSER_POLISH)),
    }
)
MODELS.update(
    {
        "dyn_g1_object": _dyn("g1_train", "parser_g1", "object"),
        "dyn_g1_scene": _dyn("g1_train", "parser_g1", "scene"),
        "dyn_g1_scene_continuous": _dyn("g1_train", "parser_g1", "scene", action_space="continuous"),
        "dyn_g1_scene_discrete": _dyn("g1_train", "parser_g1", "scene", action_space="discrete"),
        "dyn_g1_scene_oracle": _dyn("g1_train", "parser_g1", "scene", action_space="oracle"),
        "dyn_g3_object": _dyn("g3_train", "parser_g3", "object"),
        "dyn_g3_scene": _dyn("g3_train", "parser_g3", "scene"),
        "dyn_g5_object": _dyn("g5_train", "parser_g5", "object", batch_size=6),
        "dyn_g5_scene": _dyn("g5_train", "parser_g5", "scene", batch_size=6),
        "dyn_goal": _dyn("goal_train", "parser_goal", "scene"),
    }
)
MODELS.update(
    {
        f"policy_seed{s}": RunSpec(
            stage="policy", data="demos_train", base="dyn_goal", train=dict(_POLICY_TRAIN, seed=s)
        )
        for s in range(3)
    }
)


def dataset_path(name: str, root: Optional[Path] = None) -> Path:
    return (root or artifact_root()) / "datasets" / name


def model_path(name: str, root: Optional[Path] = None) -> Path:
    return (root or artifact_root()) / "models" / name / "model.ckpt"


def ensure_dataset(name: str, root: Optional[Path] = None) -> Path:
    spec = DATASETS[name]
    path = dataset_path(name, root)
    if (path / "index.json").exists():
        return path
    print(f"[experiments] generating dataset {name} ({spec.n_episodes} episodes)", flush=True)
    if spec.expert:
        episodes = [
            generate_expert_episode(spec.config, seed=spec.seed + i, action_noise=spec.action_noise)
            for i in range(spec.n_episodes)
        ]
    else:
        episodes = [generate_episode(spec.config, seed=spec.seed + i) for i in range(spec.n_episodes)]
    write_dataset(path, episodes)
    return path


def _world_config(spec: RunSpec) -> Optional[WorldConfig]:
    if spec.world is None:
        return None
    return desk_profile(**spec.world)


def ensure_model(name: str, root: Optional[Path] = None) -> Path:
    """Train the named run (and its prerequisites) unless its checkpoint exists."""
    spec = MODELS[name]
    ckpt = model_path(name, root)
    if ckpt.exists():
        return ckpt
    base_ckpt = ensure_model(spec.base, root) if spec.base else None
    resume_ckpt = ensure_model(spec.resume, root) if spec.resume else None
    data = ensure_dataset(spec.data, root)
    val = ensure_dataset(spec.val, root) if spec.val else None
    train_kw = dict(spec.train)
    train_kw["stage"] = spec.stage
    config = TrainConfig(**train_kw)
    print(f"[experiments] training {name} ({spec.stage}, {config.total_steps} steps)", flush=True)
    out_dir = ckpt.parent
    final = train_stage(
        spec.stage,
        data,
        out_dir,
        config,
        world_config=_world_config(spec),
        base_checkpoint=base_ckpt,
        resume=resume_ckpt,
        val_dir=val,
    )
    return final


def build_all(root: Optional[Path] = None, names: Optional[list[str]] = None) -> None:
    for name in DATASETS:
        ensure_dataset(name, root)
    for name in names or list(MODELS):
        ensure_model(name, root)
