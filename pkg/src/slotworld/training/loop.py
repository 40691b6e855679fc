"""Three-stage training driver with NDJSON metrics and resumable checkpoints.

Stages: "parser" (scene reconstruction), "dynamics" (joint inverse dynamics +
conditional predictor with the parser frozen), and "policy" (latent policy +
action decoder on expert demos). Batches are derived statelessly from
(seed, step), so a resumed run replays the exact remaining batch stream.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import torch

from ..models.config import WorldConfig, desk_profile, full_profile, tiny_profile
from ..models.world import WorldModel, load_checkpoint, save_checkpoint
from .data import EpisodeCache, step_generator
from .losses import LossWeights, parser_reconstruction_loss, prediction_loss
from .schedules import lr_at_step, optimizer_step

STAGES = ("parser", "dynamics", "policy")


class PrerequisiteError(RuntimeError):
    """Raised when a stage is started without its required base checkpoint."""


@dataclass
class TrainConfig:
    stage: str
    total_steps: int
    batch_size: int = 8
    base_lr: float = 1e-4
    warmup_steps: int = 0
    schedule: str = "warmup_cosine"
    clip_norm: float = 0.05
    seq_len: int = 5  # parser-stage window
    n_seed: int = 6
    n_predict: int = 6
    seed: int = 0
    log_every: int = 25
    eval_every: int = 500
    ckpt_every: int = 2000
    eval_episodes: int = 8
    sample_mode: str = "sample"
    vq_squared: bool = True
    action_space: str = "hybrid"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    # policy stage
    labeled_episodes: int = 50
    policy_squared: bool = False

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.warmup_steps > self.total_steps:
            raise ValueError("warmup cannot exceed total steps")
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)


def default_train_config(stage: str, total_steps: int, **overrides) -> TrainConfig:
    """Stage defaults: parser 1e-4 with 4000-step warmup + cosine; dynamics
    2e-4 cosine; policy fixed 2e-4."""
    base = {
        "parser": dict(base_lr=1e-4, schedule="warmup_cosine", warmup_steps=min(4000, total_steps // 2)),
        "dynamics": dict(base_lr=2e-4, schedule="cosine"),
        "policy": dict(base_lr=2e-4, schedule="constant"),
    }[stage]
    base.update(overrides)
    return TrainConfig(stage=stage, total_steps=total_steps, **base)


def build_world_config(spec: dict) -> WorldConfig:
    """Model section of a run config: a named profile plus keyword overrides."""
    spec = dict(spec)
    profile = spec.pop("profile", "desk")
    factory = {"desk": desk_profile, "full": full_profile, "tiny": tiny_profile}.get(profile)
    if factory is None:
        raise ValueError(f"unknown model profile {profile!r}")
    return factory(**spec)


class MetricsLog:
    """Newline-delimited JSON log; one record per logging event."""

    def __init__(self, path: Path, append: bool = False):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._start = time.monotonic()
        if not append:
            self.path.write_text("")

    def write(self, record: dict) -> None:
        record = dict(record)
        record["wallclock"] = round(time.monotonic() - self._start, 3)
        with open(self.path, "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def _save_train_checkpoint(
    out_dir: Path, step: int, model: WorldModel, optimizer: torch.optim.Optimizer
) -> Path:
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    model_path = ckpt_dir / f"step_{step:06d}.ckpt"
    save_checkpoint(model_path, model, extra={"step": step})
    torch.save({"step": step, "optimizer": optimizer.state_dict()}, _trainer_path(model_path))
    return model_path


def _trainer_path(model_path: Path) -> Path:
    return model_path.with_name(model_path.name.replace(".ckpt", ".trainer.pt"))


def _restore(resume: Path, optimizer_factory) -> tuple[WorldModel, torch.optim.Optimizer, int]:
    model = load_checkpoint(resume)
    optimizer = optimizer_factory(model)
    trainer_file = _trainer_path(Path(resume))
    if not trainer_file.exists():
        raise PrerequisiteError(f"no trainer state alongside {resume}")
    state = torch.load(trainer_file, weights_only=False)
    optimizer.load_state_dict(state["optimizer"])
    return model, optimizer, int(state["step"])


@torch.no_grad()
def quick_recon_psnr(model: WorldModel, cache: EpisodeCache, n_episodes: int, seed: int) -> float:
    """Mean reconstruction PSNR over the first frames of a few episodes."""
    from ..evaluation.metrics import psnr

    model.eval()
    scores = []
    for i in range(min(n_episodes, cache.n_episodes)):
        frames = cache.episode_frames(i)[:4].unsqueeze(0)
        g = torch.Generator().manual_seed(seed + i)
        slots = model.parser.parse_video(frames, g)
        recon = model.parser.reconstruct_video(slots).clamp(0.0, 1.0)
        scores.append(psnr(recon.squeeze(0).numpy(), frames.squeeze(0).numpy()))
    model.train()
    return float(sum(scores) / len(scores))


def train_stage(
    stage: str,
    data_dir: str | Path,
    out_dir: str | Path,
    config: TrainConfig,
    world_config: Optional[WorldConfig] = None,
    base_checkpoint: Optional[str | Path] = None,
    resume: Optional[str | Path] = None,
    val_dir: Optional[str | Path] = None,
) -> Path:
    """Run one training stage end to end; returns the final model checkpoint path."""
    if stage != config.stage:
        raise ValueError("stage argument and config.stage disagree")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "train_config.json").write_text(json.dumps(asdict(config), indent=2, sort_keys=True))

    if stage == "policy":
        from ..behavior.learning import train_behavior_stage

        return train_behavior_stage(data_dir, out_dir, config, base_checkpoint, val_dir=val_dir)

    torch.manual_seed(config.seed)
    cache = EpisodeCache(data_dir)
    val_cache = EpisodeCache(val_dir) if val_dir else cache

    def make_optimizer(model: WorldModel) -> torch.optim.Optimizer:
        params = model.parser.parameters() if stage == "parser" else model.dynamics_parameters()
        return torch.optim.Adam([p for p in params], lr=config.base_lr)

    start_step = 0
    if resume is not None:
        model, optimizer, start_step = _restore(Path(resume), make_optimizer)
    elif stage == "parser":
        model = WorldModel(world_config or desk_profile(), action_space=config.action_space)
        optimizer = make_optimizer(model)
    else:
        if base_checkpoint is None:
            raise PrerequisiteError("dynamics stage requires a parser checkpoint (--base-model)")
        base = load_checkpoint(base_checkpoint)
        if "parser" not in base.trained_stages:
            raise PrerequisiteError(f"{base_checkpoint} has no trained parser stage")
        desired = world_config or base.config
        if desired.to_dict() != base.config.to_dict() or config.action_space != base.action_space:
            # Same trained parser, different dynamics/predictor wiring (e.g. a
            # scene-variant run on top of an object-variant parser checkpoint).
            if desired.parser != base.config.parser:
                raise PrerequisiteError("parser configuration must match the base checkpoint")
            model = WorldModel(desired, action_space=config.action_space)
            model.parser.load_state_dict(base.parser.state_dict())
            model.trained_stages = list(base.trained_stages)
        else:
            model = base
        optimizer = make_optimizer(model)

    if stage == "dynamics":
        model.freeze_parser()
        t_window = config.n_seed + config.n_predict
    else:
        t_window = config.seq_len

    model.train()
    trainable = [p for group in optimizer.param_groups for p in group["params"]]
    log = MetricsLog(out_dir / "metrics.ndjson", append=start_step > 0)

    for step in range(start_step, config.total_steps):
        gen = step_generator(config.seed, stage, step)
        frames, agent_actions = cache.sample_batch(gen, config.batch_size, t_window)
        lr = lr_at_step(step, config.base_lr, config.total_steps, config.schedule, config.warmup_steps)

        if stage == "parser":
            loss = parser_reconstruction_loss(model.parser, frames, gen)
            components = {"reconstruction": float(loss.detach()), "total": float(loss.detach())}
        else:
            loss, components = prediction_loss(
                model,
                frames,
                config.n_seed,
                config.loss_weights,
                sample_mode=config.sample_mode,
                vq_squared=config.vq_squared,
                generator=gen,
                oracle_actions=agent_actions if model.action_space == "oracle" else None,
                update_codebook=True,
            )

        loss.backward()
        grad_norm = optimizer_step(optimizer, trainable, lr, config.clip_norm)

        if step % config.log_every == 0 or step == config.total_steps - 1:
            log.write(
                {
                    "step": step,
                    "stage": stage,
                    "loss": {k: round(v, 6) for k, v in components.items()},
                    "lr": round(lr, 8),
                    "grad_norm": round(grad_norm, 6),
                }
            )
        if config.eval_every and (step + 1) % config.eval_every == 0:
            val_psnr = quick_recon_psnr(model, val_cache, config.eval_episodes, config.seed)
            log.write({"step": step, "stage": stage, "eval": {"recon_psnr": round(val_psnr, 4)}})
        if config.ckpt_every and (step + 1) % config.ckpt_every == 0 and step + 1 < config.total_steps:
            _save_train_checkpoint(out_dir, step + 1, model, optimizer)

    if stage not in model.trained_stages:
        model.trained_stages.append(stage)
    final_path = out_dir / "model.ckpt"
    save_checkpoint(final_path, model, extra={"step": config.total_steps})
    torch.save({"step": config.total_steps, "optimizer": optimizer.state_dict()}, _trainer_path(final_path))
    return final_path
