"""Behavior learning from unlabeled expert demos.

Demos are annotated with latent actions inferred by the trained inverse
dynamics (mean mode, so annotation is deterministic); a latent policy is then
behavior-cloned from slots to latents, and a small action decoder is fit on a
labeled subset to translate latents into executable environment actions.

These paths require the scene-level dynamics variant: the policy emits one
latent action for the whole scene.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from ..models.world import WorldModel, load_checkpoint, save_checkpoint
from ..training.data import EpisodeCache, step_generator
from ..training.losses import policy_regression_loss
from ..training.schedules import lr_at_step, optimizer_step


@dataclass
class AnnotatedDemo:
    slots: torch.Tensor  # (T, N, D_slot)
    latents: torch.Tensor  # (T-1, D_z)
    indices: torch.Tensor  # (T-1,) prototype indices
    agent_actions: Optional[torch.Tensor]  # (T-1,) ground-truth env actions, when known
    success: bool = False


def _require_scene_variant(model: WorldModel) -> None:
    if model.dynamics.variant != "scene":
        raise ValueError("behavior learning needs the scene-level dynamics variant")


@torch.no_grad()
def annotate_episode_frames(
    model: WorldModel, frames: torch.Tensor, seed: int = 0
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Slots and mean-mode latent actions for one (T, 3, H, W) episode."""
    if frames.shape[0] < 2:
        raise ValueError("episodes must have at least 2 frames to annotate")
    _require_scene_variant(model)
    gen = torch.Generator().manual_seed(seed)
    slots = model.parser.parse_video(frames.unsqueeze(0), gen).squeeze(0)  # (T, N, D)
    post = model.dynamics.posterior(slots)
    mean = post.mean  # (T, D_z)
    z = mean[1:] - mean[:-1]
    action = model.dynamics.codebook.quantize(z)
    return slots, z, action.index


@torch.no_grad()
def annotate_demos(model: WorldModel, cache: EpisodeCache, seed: int = 0) -> list[AnnotatedDemo]:
    """Annotate every episode of a stored split; deterministic given the checkpoint."""
    model.eval()
    demos = []
    for e in range(cache.n_episodes):
        frames = cache.episode_frames(e)
        slots, z, idx = annotate_episode_frames(model, frames, seed=seed + e)
        demos.append(
            AnnotatedDemo(
                slots=slots,
                latents=z,
                indices=idx,
                agent_actions=torch.from_numpy(cache.agent_actions[e]),
                success=cache.successes[e],
            )
        )
    return demos


def write_annotations(demos: list[AnnotatedDemo], out_dir: str | Path) -> dict:
    """Persist annotations as NPZ plus a usage summary JSON; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    usage: dict[int, int] = {}
    for i, demo in enumerate(demos):
        np.savez_compressed(
            out / f"demo_{i:05d}.npz",
            slots=demo.slots.numpy(),
            latents=demo.latents.numpy(),
            indices=demo.indices.numpy(),
            agent_actions=demo.agent_actions.numpy() if demo.agent_actions is not None else np.array([]),
            success=np.array(demo.success),
        )
        for k in demo.indices.tolist():
            usage[int(k)] = usage.get(int(k), 0) + 1
    summary = {
        "n_demos": len(demos),
        "n_transitions": int(sum(len(d.indices) for d in demos)),
        "prototype_usage": {str(k): v for k, v in sorted(usage.items())},
    }
    (out / "annotations.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _flatten_pairs(demos: list[AnnotatedDemo]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(state, latent, gt_action) triples across all demo transitions."""
    states = torch.cat([d.slots[:-1] for d in demos])
    latents = torch.cat([d.latents for d in demos])
    gt = torch.cat(
        [
            d.agent_actions if d.agent_actions is not None else torch.full((len(d.latents),), -1)
            for d in demos
        ]
    )
    return states, latents, gt


def train_behavior_stage(
    data_dir: str | Path,
    out_dir: str | Path,
    config,
    base_checkpoint: Optional[str | Path],
    val_dir: Optional[str | Path] = None,
) -> Path:
    """Stage-3 training: latent policy on all demos, decoder on the labeled subset."""
    from ..training.loop import MetricsLog, PrerequisiteError, _trainer_path

    if base_checkpoint is None:
        raise PrerequisiteError("policy stage requires a dynamics checkpoint (--base-model)")
    model = load_checkpoint(base_checkpoint)
    if "dynamics" not in model.trained_stages:
        raise PrerequisiteError(f"{base_checkpoint} has no trained dynamics stage")
    _require_scene_variant(model)
    torch.manual_seed(config.seed)
    model.add_policy()
    for p in model.parameters():
        p.requires_grad_(False)
    for p in model.policy_parameters():
        p.requires_grad_(True)

    cache = EpisodeCache(data_dir)
    demos = annotate_demos(model, cache, seed=config.seed)
    states, latents, gt_actions = _flatten_pairs(demos)

    labeled = demos[: config.labeled_episodes]
    lab_latents = torch.cat([d.latents for d in labeled])
    lab_actions = torch.cat([d.agent_actions for d in labeled])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = MetricsLog(out_dir / "metrics.ndjson")
    optimizer = torch.optim.Adam(list(model.policy_parameters()), lr=config.base_lr)
    trainable = [p for group in optimizer.param_groups for p in group["params"]]

    model.policy.train()
    model.action_decoder.train()
    for step in range(config.total_steps):
        gen = step_generator(config.seed, "policy", step)
        idx = torch.randint(states.shape[0], (config.batch_size,), generator=gen)
        z_hat = model.policy(states[idx])
        loss_policy = policy_regression_loss(z_hat, latents[idx], squared=config.policy_squared)

        lab_idx = torch.randint(lab_latents.shape[0], (config.batch_size,), generator=gen)
        logits = model.action_decoder(lab_latents[lab_idx])
        loss_decoder = F.cross_entropy(logits, lab_actions[lab_idx])

        loss = loss_policy + loss_decoder
        loss.backward()
        lr = lr_at_step(step, config.base_lr, config.total_steps, config.schedule, config.warmup_steps)
        grad_norm = optimizer_step(optimizer, trainable, lr, config.clip_norm)
        if step % config.log_every == 0 or step == config.total_steps - 1:
            log.write(
                {
                    "step": step,
                    "stage": "policy",
                    "loss": {
                        "policy": round(float(loss_policy.detach()), 6),
                        "decoder": round(float(loss_decoder.detach()), 6),
                        "total": round(float(loss.detach()), 6),
                    },
                    "lr": round(lr, 8),
                    "grad_norm": round(grad_norm, 6),
                }
            )

    if "policy" not in model.trained_stages:
        model.trained_stages.append("policy")
    model.eval()
    final_path = out_dir / "model.ckpt"
    save_checkpoint(final_path, model, extra={"step": config.total_steps})
    torch.save({"step": config.total_steps, "optimizer": optimizer.state_dict()}, _trainer_path(final_path))
    return final_path


@torch.no_grad()
def decoder_accuracy(model: WorldModel, demos: list[AnnotatedDemo]) -> float:
    """Held-out accuracy of the action decoder on annotated latents."""
    _, latents, gt = _flatten_pairs(demos)
    preds = model.action_decoder.decode(latents)
    return float((preds == gt).float().mean())
