"""Experiment harnesses: rollout evaluation, scaling and ablation studies,
prototype-consistency analysis, and segmentation rendering.

Per-step metrics average per episode first, then across episodes. Rollouts
use 6 seed frames and a 15-step horizon by default, with actions inferred
from the ground-truth continuation unless another source is requested.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from ..datagen.episodes import EpisodeRecord, episode_shape_masks, generate_episode
from ..datagen.shapes import GridConfig
from ..models.codebook import LatentAction
from ..models.predictor import RolloutState
from ..models.world import WorldModel
from ..training.data import EpisodeCache
from .metrics import psnr, ssim

ACTION_SOURCES = ("invdyn_reference", "zero", "user_script")

# Fixed palette for slot segmentations (uint8 RGB), stable across frames.
SEGMENTATION_PALETTE = np.array(
    [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
    ],
    dtype=np.uint8,
)


@dataclass
class MetricReport:
    model_id: str
    dataset_id: str
    n_seed: int
    horizon: int
    action_source: str
    n_episodes: int
    per_step_psnr: list[float] = field(default_factory=list)
    per_step_ssim: list[float] = field(default_factory=list)
    per_episode_psnr: list[float] = field(default_factory=list)
    per_episode_ssim: list[float] = field(default_factory=list)
    mean_psnr: float = 0.0
    mean_ssim: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _frames_tensor(frames: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(frames).float().permute(0, 3, 1, 2)


def _eval_action(
    model: WorldModel, z: Optional[torch.Tensor], oracle_index: Optional[torch.Tensor]
) -> LatentAction:
    """Build the conditioning action for one rollout step at eval time."""
    space = model.action_space
    if space == "oracle":
        assert model.oracle_embed is not None and oracle_index is not None
        proto = model.oracle_embed(oracle_index)
        zero = torch.zeros_like(proto)
        return LatentAction(z=proto, index=oracle_index, prototype=proto, variability=zero)
    assert z is not None
    action = model.dynamics.codebook.quantize(z)
    proto = model.dynamics.codebook.lookup(action.index)
    if space == "hybrid":
        return LatentAction(z=z, index=action.index, prototype=proto, variability=z - proto)
    if space == "discrete":
        zero = torch.zeros_like(proto)
        return LatentAction(z=proto, index=action.index, prototype=proto, variability=zero)
    if space == "continuous":
        zero = torch.zeros_like(z)
        return LatentAction(z=z, index=action.index, prototype=zero, variability=z)
    raise ValueError(f"unknown action space {space!r}")


def _zero_action(model: WorldModel, like: torch.Tensor) -> LatentAction:
    zero = torch.zeros_like(like)
    index = torch.zeros(like.shape[:-1], dtype=torch.long)
    return LatentAction(z=zero, index=index, prototype=zero, variability=zero)


@torch.no_grad()
def rollout_episode_frames(
    model: WorldModel,
    frames: torch.Tensor,
    n_seed: int,
    horizon: int,
    action_source: str = "invdyn_reference",
    oracle_actions: Optional[torch.Tensor] = None,
    prototype_script: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> torch.Tensor:
    """Predict ``horizon`` frames after ``n_seed`` observed ones.

    frames: (T, 3, H, W) with T >= n_seed (+ horizon for reference actions).
    Returns decoded predictions (horizon, 3, H, W) clipped to [0, 1].
    """
    if action_source not in ACTION_SOURCES:
        raise ValueError(f"unknown action source {action_source!r}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    need = n_seed + horizon if action_source == "invdyn_reference" else n_seed
    if frames.shape[0] < need:
        raise ValueError(f"episode too short: {frames.shape[0]} frames < {need} required")

    if action_source == "invdyn_reference" and model.action_space != "oracle":
        slots_all = model.parser.parse_video(frames[: n_seed + horizon].unsqueeze(0), gen)
        post = model.dynamics.posterior(slots_all.squeeze(0))
        z_all = post.mean[1:] - post.mean[:-1]  # (T-1, [N,] D_z)
        slots_seed = slots_all[:, :n_seed]
    else:
        slots_seed = model.parser.parse_video(frames[:n_seed].unsqueeze(0), gen)
        z_all = None

    seed_actions = []
    for t in range(n_seed - 1):
        seed_actions.append(_action_for_step(model, t, z_all, oracle_actions, prototype_script, slots_seed))
    state = RolloutState.from_seed(slots_seed, seed_actions)

    predictions = []
    current_step = n_seed - 1
    for h in range(horizon):
        action = _action_for_step(
            model, current_step + h, z_all, oracle_actions, prototype_script, slots_seed
        )
        state.append_action(action)
        slot_hist, protos, varis = state.stacked()
        pred = model.predictor(slot_hist, protos, varis)
        state.append_slots(pred)
        predictions.append(pred)

    pred_slots = torch.cat(predictions, dim=0).unsqueeze(0)  # (1, horizon, N, D)
    recon = model.parser.reconstruct_video(pred_slots).squeeze(0)
    return recon.clamp(0.0, 1.0)


def _action_for_step(
    model: WorldModel,
    t: int,
    z_all: Optional[torch.Tensor],
    oracle_actions: Optional[torch.Tensor],
    prototype_script: Optional[Sequence[int]],
    slots_seed: torch.Tensor,
) -> LatentAction:
    if model.action_space == "oracle":
        if oracle_actions is None or t >= len(oracle_actions):
            raise LookupError(f"oracle actions exhausted at step {t}")
        return _eval_action(model, None, oracle_actions[t : t + 1])
    if prototype_script is not None:
        if t >= len(prototype_script):
            raise LookupError(f"action script exhausted at step {t}")
        proto = model.dynamics.codebook.lookup(int(prototype_script[t])).unsqueeze(0)
        if model.dynamics.variant == "object":
            proto = proto.unsqueeze(1).expand(1, slots_seed.shape[2], -1)
        return _eval_action(model, proto.clone(), None)
    if z_all is not None:
        return _eval_action(model, z_all[t].unsqueeze(0), None)
    # Zeroed conditioning.
    shape = (1, slots_seed.shape[2], model.config.dynamics.action_dim)
    if model.dynamics.variant == "scene":
        shape = (1, model.config.dynamics.action_dim)
    return _zero_action(model, torch.zeros(shape))


@torch.no_grad()
def eval_prediction(
    model: WorldModel,
    dataset: EpisodeCache | str | Path,
    n_seed: int = 6,
    horizon: int = 15,
    action_source: str = "invdyn_reference",
    n_episodes: Optional[int] = None,
    seed: int = 0,
    model_id: str = "model",
) -> MetricReport:
    """Roll out every episode and score predictions per step."""
    cache = dataset if isinstance(dataset, EpisodeCache) else EpisodeCache(dataset)
    total = cache.n_episodes if n_episodes is None else min(n_episodes, cache.n_episodes)
    if cache.episode_length < n_seed + horizon:
        raise ValueError(
            f"episodes of length {cache.episode_length} are shorter than seed+horizon={n_seed + horizon}"
        )
    psnr_steps = np.zeros((total, horizon))
    ssim_steps = np.zeros((total, horizon))
    for e in range(total):
        frames = cache.episode_frames(e)
        oracle = torch.from_numpy(cache.agent_actions[e]) if model.action_space == "oracle" else None
        preds = rollout_episode_frames(
            model, frames, n_seed, horizon, action_source, oracle_actions=oracle, seed=seed + e
        )
        target = frames[n_seed : n_seed + horizon]
        for h in range(horizon):
            p = preds[h].numpy()
            t = target[h].numpy()
            psnr_steps[e, h] = psnr(p, t)
            ssim_steps[e, h] = ssim(p, t)
    report = MetricReport(
        model_id=model_id,
        dataset_id=Path(getattr(cache, "path", "memory")).name,
        n_seed=n_seed,
        horizon=horizon,
        action_source=action_source,
        n_episodes=total,
        per_step_psnr=[float(x) for x in psnr_steps.mean(axis=0)],
        per_step_ssim=[float(x) for x in ssim_steps.mean(axis=0)],
        per_episode_psnr=[float(x) for x in psnr_steps.mean(axis=1)],
        per_episode_ssim=[float(x) for x in ssim_steps.mean(axis=1)],
        mean_psnr=float(psnr_steps.mean()),
        mean_ssim=float(ssim_steps.mean()),
    )
    return report


def scaling_study(entries: list[dict], **eval_kwargs) -> list[dict]:
    """Evaluate (n_objects, variant, model, dataset) combinations.

    Each entry: {"n_objects": int, "variant": str, "model": WorldModel,
    "dataset": path_or_cache}. Returns curve rows with mean PSNR/SSIM.
    """
    rows = []
    for entry in entries:
        report = eval_prediction(
            entry["model"],
            entry["dataset"],
            model_id=f"{entry['variant']}_{entry['n_objects']}obj",
            **eval_kwargs,
        )
        rows.append(
            {
                "n_objects": entry["n_objects"],
                "variant": entry["variant"],
                "mean_psnr": report.mean_psnr,
                "mean_ssim": report.mean_ssim,
            }
        )
    return rows


def ablation_table(entries: list[dict], **eval_kwargs) -> list[dict]:
    """Action-representation comparison rows: one per trained variant."""
    rows = []
    for entry in entries:
        report = eval_prediction(
            entry["model"], entry["dataset"], model_id=entry["label"], **eval_kwargs
        )
        rows.append(
            {"label": entry["label"], "mean_psnr": report.mean_psnr, "mean_ssim": report.mean_ssim}
        )
    return rows


def render_segmentation(masks: torch.Tensor | np.ndarray) -> np.ndarray:
    """Per-pixel argmax over slot masks mapped to the fixed palette.

    masks: (N, 1, H, W) or (N, H, W); returns uint8 (H, W, 3).
    """
    if isinstance(masks, torch.Tensor):
        masks = masks.detach().numpy()
    if masks.ndim == 4:
        masks = masks[:, 0]
    labels = masks.argmax(axis=0)
    return SEGMENTATION_PALETTE[labels % len(SEGMENTATION_PALETTE)]


@torch.no_grad()
def segmentation_labels(model: WorldModel, frames: torch.Tensor, seed: int = 0) -> np.ndarray:
    """Argmax slot index per pixel for every frame: (T, H, W) int array."""
    gen = torch.Generator().manual_seed(seed)
    slots = model.parser.parse_video(frames.unsqueeze(0), gen).squeeze(0)
    decoded = model.parser.decode_slots(slots)
    return decoded.masks[:, :, 0].argmax(dim=1).numpy()


def matched_shape_iou(labels: np.ndarray, gt_masks: np.ndarray) -> float:
    """Mean IoU between ground-truth shape masks and best-matched slot regions.

    labels: (T, H, W) slot indices; gt_masks: (T, S, H, W) bool visible-pixel
    masks. The background is excluded: only shape masks enter the matching,
    and slots are assigned one-to-one per frame (Hungarian on IoU).
    """
    t_total, n_shapes = gt_masks.shape[:2]
    n_slots = int(labels.max()) + 1
    ious = []
    for t in range(t_total):
        cost = np.zeros((n_shapes, n_slots))
        for s in range(n_shapes):
            gt = gt_masks[t, s]
            if not gt.any():
                continue
            for k in range(n_slots):
                region = labels[t] == k
                inter = np.logical_and(gt, region).sum()
                union = np.logical_or(gt, region).sum()
                cost[s, k] = inter / union if union else 0.0
        rows, cols = linear_sum_assignment(-cost)
        for s, k in zip(rows, cols):
            if gt_masks[t, s].any():
                ious.append(cost[s, k])
    return float(np.mean(ious)) if ious else 0.0


@torch.no_grad()
def segmentation_iou_on_episode(model: WorldModel, episode: EpisodeRecord, seed: int = 0) -> float:
    frames = _frames_tensor(episode.frames)
    labels = segmentation_labels(model, frames, seed)
    gt = episode_shape_masks(episode)
    return matched_shape_iou(labels, gt)


@torch.no_grad()
def mean_segmentation_iou(
    model: WorldModel, config: GridConfig, seeds: Sequence[int], base_seed: int = 0
) -> float:
    """Segmentation quality over freshly generated episodes (analytic masks)."""
    scores = [
        segmentation_iou_on_episode(model, generate_episode(config, seed=s), seed=base_seed)
        for s in seeds
    ]
    return float(np.mean(scores))


def _centroid(labels: np.ndarray, slot: int) -> Optional[np.ndarray]:
    rows, cols = np.nonzero(labels == slot)
    if rows.size == 0:
        return None
    return np.array([rows.mean(), cols.mean()])


def displacement_consistency(displacements: list[np.ndarray], min_norm: float = 0.25) -> float:
    """Mean pairwise cosine similarity of displacement vectors.

    Near-zero displacements are excluded; fewer than two valid vectors scores 0
    (a static rollout has no direction to be consistent about).
    """
    valid = [d for d in displacements if np.linalg.norm(d) >= min_norm]
    if len(valid) < 2:
        return 0.0
    sims = []
    for i in range(len(valid)):
        for j in range(i + 1, len(valid)):
            a, b = valid[i], valid[j]
            sims.append(float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b))))
    return float(np.mean(sims))


def classify_direction(mean_displacement: np.ndarray, min_norm: float = 0.2) -> str:
    if np.linalg.norm(mean_displacement) < min_norm:
        return "stay"
    dr, dc = mean_displacement
    if abs(dr) >= abs(dc):
        return "down" if dr > 0 else "up"
    return "right" if dc > 0 else "left"


@torch.no_grad()
def prototype_consistency(
    model: WorldModel,
    prototype_index: int,
    seed_frame: torch.Tensor,
    horizon: int = 15,
    seed: int = 0,
) -> dict:
    """Roll out with one fixed prototype (zero variability) and score how
    parallel the controlled object's per-step displacements are.

    The background slot is taken as the largest mask region in the seed frame;
    the tracked object is the largest remaining slot. A vanished object mask
    is reported and scored 0.
    """
    if not 0 <= prototype_index < model.dynamics.codebook.n_prototypes:
        raise ValueError("prototype index out of range")
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    slots = model.parser.parse_step(seed_frame.unsqueeze(0), None, gen)
    n_slots = slots.shape[1]

    proto = model.dynamics.codebook.lookup(prototype_index).unsqueeze(0)
    if model.dynamics.variant == "object":
        proto = proto.unsqueeze(1).expand(1, n_slots, -1).clone()
    zero = torch.zeros_like(proto)
    action = LatentAction(
        z=proto,
        index=torch.full(proto.shape[:-1], prototype_index, dtype=torch.long),
        prototype=proto if model.action_space != "continuous" else zero,
        variability=proto if model.action_space == "continuous" else zero,
    )

    state = RolloutState.from_seed(slots.unsqueeze(1))
    slot_seq = [slots]
    for _ in range(horizon):
        state.append_action(action)
        hist, protos, varis = state.stacked()
        pred = model.predictor(hist, protos, varis)
        state.append_slots(pred)
        slot_seq.append(pred)

    all_slots = torch.cat(slot_seq, dim=0)  # (horizon+1, N, D)
    decoded = model.parser.decode_slots(all_slots)
    labels = decoded.masks[:, :, 0].argmax(dim=1).numpy()  # (T, H, W)

    areas = [(labels[0] == k).sum() for k in range(n_slots)]
    background = int(np.argmax(areas))
    object_slot = int(
        max((k for k in range(n_slots) if k != background), key=lambda k: areas[k])
    )

    centroids = []
    vanished = False
    for t in range(horizon + 1):
        c = _centroid(labels[t], object_slot)
        if c is None:
            vanished = True
            break
        centroids.append(c)
    if vanished or len(centroids) < 3:
        return {
            "prototype": prototype_index,
            "score": 0.0,
            "direction": "vanished",
            "vanished": True,
            "displacements": [],
        }
    displacements = [centroids[i + 1] - centroids[i] for i in range(len(centroids) - 1)]
    score = displacement_consistency(displacements)
    mean_disp = np.mean(displacements, axis=0)
    return {
        "prototype": prototype_index,
        "score": score,
        "direction": classify_direction(mean_disp),
        "vanished": False,
        "displacements": [d.tolist() for d in displacements],
        "mean_displacement": mean_disp.tolist(),
    }
