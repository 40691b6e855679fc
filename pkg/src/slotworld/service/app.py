"""HTTP/JSON play API: steer rollouts step by step.

Actions can be chosen by the user (prototype index + optional variability),
generated by the trained latent policy, or drawn from a reference episode
whose transitions were annotated by the inverse dynamics at session creation.
Frames travel as base64 PNG; errors are JSON {code, message}.
"""

from __future__ import annotations

import base64
import io
import json
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image

from ..evaluation.harness import render_segmentation
from ..models.codebook import LatentAction
from ..models.predictor import RolloutState
from ..models.world import WorldModel, load_checkpoint
from ..training.data import EpisodeCache
from .config import ServiceConfig
from .schemas import (
    CodebookResponse,
    CodebookSummary,
    CreateSessionRequest,
    CreateSessionResponse,
    LabelsRequest,
    SessionDescriptor,
    StepRequest,
    StepResponse,
)
from .sessions import PlaySession, SessionError, SessionStore, new_session_id


def png_b64(image: np.ndarray) -> str:
    """uint8 (H, W, 3) -> base64 PNG string."""
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def frame_to_png_b64(frame: torch.Tensor) -> str:
    """(3, H, W) float frame in [0,1] -> base64 PNG."""
    arr = np.round(frame.clamp(0, 1).permute(1, 2, 0).numpy() * 255.0).astype(np.uint8)
    return png_b64(arr)


def decode_png_b64(data: str, image_size: int) -> torch.Tensor:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(data))).convert("RGB")
    except Exception as exc:
        raise SessionError("malformed_frame", f"could not decode seed frame: {exc}") from exc
    if img.size != (image_size, image_size):
        raise SessionError(
            "malformed_frame", f"seed frame must be {image_size}x{image_size}, got {img.size}"
        )
    arr = np.asarray(img).astype(np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


class ModelRegistry:
    """Loads checkpoints lazily by id from the checkpoint directory."""

    def __init__(self, checkpoint_dir: str | Path):
        self.checkpoint_dir = Path(checkpoint_dir)
        self._cache: dict[str, WorldModel] = {}

    def path_for(self, checkpoint_id: str) -> Path:
        return self.checkpoint_dir / f"{checkpoint_id}.ckpt"

    def sidecar(self, checkpoint_id: str, suffix: str) -> Path:
        return self.checkpoint_dir / f"{checkpoint_id}.{suffix}.json"

    def get(self, checkpoint_id: str) -> WorldModel:
        if checkpoint_id not in self._cache:
            path = self.path_for(checkpoint_id)
            if not path.exists():
                raise SessionError("unknown_checkpoint", f"no checkpoint {checkpoint_id}", status=404)
            model = load_checkpoint(path)
            model.eval()
            for p in model.parameters():
                p.requires_grad_(False)
            self._cache[checkpoint_id] = model
        return self._cache[checkpoint_id]


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig.load()
    app = FastAPI(title="slotworld play service")
    registry = ModelRegistry(config.checkpoint_dir)
    store = SessionStore(ttl_s=config.session_ttl_s)
    app.state.config = config
    app.state.registry = registry
    app.state.sessions = store

    @app.exception_handler(SessionError)
    async def session_error_handler(request: Request, exc: SessionError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_request", "message": str(exc.errors()[:2])}
        )

    def decode_current(session: PlaySession) -> tuple[str, str]:
        decoded = session.model.parser.decode_slots(session.current_slots)
        frame = frame_to_png_b64(decoded.reconstruction[0])
        seg = png_b64(render_segmentation(decoded.masks[0]))
        return frame, seg

    def codebook_summary(model: WorldModel) -> CodebookSummary:
        cb = model.dynamics.codebook
        return CodebookSummary(k=cb.n_prototypes, d_z=cb.dim, usage=cb.usage.tolist())

    @app.post("/v1/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(req: CreateSessionRequest):
        model = registry.get(req.checkpoint_id)
        if req.mode == "policy" and model.policy is None:
            raise SessionError("unknown_mode", "checkpoint has no trained policy head")
        gen = torch.Generator().manual_seed(req.seed)
        reference_actions = None
        if req.mode == "reference":
            if req.episode is None:
                raise SessionError("invalid_request", "reference mode needs an episode reference")
            cache = EpisodeCache(req.episode.dataset_dir)
            if not 0 <= req.episode.episode_id < cache.n_episodes:
                raise SessionError("invalid_request", "episode_id out of range", status=404)
            frames = cache.episode_frames(req.episode.episode_id)
            n_seed = min(req.episode.n_seed_frames, frames.shape[0])
            with torch.no_grad():
                all_slots = model.parser.parse_video(frames.unsqueeze(0), gen)
                post = model.dynamics.posterior(all_slots.squeeze(0))
                z_all = post.mean[1:] - post.mean[:-1]
            reference_actions = [
                _eval_latent(model, z_all[t].unsqueeze(0)) for t in range(z_all.shape[0])
            ]
            seed_slots = all_slots[:, :n_seed]
            rollout_state = RolloutState.from_seed(
                seed_slots, reference_actions[: n_seed - 1] if n_seed > 1 else None
            )
            # Remaining reference actions feed subsequent steps.
            session_actions = reference_actions[n_seed - 1 :]
            current = seed_slots[:, -1]
        else:
            if req.seed_frame_b64 is None:
                raise SessionError("invalid_request", f"{req.mode} mode needs seed_frame_b64")
            frame = decode_png_b64(req.seed_frame_b64, model.config.parser.image_size)
            with torch.no_grad():
                current = model.parser.parse_step(frame.unsqueeze(0), None, gen)
            rollout_state = RolloutState.from_seed(current.unsqueeze(1))
            session_actions = None

        session = PlaySession(
            session_id=new_session_id(),
            checkpoint_id=req.checkpoint_id,
            mode=req.mode,
            seed=req.seed,
            model=model,
            rollout=rollout_state,
            current_slots=current,
            reference_actions=session_actions,
        )
        store.create(session)
        frame_b64, seg_b64 = decode_current(session)
        return CreateSessionResponse(
            session_id=session.session_id,
            mode=session.mode,
            checkpoint_id=session.checkpoint_id,
            step_index=0,
            codebook=codebook_summary(model),
            frame_b64=frame_b64,
            segmentation_b64=seg_b64,
        )

    @app.post("/v1/sessions/{session_id}/step", response_model=StepResponse)
    def step_session(session_id: str, req: StepRequest):
        session = store.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise SessionError(
                "session_busy", "a step is already in flight; retry after it returns", status=409
            )
        try:
            t0 = time.perf_counter()
            mode = req.mode_override or session.mode
            model = session.model
            cb = model.dynamics.codebook
            if mode == "user":
                if req.prototype_index is None:
                    raise SessionError("invalid_request", "user mode requires prototype_index")
                if not 0 <= req.prototype_index < cb.n_prototypes:
                    raise SessionError(
                        "invalid_request",
                        f"prototype_index must lie in [0, {cb.n_prototypes})",
                    )
                variability = torch.zeros(cb.dim)
                if req.variability is not None:
                    if len(req.variability) != cb.dim:
                        raise SessionError(
                            "invalid_request", f"variability must have length {cb.dim}"
                        )
                    variability = torch.tensor(req.variability, dtype=torch.float32)
                    norm = float(variability.norm())
                    max_norm = app.state.config.max_variability_norm
                    if norm > max_norm:
                        variability = variability * (max_norm / norm)
                action = _user_action(model, req.prototype_index, variability)
                chosen = req.prototype_index
                eps_out = variability.tolist()
            elif mode == "policy":
                if req.prototype_index is not None or req.variability is not None:
                    raise SessionError("invalid_request", "policy mode accepts no action fields")
                if model.policy is None:
                    raise SessionError("unknown_mode", "checkpoint has no trained policy head")
                with torch.no_grad():
                    z = model.policy(session.current_slots)
                action = _eval_latent(model, z)
                chosen = int(action.index.reshape(-1)[0])
                eps_out = action.variability.reshape(-1).tolist()
            elif mode == "reference":
                if req.prototype_index is not None or req.variability is not None:
                    raise SessionError("invalid_request", "reference mode accepts no action fields")
                if not session.reference_actions:
                    raise SessionError("reference_exhausted", "reference episode exhausted", status=409)
                action = session.reference_actions.pop(0)
                chosen = int(action.index.reshape(-1)[0])
                eps_out = action.variability.reshape(-1).tolist()
            else:
                raise SessionError("unknown_mode", f"unsupported mode {mode}")

            with torch.no_grad():
                session.rollout.append_action(action)
                hist, protos, varis = session.rollout.stacked()
                pred = model.predictor(hist, protos, varis)
                session.rollout.append_slots(pred)
                session.rollout.steps_predicted += 1
                session.current_slots = pred
            session.action_log.append(
                {"step": session.step_index, "mode": mode, "prototype_index": chosen, "variability": eps_out}
            )
            session.touch()
            frame_b64, seg_b64 = decode_current(session)
            return StepResponse(
                step_index=session.step_index,
                prototype_index=chosen,
                variability=eps_out,
                frame_b64=frame_b64,
                segmentation_b64=seg_b64,
                compute_ms=round((time.perf_counter() - t0) * 1000.0, 3),
            )
        finally:
            session.lock.release()

    @app.get("/v1/sessions/{session_id}", response_model=SessionDescriptor)
    def get_session(session_id: str):
        session = store.get(session_id)
        return SessionDescriptor(
            session_id=session.session_id,
            mode=session.mode,
            checkpoint_id=session.checkpoint_id,
            step_index=session.step_index,
            created_at=session.created_at,
            updated_at=session.updated_at,
            action_log=session.action_log,
        )

    @app.delete("/v1/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)

    @app.get("/v1/codebooks/{checkpoint_id}", response_model=CodebookResponse)
    def get_codebook(checkpoint_id: str):
        model = registry.get(checkpoint_id)
        cb = model.dynamics.codebook
        usage = cb.usage.tolist()
        usage_file = registry.sidecar(checkpoint_id, "usage")
        if usage_file.exists():
            data = json.loads(usage_file.read_text())
            usage = [int(data.get(str(k), 0)) for k in range(cb.n_prototypes)]
        labels_file = registry.sidecar(checkpoint_id, "labels")
        labels = json.loads(labels_file.read_text()) if labels_file.exists() else {}
        return CodebookResponse(
            k=cb.n_prototypes,
            d_z=cb.dim,
            prototypes=[p.tolist() for p in cb.prototypes],
            usage_counts=usage,
            labels=labels,
        )

    @app.put("/v1/codebooks/{checkpoint_id}/labels")
    def put_labels(checkpoint_id: str, req: LabelsRequest):
        model = registry.get(checkpoint_id)
        cb = model.dynamics.codebook
        for key in req.labels:
            if not 0 <= int(key) < cb.n_prototypes:
                raise SessionError("invalid_request", f"label index {key} out of range")
        labels_file = registry.sidecar(checkpoint_id, "labels")
        existing = json.loads(labels_file.read_text()) if labels_file.exists() else {}
        existing.update(req.labels)
        labels_file.parent.mkdir(parents=True, exist_ok=True)
        labels_file.write_text(json.dumps(existing, indent=2, sort_keys=True))
        return {"labels": existing}

    @app.get("/v1/palette")
    def get_palette():
        from ..evaluation.harness import SEGMENTATION_PALETTE

        return {"palette": SEGMENTATION_PALETTE.tolist()}

    return app


def _eval_latent(model: WorldModel, z: torch.Tensor) -> LatentAction:
    """Quantize a latent according to the model's action space (no gradients)."""
    cb = model.dynamics.codebook
    index = cb.nearest(z)
    proto = cb.lookup(index)
    if model.action_space == "continuous":
        return LatentAction(z=z, index=index, prototype=torch.zeros_like(z), variability=z)
    if model.action_space == "discrete":
        return LatentAction(z=proto, index=index, prototype=proto, variability=torch.zeros_like(proto))
    return LatentAction(z=z, index=index, prototype=proto, variability=z - proto)


def _user_action(model: WorldModel, prototype_index: int, variability: torch.Tensor) -> LatentAction:
    cb = model.dynamics.codebook
    proto = cb.lookup(prototype_index).unsqueeze(0)
    eps = variability.unsqueeze(0)
    if model.dynamics.variant == "object":
        n_slots = model.config.parser.n_slots
        proto = proto.unsqueeze(1).expand(1, n_slots, -1).clone()
        eps = eps.unsqueeze(1).expand(1, n_slots, -1).clone()
    index = torch.full(proto.shape[:-1], prototype_index, dtype=torch.long)
    if model.action_space == "continuous":
        z = proto + eps
        return LatentAction(z=z, index=index, prototype=torch.zeros_like(z), variability=z)
    return LatentAction(z=proto + eps, index=index, prototype=proto, variability=eps)
