"""The full model bundle and its self-describing checkpoint format.

A checkpoint is a zip archive holding ``config.json`` (format version, trained
stages, all hyperparameters) and one ``params/<name>.npy`` per parameter or
buffer. Loading rebuilds the model from the embedded config and verifies
every array shape, raising named errors on version or shape mismatches.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .config import WorldConfig
from .invdyn import InverseDynamics
from .parser import SceneParser
from .policy import ActionDecoder, LatentPolicy
from .predictor import SlotPredictor

CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


ACTION_SPACES = ("hybrid", "continuous", "discrete", "oracle")


class WorldModel(nn.Module):
    """Scene parser + inverse dynamics + conditional predictor (+ policy head).

    ``action_space`` selects how the predictor is conditioned: the default
    hybrid prototype+variability factorization, continuous-only latents,
    discrete-only prototypes, or an oracle embedding of ground-truth actions.
    """

    def __init__(self, config: WorldConfig, with_policy: bool = False, action_space: str = "hybrid"):
        super().__init__()
        if action_space not in ACTION_SPACES:
            raise ValueError(f"unknown action space {action_space!r}")
        self.config = config
        self.action_space = action_space
        self.parser = SceneParser(config.parser)
        self.dynamics = InverseDynamics(config.parser.slot_dim, config.dynamics)
        self.predictor = SlotPredictor(
            config.parser.slot_dim, config.dynamics.action_dim, config.predictor
        )
        self.policy: Optional[LatentPolicy] = None
        self.action_decoder: Optional[ActionDecoder] = None
        self.oracle_embed: Optional[nn.Embedding] = None
        if action_space == "oracle":
            self.oracle_embed = nn.Embedding(config.policy.n_env_actions, config.dynamics.action_dim)
        if with_policy:
            self.add_policy()
        self.trained_stages: list[str] = []

    def add_policy(self) -> None:
        if self.policy is None:
            self.policy = LatentPolicy(
                self.config.parser.slot_dim, self.config.dynamics.action_dim, self.config.policy
            )
            self.action_decoder = ActionDecoder(self.config.dynamics.action_dim, self.config.policy)

    def freeze_parser(self) -> None:
        for p in self.parser.parameters():
            p.requires_grad_(False)

    def dynamics_parameters(self):
        yield from self.dynamics.parameters()
        yield from self.predictor.parameters()
        if self.oracle_embed is not None:
            yield from self.oracle_embed.parameters()

    def policy_parameters(self):
        assert self.policy is not None and self.action_decoder is not None
        yield from self.policy.parameters()
        yield from self.action_decoder.parameters()


def save_checkpoint(path: str | Path, model: WorldModel, extra: Optional[dict] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": "world_model",
        "with_policy": model.policy is not None,
        "action_space": model.action_space,
        "trained_stages": model.trained_stages,
        "config": model.config.to_dict(),
    }
    if extra:
        meta["extra"] = extra
    state = model.state_dict()
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("config.json", json.dumps(meta, indent=2))
        for name, tensor in state.items():
            buf = io.BytesIO()
            np.save(buf, tensor.detach().cpu().numpy())
            zf.writestr(f"params/{name}.npy", buf.getvalue())


def read_checkpoint_meta(path: str | Path) -> dict:
    with zipfile.ZipFile(path) as zf:
        with zf.open("config.json") as f:
            meta = json.load(f)
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {meta.get('version')} != supported {CHECKPOINT_VERSION}"
        )
    return meta


def load_checkpoint(path: str | Path) -> WorldModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    meta = read_checkpoint_meta(path)
    config = WorldConfig.from_dict(meta["config"])
    model = WorldModel(
        config,
        with_policy=meta.get("with_policy", False),
        action_space=meta.get("action_space", "hybrid"),
    )
    model.trained_stages = list(meta.get("trained_stages", []))
    state = model.state_dict()
    loaded = {}
    with zipfile.ZipFile(path) as zf:
        for name in state:
            arr_name = f"params/{name}.npy"
            try:
                with zf.open(arr_name) as f:
                    arr = np.load(io.BytesIO(f.read()))
            except KeyError as exc:
                raise CheckpointShapeError(f"checkpoint missing parameter {name}") from exc
            if tuple(arr.shape) != tuple(state[name].shape):
                raise CheckpointShapeError(
                    f"parameter {name}: checkpoint shape {tuple(arr.shape)} != model {tuple(state[name].shape)}"
                )
            loaded[name] = torch.from_numpy(arr).to(state[name].dtype)
    model.load_state_dict(loaded)
    model.eval()
    return model
