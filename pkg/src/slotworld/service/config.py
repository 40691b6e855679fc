"""Service configuration: file-based with environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

ENV_PREFIX = "SLOTWORLD_"


@dataclass
class ServiceConfig:
    checkpoint_dir: str = "checkpoints"
    host: str = "127.0.0.1"
    port: int = 8023
    session_ttl_s: float = 3600.0
    max_variability_norm: float = 3.0

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "ServiceConfig":
        data: dict = {}
        if path is not None:
            text = Path(path).read_text()
            data = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) else json.loads(text)
        env_map = {
            "checkpoint_dir": (str, ENV_PREFIX + "CHECKPOINT_DIR"),
            "host": (str, ENV_PREFIX + "HOST"),
            "port": (int, ENV_PREFIX + "PORT"),
            "session_ttl_s": (float, ENV_PREFIX + "SESSION_TTL"),
            "max_variability_norm": (float, ENV_PREFIX + "MAX_VARIABILITY_NORM"),
        }
        for key, (cast, env) in env_map.items():
            if env in os.environ:
                data[key] = cast(os.environ[env])
        return cls(**data)
