"""Session store: per-session rollout state with serialized stepping and TTL expiry.

Model parameters are immutable after load and shared read-only across
sessions; each session owns its rollout state and a non-blocking lock so
overlapping step requests on the same session are rejected rather than queued.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import torch

from ..models.codebook import LatentAction
from ..models.predictor import RolloutState
from ..models.world import WorldModel


class SessionError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


@dataclass
class PlaySession:
    session_id: str
    checkpoint_id: str
    mode: str
    seed: int
    model: WorldModel
    rollout: RolloutState
    current_slots: torch.Tensor
    reference_actions: Optional[list[LatentAction]] = None
    action_log: list[dict] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def step_index(self) -> int:
        return self.rollout.steps_predicted

    def touch(self) -> None:
        self.updated_at = time.time()


class SessionStore:
    def __init__(self, ttl_s: float = 3600.0):
        self.ttl_s = ttl_s
        self._sessions: dict[str, PlaySession] = {}
        self._guard = threading.Lock()

    def create(self, session: PlaySession) -> None:
        with self._guard:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> PlaySession:
        self.sweep()
        with self._guard:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError("unknown_session", f"no session {session_id}", status=404)
        return session

    def delete(self, session_id: str) -> None:
        with self._guard:
            if session_id not in self._sessions:
                raise SessionError("unknown_session", f"no session {session_id}", status=404)
            del self._sessions[session_id]

    def sweep(self) -> None:
        now = time.time()
        with self._guard:
            expired = [sid for sid, s in self._sessions.items() if now - s.updated_at > self.ttl_s]
            for sid in expired:
                del self._sessions[sid]

    def __len__(self) -> int:
        return len(self._sessions)


def new_session_id() -> str:
    return uuid.uuid4().hex[:16]
