"""Pydantic request/response models for the play API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class EpisodeRef(BaseModel):
    dataset_dir: str
    episode_id: int = 0
    n_seed_frames: int = Field(default=1, ge=1)


class CreateSessionRequest(BaseModel):
    mode: Literal["user", "policy", "reference"]
    checkpoint_id: str
    seed: int = 0
    seed_frame_b64: Optional[str] = None
    episode: Optional[EpisodeRef] = None


class CodebookSummary(BaseModel):
    k: int
    d_z: int
    usage: list[int]


class SessionDescriptor(BaseModel):
    session_id: str
    mode: str
    checkpoint_id: str
    step_index: int
    created_at: float
    updated_at: float
    action_log: list[dict]


class CreateSessionResponse(BaseModel):
    session_id: str
    mode: str
    checkpoint_id: str
    step_index: int
    codebook: CodebookSummary
    frame_b64: str
    segmentation_b64: str


class StepRequest(BaseModel):
    prototype_index: Optional[int] = None
    variability: Optional[list[float]] = None
    mode_override: Optional[Literal["user", "policy", "reference"]] = None


class StepResponse(BaseModel):
    step_index: int
    prototype_index: int
    variability: list[float]
    frame_b64: str
    segmentation_b64: str
    compute_ms: float


class CodebookResponse(BaseModel):
    k: int
    d_z: int
    prototypes: list[list[float]]
    usage_counts: list[int]
    labels: dict[str, str]


class LabelsRequest(BaseModel):
    labels: dict[str, str]


class ErrorBody(BaseModel):
    code: str
    message: str
