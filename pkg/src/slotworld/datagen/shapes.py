"""Grid world with bouncing 2D shapes: state, stochastic dynamics, rasterization.

All randomness flows through an explicit numpy Generator so that every episode
is a pure function of (config, seed). Colors are quantized to 8-bit fractions
at sampling time, which makes float frames round-trip losslessly through PNG.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

SHAPE_KINDS = ("ball", "triangle", "square")

# Moves as (d_row, d_col); row 0 is the top of the image, so "down" increases row.
MOVES = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
    "stay": (0, 0),
}
MOVE_NAMES = tuple(MOVES)

_REVERSE = {"up": "down", "down": "up", "left": "right", "right": "left", "stay": "stay"}

GOAL_MARKER_COLOR = (230 / 255.0, 46 / 255.0, 46 / 255.0)


def reverse_move(move: str) -> str:
    return _REVERSE[move]


def quantize_color(color: Sequence[float]) -> tuple[float, float, float]:
    """Snap an RGB triple to exact 8-bit fractions (n/255)."""
    return tuple(float(np.round(c * 255.0) / 255.0) for c in color)


@dataclass(frozen=True)
class ShapeState:
    """One shape on the grid: kind, color, integer cell position, discrete velocity."""

    kind: str
    color: tuple[float, float, float]
    position: tuple[int, int]  # (row, col) grid cell
    velocity: str  # one of MOVE_NAMES
    size: int  # pixels per shape edge

    def __post_init__(self) -> None:
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.velocity not in MOVES:
            raise ValueError(f"unknown velocity {self.velocity!r}")


@dataclass(frozen=True)
class GridConfig:
    """Generator settings for a shapes-on-a-grid video world.

    ``goal_marker`` is either a fixed (row, col) cell, the string "random"
    (a fresh goal cell is drawn per episode), or None for plain worlds.
    """

    image_size: int = 64
    grid_step: int = 8
    n_shapes: int = 2
    direction_change_prob: float = 0.25
    episode_length: int = 24
    background_color: tuple[float, float, float] = quantize_color((0.2, 0.3, 0.4))
    shape_size: Optional[int] = None  # defaults to grid_step
    goal_marker: Union[tuple[int, int], str, None] = None
    min_goal_distance: int = 4
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_shapes < 1:
            raise ValueError("n_shapes must be >= 1")
        if self.episode_length < 2:
            raise ValueError("episode_length must be >= 2")
        if not 0.0 <= self.direction_change_prob <= 1.0:
            raise ValueError("direction_change_prob must lie in [0, 1]")
        if self.image_size % self.grid_step != 0:
            raise ValueError("image_size must be a multiple of grid_step")
        if self.n_cells < 2:
            raise ValueError("grid must be at least 2 cells wide for bouncing")
        if self.size > self.image_size:
            raise ValueError("shape_size cannot exceed image_size")
        object.__setattr__(self, "background_color", quantize_color(self.background_color))
        if isinstance(self.goal_marker, tuple):
            r, c = self.goal_marker
            if not (0 <= r < self.n_cells and 0 <= c < self.n_cells):
                raise ValueError("goal_marker cell out of bounds")

    @property
    def n_cells(self) -> int:
        return self.image_size // self.grid_step

    @property
    def size(self) -> int:
        return self.shape_size if self.shape_size is not None else self.grid_step

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "grid_step": self.grid_step,
            "n_shapes": self.n_shapes,
            "direction_change_prob": self.direction_change_prob,
            "episode_length": self.episode_length,
            "background_color": list(self.background_color),
            "shape_size": self.shape_size,
            "goal_marker": list(self.goal_marker) if isinstance(self.goal_marker, tuple) else self.goal_marker,
            "min_goal_distance": self.min_goal_distance,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        data = dict(data)
        goal = data.get("goal_marker")
        if isinstance(goal, list):
            data["goal_marker"] = (int(goal[0]), int(goal[1]))
        bg = data.get("background_color")
        if bg is not None:
            data["background_color"] = tuple(bg)
        return cls(**data)


def sample_color(
    rng: np.random.Generator,
    background: Sequence[float],
    avoid: Sequence[Sequence[float]] = (),
) -> tuple[float, float, float]:
    """Draw an 8-bit-exact color with L-inf contrast >= 0.25 against the
    background and every color in ``avoid``."""
    references = [np.asarray(background)] + [np.asarray(a) for a in avoid]
    while True:
        color = rng.integers(0, 256, size=3) / 255.0
        if all(np.max(np.abs(color - ref)) >= 0.25 for ref in references):
            return tuple(float(c) for c in color)


def sample_initial_state(config: GridConfig, rng: np.random.Generator) -> list[ShapeState]:
    """Independent uniform cells and velocities; shapes may share a cell.

    Worlds with a goal marker keep shape colors away from the marker color so
    the marker stays visually identifiable.
    """
    avoid = [GOAL_MARKER_COLOR] if config.goal_marker is not None else []
    shapes = []
    for _ in range(config.n_shapes):
        kind = SHAPE_KINDS[rng.integers(0, len(SHAPE_KINDS))]
        color = sample_color(rng, config.background_color, avoid)
        position = (int(rng.integers(0, config.n_cells)), int(rng.integers(0, config.n_cells)))
        velocity = MOVE_NAMES[rng.integers(0, len(MOVE_NAMES))]
        shapes.append(ShapeState(kind=kind, color=color, position=position, velocity=velocity, size=config.size))
    return shapes


def _in_bounds(position: tuple[int, int], n_cells: int) -> bool:
    return 0 <= position[0] < n_cells and 0 <= position[1] < n_cells


def apply_move(state: ShapeState, move: str, n_cells: int) -> ShapeState:
    """Advance one step with the given move, bouncing off the boundary.

    Returns the new state; its velocity equals the move actually applied, so a
    recorded move sequence replays the trajectory exactly.
    """
    dr, dc = MOVES[move]
    target = (state.position[0] + dr, state.position[1] + dc)
    if not _in_bounds(target, n_cells):
        move = reverse_move(move)
        dr, dc = MOVES[move]
        target = (state.position[0] + dr, state.position[1] + dc)
    return replace(state, position=target, velocity=move)


def step_dynamics(
    state: Sequence[ShapeState],
    config: GridConfig,
    rng: np.random.Generator,
) -> tuple[list[ShapeState], list[str]]:
    """One stochastic step for every shape.

    Each shape independently resamples its velocity with probability
    ``direction_change_prob`` (uniform over all five moves, current one
    included), then advances one grid step, reversing direction when the step
    would leave the grid. Returns the new states and the applied move names.
    """
    new_states = []
    moves = []
    for shape in state:
        velocity = shape.velocity
        if rng.random() < config.direction_change_prob:
            velocity = MOVE_NAMES[rng.integers(0, len(MOVE_NAMES))]
        stepped = apply_move(replace(shape, velocity=velocity), velocity, config.n_cells)
        new_states.append(stepped)
        moves.append(stepped.velocity)
    return new_states, moves


def shape_stencil(kind: str, size: int) -> np.ndarray:
    """Boolean (size, size) footprint of a shape, integer-exact."""
    idx = np.arange(size)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    if kind == "square":
        return np.ones((size, size), dtype=bool)
    if kind == "ball":
        dx = 2 * jj - (size - 1)
        dy = 2 * ii - (size - 1)
        return dx * dx + dy * dy <= size * size
    if kind == "triangle":
        return np.abs(2 * jj - (size - 1)) <= ii + 1
    raise ValueError(f"unknown shape kind {kind!r}")


def _cell_origin(position: tuple[int, int], config: GridConfig) -> tuple[int, int]:
    """Top-left pixel of the shape's box, centered on its cell.

    Shapes larger than grid_step extend past the cell and are clipped at the
    frame border by the paint helpers.
    """
    off = (config.grid_step - config.size) // 2
    return position[0] * config.grid_step + off, position[1] * config.grid_step + off


def _paint(target: np.ndarray, stencil: np.ndarray, origin: tuple[int, int], value) -> None:
    """Write ``value`` where the stencil is set, clipping to the target bounds."""
    size = stencil.shape[0]
    h, w = target.shape[:2]
    r0, c0 = origin
    r_lo, r_hi = max(r0, 0), min(r0 + size, h)
    c_lo, c_hi = max(c0, 0), min(c0 + size, w)
    if r_lo >= r_hi or c_lo >= c_hi:
        return
    window = stencil[r_lo - r0 : r_hi - r0, c_lo - c0 : c_hi - c0]
    region = target[r_lo:r_hi, c_lo:c_hi]
    region[window] = value


def _draw_goal_marker(frame: np.ndarray, cell: tuple[int, int], config: GridConfig) -> None:
    # Plus-shaped marker spanning two grid steps, centered on the goal cell;
    # visually distinct from all three shape kinds and clipped at the border.
    step = config.grid_step
    span = 2 * step
    center_r = cell[0] * step + step // 2
    center_c = cell[1] * step + step // 2
    r0, c0 = center_r - span // 2, center_c - span // 2
    arm = max(step // 2, 2)
    color = np.asarray(quantize_color(GOAL_MARKER_COLOR), dtype=frame.dtype)
    h, w = frame.shape[:2]

    def fill(r_lo, r_hi, c_lo, c_hi):
        frame[max(r_lo, 0) : min(r_hi, h), max(c_lo, 0) : min(c_hi, w)] = color

    mid_r = center_r - arm // 2
    mid_c = center_c - arm // 2
    fill(r0, r0 + span, mid_c, mid_c + arm)
    fill(mid_r, mid_r + arm, c0, c0 + span)


def render_frame(state: Sequence[ShapeState], config: GridConfig) -> np.ndarray:
    """Rasterize to a float32 (H, W, 3) image in [0, 1].

    Deterministic: background, then the goal marker if configured, then shapes
    in index order (later indices painted on top).
    """
    size = config.image_size
    frame = np.empty((size, size, 3), dtype=np.float32)
    frame[:] = np.asarray(config.background_color, dtype=np.float32)
    if isinstance(config.goal_marker, tuple):
        _draw_goal_marker(frame, config.goal_marker, config)
    for shape in state:
        stencil = shape_stencil(shape.kind, shape.size)
        origin = _cell_origin(shape.position, config)
        _paint(frame, stencil, origin, np.asarray(shape.color, dtype=np.float32))
    return frame


def render_shape_masks(state: Sequence[ShapeState], config: GridConfig) -> np.ndarray:
    """Visible-pixel masks per shape, bool (n_shapes, H, W); occluders win."""
    size = config.image_size
    masks = np.zeros((len(state), size, size), dtype=bool)
    for i, shape in enumerate(state):
        stencil = shape_stencil(shape.kind, shape.size)
        origin = _cell_origin(shape.position, config)
        _paint(masks[i], stencil, origin, True)
    # Later shapes are drawn on top; erase occluded pixels of earlier ones.
    for i in range(len(state)):
        for j in range(i + 1, len(state)):
            masks[i] &= ~masks[j]
    return masks
