"""Recurrent slot-based scene parser and renderer.

Parses a frame sequence into per-object slots with iterative slot attention
and decodes slots back to object images, masks and reconstructed frames with
a spatial broadcast decoder. Slots are carried across frames through a
single-layer transformer transition module and refined against each new
frame's features, so slot order binds object identity over time.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ParserConfig
from .layers import SoftPositionEmbed, TransformerBlock, coordinate_grid


class DecodedObjects(NamedTuple):
    objects: torch.Tensor  # (B, N, 3, H, W) per-slot RGB
    mask_logits: torch.Tensor  # (B, N, 1, H, W)
    masks: torch.Tensor  # (B, N, 1, H, W), softmax over the slot axis
    reconstruction: torch.Tensor  # (B, 3, H, W)


class FrameEncoder(nn.Module):
    """CNN feature extractor with a soft position embedding and a shared MLP head."""

    def __init__(self, config: ParserConfig):
        super().__init__()
        enc = config.encoder
        k, pad = enc.kernel_size, enc.kernel_size // 2
        layers: list[nn.Module] = []
        in_ch = 3
        for i, stride in enumerate(enc.strides):
            layers.append(nn.Conv2d(in_ch, enc.channels, k, stride=stride, padding=pad))
            if i < len(enc.strides) - 1:
                layers.append(nn.ReLU())
            in_ch = enc.channels
        self.cnn = nn.Sequential(*layers)
        self.image_size = config.image_size
        down = 1
        for stride in enc.strides:
            down *= stride
        self.feature_size = config.image_size // down
        self.pos_embed = SoftPositionEmbed(enc.channels, self.feature_size, self.feature_size)
        self.norm = nn.LayerNorm(enc.channels)
        self.head = nn.Sequential(
            nn.Linear(enc.channels, enc.channels),
            nn.ReLU(),
            nn.Linear(enc.channels, enc.feature_dim),
        )

    @property
    def n_locations(self) -> int:
        return self.feature_size * self.feature_size

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, L, feature_dim)."""
        if frames.shape[-2:] != (self.image_size, self.image_size):
            raise ValueError(
                f"expected {self.image_size}x{self.image_size} frames, got {tuple(frames.shape[-2:])}"
            )
        h = self.cnn(frames)  # (B, C, h, w)
        h = h.permute(0, 2, 3, 1)  # (B, h, w, C)
        h = self.pos_embed(h)
        h = h.flatten(1, 2)  # (B, L, C)
        return self.head(self.norm(h))


class SlotInitializer(nn.Module):
    """Gaussian slot initializer with learned mean and softplus-positive scale.

    ``per_slot=False`` shares one mean across slots (the reference setup);
    ``per_slot=True`` learns one mean per slot, which permanently breaks the
    slot symmetry and speeds up object discovery at small step budgets.
    """

    def __init__(self, slot_dim: int, n_slots: int = 1, per_slot: bool = False):
        super().__init__()
        rows = n_slots if per_slot else 1
        self.per_slot = per_slot
        self.mean = nn.Parameter(torch.zeros(rows, slot_dim))
        self.raw_scale = nn.Parameter(torch.zeros(slot_dim))
        nn.init.normal_(self.mean, std=0.5 if per_slot else 0.02)

    def sample(
        self, batch: int, n_slots: int, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        if self.per_slot and n_slots != self.mean.shape[0]:
            raise ValueError(f"initializer holds {self.mean.shape[0]} slot means, asked for {n_slots}")
        noise = torch.randn(
            batch, n_slots, self.mean.shape[-1], generator=generator, dtype=self.mean.dtype
        )
        return self.mean + F.softplus(self.raw_scale) * noise


class SlotAttention(nn.Module):
    """Iterative attention that routes feature locations into competing slots."""

    def __init__(self, config: ParserConfig):
        super().__init__()
        dim = config.slot_dim
        feat = config.encoder.feature_dim
        self.scale = dim**-0.5
        self.norm_inputs = nn.LayerNorm(feat)
        self.norm_slots = nn.LayerNorm(dim)
        self.norm_mlp = nn.LayerNorm(dim)
        self.project_q = nn.Linear(dim, dim, bias=False)
        self.project_k = nn.Linear(feat, dim, bias=False)
        self.project_v = nn.Linear(feat, dim, bias=False)
        self.gru = nn.GRUCell(dim, dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, config.slot_hidden), nn.ReLU(), nn.Linear(config.slot_hidden, dim)
        )
        self.eps = 1e-8

    def attention(self, slots: torch.Tensor, features: torch.Tensor) -> torch.Tensor:
        """Raw attention, softmax over the slot axis per location: (B, N, L)."""
        inputs = self.norm_inputs(features)
        q = self.project_q(self.norm_slots(slots))
        k = self.project_k(inputs)
        logits = torch.einsum("bnd,bld->bnl", q, k) * self.scale
        attn = torch.softmax(logits, dim=1)
        if not torch.isfinite(attn).all():
            raise FloatingPointError("non-finite attention weights")
        return attn

    def step(self, slots: torch.Tensor, features: torch.Tensor) -> torch.Tensor:
        """One refinement iteration: attend, weighted mean, GRU, residual MLP."""
        b, n, d = slots.shape
        attn = self.attention(slots, features)
        # Per-slot weighted mean over locations.
        weights = attn + self.eps
        weights = weights / weights.sum(dim=-1, keepdim=True)
        v = self.project_v(self.norm_inputs(features))
        updates = torch.einsum("bnl,bld->bnd", weights, v)
        new_slots = self.gru(updates.reshape(b * n, d), slots.reshape(b * n, d)).reshape(b, n, d)
        return new_slots + self.mlp(self.norm_mlp(new_slots))

    def forward(
        self,
        slots: torch.Tensor,
        features: torch.Tensor,
        n_iters: int,
        reattach_init: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """n_iters refinement steps with shared weights.

        With ``reattach_init``, the slots entering the final iteration are
        detached and rewired to the initializer sample, so initializer
        parameters receive direct gradients through one iteration (fast query
        learning; the forward values are unchanged).
        """
        if n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        for i in range(n_iters):
            if reattach_init is not None and i == n_iters - 1:
                slots = slots.detach() + reattach_init - reattach_init.detach()
            slots = self.step(slots, features)
        return slots


class SlotTransition(nn.Module):
    """Single transformer block carrying slots from one frame to the next."""

    def __init__(self, config: ParserConfig):
        super().__init__()
        self.block = TransformerBlock(
            config.slot_dim,
            config.transition_heads,
            config.transition_hidden,
            zero_init_residuals=True,
        )

    def forward(self, slots: torch.Tensor) -> torch.Tensor:
        return self.block(slots)


class SpatialBroadcastDecoder(nn.Module):
    """Decodes each slot independently to an RGB image and a mask logit map.

    With ``broadcast_size == image_size`` the slot is tiled at full output
    resolution and refined by stride-1 convolutions (the original broadcast
    formulation); smaller broadcast grids are upsampled with transposed convs.
    """

    def __init__(self, config: ParserConfig):
        super().__init__()
        dec = config.decoder
        self.broadcast_size = dec.broadcast_size
        self.slot_dim = config.slot_dim
        self.pos_embed = SoftPositionEmbed(
            config.slot_dim, dec.broadcast_size, dec.broadcast_size, fourier=dec.fourier_features
        )
        n_up = 0
        size = dec.broadcast_size
        while size < config.image_size:
            size *= 2
            n_up += 1
        if size != config.image_size:
            raise ValueError("image_size must be broadcast_size * 2**k")
        layers: list[nn.Module] = []
        in_ch = config.slot_dim
        for _ in range(n_up):
            layers += [
                nn.ConvTranspose2d(in_ch, dec.channels, 5, stride=2, padding=2, output_padding=1),
                nn.ReLU(),
            ]
            in_ch = dec.channels
        if n_up == 0:
            layers += [nn.Conv2d(in_ch, dec.channels, 5, padding=2), nn.ReLU()]
            in_ch = dec.channels
        layers += [nn.Conv2d(in_ch, dec.channels, 5, padding=2), nn.ReLU(), nn.Conv2d(dec.channels, 4, 3, padding=1)]
        self.cnn = nn.Sequential(*layers)
        self.sigmoid_rgb = dec.sigmoid_rgb
        # Zero-started head: reconstruction begins flat, so all early gradient
        # goes to explaining actual content rather than undoing random paint.
        with torch.no_grad():
            self.cnn[-1].weight.zero_()
            self.cnn[-1].bias.zero_()

    def forward(self, slots: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, N, D) -> per-slot RGB (B, N, 3, H, W) and mask logits (B, N, 1, H, W)."""
        b, n, d = slots.shape
        grid = slots.reshape(b * n, d, 1, 1).expand(-1, -1, self.broadcast_size, self.broadcast_size)
        grid = grid.permute(0, 2, 3, 1)
        grid = self.pos_embed(grid).permute(0, 3, 1, 2)
        out = self.cnn(grid)  # (B*N, 4, H, W)
        out = out.reshape(b, n, 4, out.shape[-2], out.shape[-1])
        rgb = out[:, :, :3]
        if self.sigmoid_rgb:
            rgb = torch.sigmoid(rgb)
        return rgb, out[:, :, 3:]


class SceneParser(nn.Module):
    """Full parse/render model over frame sequences."""

    def __init__(self, config: ParserConfig):
        super().__init__()
        self.config = config
        self.encoder = FrameEncoder(config)
        self.initializer = SlotInitializer(
            config.slot_dim, config.n_slots, per_slot=config.per_slot_init
        )
        self.slot_attention = SlotAttention(config)
        self.transition = SlotTransition(config)
        self.decoder = SpatialBroadcastDecoder(config)

    def encode_frame(self, frames: torch.Tensor) -> torch.Tensor:
        return self.encoder(frames)

    def refine_slots(self, slots: torch.Tensor, features: torch.Tensor, n_iters: int) -> torch.Tensor:
        return self.slot_attention(slots, features, n_iters)

    def decode_slots(self, slots: torch.Tensor) -> DecodedObjects:
        objects, mask_logits = self.decoder(slots)
        masks = torch.softmax(mask_logits, dim=1)
        reconstruction = (objects * masks).sum(dim=1)
        return DecodedObjects(objects, mask_logits, masks, reconstruction)

    def initial_slots(self, batch: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return self.initializer.sample(batch, self.config.n_slots, generator)

    def parse_step(
        self,
        frame: torch.Tensor,
        prev_slots: Optional[torch.Tensor],
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        """Advance the recurrent parse by one frame.

        With no previous slots, samples fresh slots and refines with
        ``iters_first`` iterations; otherwise applies the transition module and
        refines with ``iters_later``.
        """
        features = self.encode_frame(frame)
        if prev_slots is None:
            slots = self.initial_slots(frame.shape[0], generator).to(features.dtype)
            reattach = slots if self.config.bilevel_first else None
            return self.slot_attention(slots, features, self.config.iters_first, reattach)
        slots = self.transition(prev_slots)
        return self.refine_slots(slots, features, self.config.iters_later)

    def parse_video(
        self, frames: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """(B, T, 3, H, W) -> slot trajectory (B, T, N, D)."""
        if frames.ndim != 5 or frames.shape[1] < 1:
            raise ValueError("expected a (B, T, 3, H, W) batch with T >= 1")
        slots = None
        trajectory = []
        for t in range(frames.shape[1]):
            slots = self.parse_step(frames[:, t], slots, generator)
            trajectory.append(slots)
        return torch.stack(trajectory, dim=1)

    def reconstruct_video(self, slot_trajectory: torch.Tensor) -> torch.Tensor:
        """(B, T, N, D) -> reconstructed frames (B, T, 3, H, W)."""
        b, t = slot_trajectory.shape[:2]
        decoded = self.decode_slots(slot_trajectory.reshape(b * t, *slot_trajectory.shape[2:]))
        return decoded.reconstruction.reshape(b, t, 3, *decoded.reconstruction.shape[-2:])
