"""Shared building blocks: transformer encoder stack, coordinate embeddings."""

from __future__ import annotations

import math

import torch
import torch.nn as nn


class TransformerBlock(nn.Module):
    """Pre-norm transformer encoder block (self-attention + feedforward).

    With ``zero_init_residuals`` the output projections of both branches start
    at zero, so the block begins as the identity and grows away from it; used
    for the slot transition module, which must not scramble slot identities
    before it has learned anything.
    """

    def __init__(self, dim: int, heads: int, hidden: int, zero_init_residuals: bool = False):
        super().__init__()
        self.norm_attn = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm_ff = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(), nn.Linear(hidden, dim))
        if zero_init_residuals:
            with torch.no_grad():
                self.attn.out_proj.weight.zero_()
                self.attn.out_proj.bias.zero_()
                self.ff[-1].weight.zero_()
                self.ff[-1].bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm_attn(x)
        attn_out, _ = self.attn(h, h, h, need_weights=False)
        x = x + attn_out
        return x + self.ff(self.norm_ff(x))


class TransformerStack(nn.Module):
    def __init__(self, dim: int, depth: int, heads: int, hidden: int):
        super().__init__()
        self.blocks = nn.ModuleList(TransformerBlock(dim, heads, hidden) for _ in range(depth))
        self.norm_out = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x = block(x)
        return self.norm_out(x)


def coordinate_grid(height: int, width: int, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 4) grid of normalized coordinates (y, x, 1-y, 1-x) in [0, 1]."""
    ys = torch.linspace(0.0, 1.0, height, dtype=dtype)
    xs = torch.linspace(0.0, 1.0, width, dtype=dtype)
    yy, xx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([yy, xx, 1.0 - yy, 1.0 - xx], dim=-1)


class SoftPositionEmbed(nn.Module):
    """Adds a learned linear projection of a coordinate grid to feature maps.

    With ``fourier=True`` the grid carries sin/cos features at octave-spaced
    frequencies on top of the linear ramps, letting downstream convolutions
    form sharp spatial transitions cheaply (used by the broadcast decoder).
    """

    def __init__(self, dim: int, height: int, width: int, fourier: bool = False, n_freqs: int = 4):
        super().__init__()
        grid = coordinate_grid(height, width)
        if fourier:
            yx = grid[..., :2]  # (H, W, 2) in [0, 1]
            bands = []
            for k in range(n_freqs):
                freq = math.pi * (2.0**k)
                bands.append(torch.sin(freq * yx))
                bands.append(torch.cos(freq * yx))
            grid = torch.cat([grid] + bands, dim=-1)
        self.proj = nn.Linear(grid.shape[-1], dim)
        self.register_buffer("grid", grid, persistent=False)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        # features: (B, H, W, C)
        return features + self.proj(self.grid.to(features.dtype))


def sinusoidal_encoding(n_positions: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Standard sinusoidal table, (n_positions, dim). Requires an even dim."""
    if dim % 2 != 0:
        raise ValueError("sinusoidal encoding needs an even dimension")
    position = torch.arange(n_positions, dtype=dtype).unsqueeze(1)
    half = dim // 2
    freq = torch.exp(torch.arange(half, dtype=dtype) * (-math.log(10000.0) / max(half - 1, 1)))
    table = torch.zeros(n_positions, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * freq)
    table[:, 1::2] = torch.cos(position * freq)
    return table
