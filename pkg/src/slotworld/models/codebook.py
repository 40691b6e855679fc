"""Vector-quantized action prototypes with EMA cluster statistics.

Prototypes live in buffers (never touched by the optimizer); they track the
running mean of assigned latents through exponential moving averages of
assignment counts and sums. The codebook is seeded with k-means++ on the
first batch it sees, and codes starved of assignments for too long are
re-seeded from recently quantized latents.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
import torch.nn as nn


class LatentAction(NamedTuple):
    """Hybrid latent action: z = prototype + variability, exactly.

    ``prototype`` carries a straight-through gradient to ``z`` so the
    quantization step is transparent to downstream losses; ``variability`` is
    the residual against the detached codebook entry.
    """

    z: torch.Tensor  # (..., D)
    index: torch.Tensor  # (...,) long
    prototype: torch.Tensor  # (..., D)
    variability: torch.Tensor  # (..., D)


def _kmeans_pp(z: torch.Tensor, k: int, generator: Optional[torch.Generator]) -> torch.Tensor:
    """k-means++ seeding over rows of z; repeats rows when there are fewer than k."""
    n = z.shape[0]
    first = int(torch.randint(n, (1,), generator=generator).item())
    centers = [z[first]]
    for _ in range(1, k):
        d2 = torch.min(torch.cdist(z, torch.stack(centers)) ** 2, dim=1).values
        total = d2.sum()
        if total <= 0:
            idx = int(torch.randint(n, (1,), generator=generator).item())
        else:
            probs = d2 / total
            idx = int(torch.multinomial(probs, 1, generator=generator).item())
        centers.append(z[idx])
    return torch.stack(centers)


class ActionCodebook(nn.Module):
    def __init__(
        self,
        n_prototypes: int,
        dim: int,
        ema_decay: float = 0.99,
        dead_code_steps: int = 200,
        recent_buffer: int = 256,
    ):
        super().__init__()
        if not 0.0 < ema_decay < 1.0:
            raise ValueError("ema_decay must lie in (0, 1)")
        self.n_prototypes = n_prototypes
        self.dim = dim
        self.ema_decay = ema_decay
        self.dead_code_steps = dead_code_steps
        self.register_buffer("prototypes", torch.randn(n_prototypes, dim) * 0.01)
        self.register_buffer("ema_counts", torch.ones(n_prototypes))
        self.register_buffer("ema_sums", self.prototypes.clone())
        self.register_buffer("usage", torch.zeros(n_prototypes, dtype=torch.long))
        self.register_buffer("steps_unassigned", torch.zeros(n_prototypes, dtype=torch.long))
        self.register_buffer("initialized", torch.tensor(False))
        self.register_buffer("recent", torch.zeros(recent_buffer, dim))
        self.register_buffer("recent_len", torch.tensor(0, dtype=torch.long))

    @torch.no_grad()
    def seed_from_batch(self, z: torch.Tensor, generator: Optional[torch.Generator] = None) -> None:
        flat = z.reshape(-1, self.dim)
        centers = _kmeans_pp(flat.detach(), self.n_prototypes, generator)
        self.prototypes.copy_(centers)
        self.ema_sums.copy_(centers)
        self.ema_counts.fill_(1.0)
        self.initialized.fill_(True)

    def nearest(self, z: torch.Tensor) -> torch.Tensor:
        """Nearest prototype index per row; ties resolve to the lowest index."""
        flat = z.detach().reshape(-1, self.dim)
        d2 = torch.cdist(flat, self.prototypes) ** 2
        return torch.argmin(d2, dim=1).reshape(z.shape[:-1])

    def quantize(self, z: torch.Tensor) -> LatentAction:
        index = self.nearest(z)
        entry = self.prototypes[index]
        prototype = z + (entry - z).detach()  # straight-through
        variability = z - entry.detach()
        return LatentAction(z=z, index=index, prototype=prototype, variability=variability)

    def lookup(self, index: torch.Tensor | int) -> torch.Tensor:
        if isinstance(index, int):
            index = torch.tensor(index, dtype=torch.long)
        return self.prototypes[index]

    @torch.no_grad()
    def ema_update(
        self, z: torch.Tensor, index: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> None:
        """EMA step over a batch of assigned latents; re-seeds dead codes."""
        flat = z.detach().reshape(-1, self.dim)
        idx = index.reshape(-1)
        one_hot = torch.zeros(flat.shape[0], self.n_prototypes, dtype=flat.dtype)
        one_hot.scatter_(1, idx.unsqueeze(1), 1.0)
        counts = one_hot.sum(dim=0)
        sums = one_hot.t() @ flat
        decay = self.ema_decay
        self.ema_counts.mul_(decay).add_(counts, alpha=1.0 - decay)
        self.ema_sums.mul_(decay).add_(sums, alpha=1.0 - decay)
        self.prototypes.copy_(self.ema_sums / (self.ema_counts.unsqueeze(1) + 1e-8))
        self.usage.add_(counts.long())
        assigned = counts > 0
        self.steps_unassigned[assigned] = 0
        self.steps_unassigned[~assigned] += 1
        self._push_recent(flat)
        self._reseed_dead(generator)

    @torch.no_grad()
    def _push_recent(self, flat: torch.Tensor) -> None:
        take = min(flat.shape[0], self.recent.shape[0])
        self.recent = torch.roll(self.recent, shifts=take, dims=0)
        self.recent[:take] = flat[-take:]
        self.recent_len.fill_(min(int(self.recent_len) + take, self.recent.shape[0]))

    @torch.no_grad()
    def _reseed_dead(self, generator: Optional[torch.Generator]) -> None:
        if int(self.recent_len) == 0:
            return
        dead = self.steps_unassigned >= self.dead_code_steps
        for k in torch.nonzero(dead).flatten().tolist():
            pick = int(torch.randint(int(self.recent_len), (1,), generator=generator).item())
            self.prototypes[k] = self.recent[pick]
            self.ema_sums[k] = self.recent[pick]
            self.ema_counts[k] = 1.0
            self.steps_unassigned[k] = 0
