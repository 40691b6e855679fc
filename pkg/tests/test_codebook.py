import numpy as np
import torch

from slotworld.models import ActionCodebook


def make_codebook(k=4, dim=3, decay=0.99, seed=0):
    torch.manual_seed(seed)
    return ActionCodebook(k, dim, ema_decay=decay)


class TestQuantize:
    def test_exact_prototype_hit(self):
        cb = make_codebook()
        z = cb.prototypes[3].clone()
        action = cb.quantize(z.unsqueeze(0))
        assert action.index.item() == 3
        assert torch.allclose(action.variability, torch.zeros_like(action.variability))

    def test_decomposition_identity(self):
        cb = make_codebook()
        z = torch.randn(16, 3, generator=torch.Generator().manual_seed(1))
        action = cb.quantize(z)
        assert torch.allclose(action.prototype + action.variability, z, atol=1e-6)

    def test_nearest_matches_brute_force(self):
        cb = make_codebook(k=8, dim=5)
        z = torch.randn(1000, 5, generator=torch.Generator().manual_seed(2))
        idx = cb.nearest(z)
        protos = cb.prototypes.numpy()
        zs = z.numpy()
        brute = np.array(
            [np.argmin(((zs[i] - protos) ** 2).sum(axis=1)) for i in range(len(zs))]
        )
        assert np.array_equal(idx.numpy(), brute)

    def test_quantization_idempotent_on_prototypes(self):
        cb = make_codebook(k=5, dim=4)
        for k in range(5):
            action = cb.quantize(cb.prototypes[k].unsqueeze(0))
            assert action.index.item() == k
            assert torch.allclose(action.variability.abs().max(), torch.tensor(0.0), atol=1e-7)

    def test_straight_through_gradient(self):
        # d prototype / d z acts as the identity; d variability / d z too.
        cb = make_codebook()
        z = torch.randn(1, 3, requires_grad=True)
        action = cb.quantize(z)
        (g_proto,) = torch.autograd.grad(action.prototype.sum(), z, retain_graph=True)
        assert torch.allclose(g_proto, torch.ones_like(g_proto))
        action = cb.quantize(z)
        (g_var,) = torch.autograd.grad(action.variability.sum(), z)
        assert torch.allclose(g_var, torch.ones_like(g_var))


class TestEmaUpdate:
    def test_constant_assignment_converges_geometrically(self):
        cb = make_codebook(k=2, dim=3, decay=0.9)
        c = torch.tensor([1.0, -2.0, 0.5])
        z = c.expand(8, 3)
        idx = torch.zeros(8, dtype=torch.long)
        dists = []
        for _ in range(60):
            cb.ema_update(z, idx)
            dists.append((cb.prototypes[0] - c).norm().item())
        assert dists[-1] < 1e-3
        # Geometric decay: each distance shrinks by roughly the decay factor.
        ratios = [dists[i + 1] / dists[i] for i in range(20) if dists[i] > 1e-8]
        assert all(r < 1.0 for r in ratios)

    def test_unassigned_code_prototype_unchanged(self):
        cb = make_codebook(k=3, dim=2)
        before = cb.prototypes[2].clone()
        z = torch.randn(10, 2, generator=torch.Generator().manual_seed(3))
        idx = torch.randint(0, 2, (10,), generator=torch.Generator().manual_seed(4))
        cb.ema_update(z, idx)
        assert torch.allclose(cb.prototypes[2], before, atol=1e-6)

    def test_counts_nonnegative(self):
        cb = make_codebook(k=3, dim=2)
        g = torch.Generator().manual_seed(5)
        for _ in range(50):
            z = torch.randn(6, 2, generator=g)
            idx = torch.randint(0, 3, (6,), generator=g)
            cb.ema_update(z, idx)
            assert (cb.ema_counts >= 0).all()

    def test_converges_to_cluster_means(self):
        # Two well-separated synthetic clusters; prototypes must land on the
        # cluster means within 1e-2 after 500 updates at decay 0.99.
        g = torch.Generator().manual_seed(6)
        cb = ActionCodebook(2, 2, ema_decay=0.99)
        mean_a = torch.tensor([2.0, 2.0])
        mean_b = torch.tensor([-2.0, -2.0])
        first = torch.cat([mean_a + 0.05 * torch.randn(16, 2, generator=g), mean_b + 0.05 * torch.randn(16, 2, generator=g)])
        cb.seed_from_batch(first, generator=g)
        for _ in range(500):
            pts = torch.cat(
                [mean_a + 0.05 * torch.randn(8, 2, generator=g), mean_b + 0.05 * torch.randn(8, 2, generator=g)]
            )
            idx = cb.nearest(pts)
            cb.ema_update(pts, idx)
        d_a = min((cb.prototypes[k] - mean_a).norm().item() for k in range(2))
        d_b = min((cb.prototypes[k] - mean_b).norm().item() for k in range(2))
        assert d_a <= 1e-2 and d_b <= 1e-2

    def test_dead_code_reseeded(self):
        cb = ActionCodebook(2, 2, ema_decay=0.9, dead_code_steps=5)
        with torch.no_grad():
            cb.prototypes.copy_(torch.tensor([[0.0, 0.0], [10.0, 10.0]]))
            cb.ema_sums.copy_(cb.prototypes)
            cb.initialized.fill_(True)
        stale = cb.prototypes[1].clone()
        z = torch.zeros(4, 2)
        idx = torch.zeros(4, dtype=torch.long)
        g = torch.Generator().manual_seed(7)
        for _ in range(10):
            cb.ema_update(z, idx, generator=g)
        assert not torch.allclose(cb.prototypes[1], stale)

    def test_usage_counts_accumulate(self):
        cb = make_codebook(k=3, dim=2)
        z = torch.randn(12, 2, generator=torch.Generator().manual_seed(8))
        idx = torch.tensor([0] * 5 + [1] * 4 + [2] * 3)
        cb.ema_update(z, idx)
        assert cb.usage.tolist() == [5, 4, 3]
