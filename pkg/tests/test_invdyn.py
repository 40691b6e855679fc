import numpy as np
import pytest
import torch

from slotworld.models import (
    GaussianPosterior,
    InverseDynamics,
    action_distribution,
    sample_latent,
    tiny_profile,
)


def make_invdyn(variant, seed=0, slot_dim=16, **kw):
    torch.manual_seed(seed)
    cfg = tiny_profile(variant=variant, **kw).dynamics
    return InverseDynamics(slot_dim, cfg)


class TestPosteriors:
    def test_scene_output_dims(self):
        inv = make_invdyn("scene")
        slots = torch.randn(3, 4, 16)
        post = inv.posterior(slots)
        assert post.mean.shape == (3, 4)
        assert post.sigma.shape == (3, 4)

    def test_scene_permutation_invariant(self):
        inv = make_invdyn("scene")
        slots = torch.randn(2, 5, 16, generator=torch.Generator().manual_seed(1))
        perm = torch.randperm(5, generator=torch.Generator().manual_seed(2))
        a = inv.posterior(slots)
        b = inv.posterior(slots[:, perm])
        assert torch.allclose(a.mean, b.mean, atol=1e-5)
        assert torch.allclose(a.sigma, b.sigma, atol=1e-5)

    def test_sigma_floor(self):
        inv = make_invdyn("scene")
        slots = torch.randn(4, 3, 16) * 100.0
        post = inv.posterior(slots)
        assert (post.sigma >= inv.config.sigma_floor).all()

    def test_object_variant_per_slot(self):
        inv = make_invdyn("object")
        slots = torch.randn(2, 3, 16, generator=torch.Generator().manual_seed(3))
        post = inv.posterior(slots)
        assert post.mean.shape == (2, 3, 4)
        perm = [2, 0, 1]
        post_perm = inv.posterior(slots[:, perm])
        assert torch.allclose(post.mean[:, perm], post_perm.mean, atol=1e-6)
        assert torch.allclose(post.sigma[:, perm], post_perm.sigma, atol=1e-6)


class TestActionDistribution:
    def test_identical_posteriors_zero_mean(self):
        p = GaussianPosterior(torch.randn(2, 4), torch.rand(2, 4) + 0.1)
        d = action_distribution(p, p)
        assert torch.allclose(d.mean, torch.zeros_like(d.mean))

    def test_mean_difference(self):
        p0 = GaussianPosterior(torch.zeros(1, 2), torch.full((1, 2), 0.5))
        p1 = GaussianPosterior(torch.tensor([[1.0, -1.0]]), torch.full((1, 2), 0.5))
        d = action_distribution(p0, p1)
        assert torch.allclose(d.mean, torch.tensor([[1.0, -1.0]]))

    def test_variance_addition_matches_monte_carlo(self):
        # Oracle: empirical variance of the difference of independent draws.
        g = torch.Generator().manual_seed(4)
        sigma0, sigma1 = 0.7, 0.4
        p0 = GaussianPosterior(torch.zeros(1, 1), torch.full((1, 1), sigma0))
        p1 = GaussianPosterior(torch.ones(1, 1), torch.full((1, 1), sigma1))
        d = action_distribution(p0, p1)
        n = 100_000
        x0 = torch.randn(n, generator=g) * sigma0
        x1 = 1.0 + torch.randn(n, generator=g) * sigma1
        diff = x1 - x0
        empirical_var = diff.var().item()
        expected_var = d.sigma.item() ** 2
        # Var of the sample variance ~ 2 sigma^4 / n.
        stderr = np.sqrt(2.0 / n) * expected_var
        assert abs(empirical_var - expected_var) < 3 * stderr


class TestSampling:
    def test_mean_mode_exact(self):
        d = GaussianPosterior(torch.randn(3, 4), torch.rand(3, 4) + 0.1)
        assert torch.equal(sample_latent(d, mode="mean"), d.mean)

    def test_small_sigma_sample_near_mean(self):
        floor = 1e-4
        d = GaussianPosterior(torch.randn(100, 4), torch.full((100, 4), floor))
        z = sample_latent(d, mode="sample", generator=torch.Generator().manual_seed(5))
        assert (z - d.mean).abs().max().item() < floor * 6

    def test_reparameterized_gradient_identity(self):
        # Finite differences in float64: d z / d mean is the identity.
        mean = torch.zeros(4, dtype=torch.float64, requires_grad=True)
        sigma = torch.full((4,), 0.3, dtype=torch.float64)

        def draw(m):
            g = torch.Generator().manual_seed(6)
            noise = torch.randn(4, generator=g, dtype=torch.float64)
            return (m + sigma * noise).sum()

        out = draw(mean)
        (analytic,) = torch.autograd.grad(out, mean)
        eps = 1e-6
        numeric = torch.zeros(4, dtype=torch.float64)
        for i in range(4):
            up = mean.detach().clone()
            up[i] += eps
            down = mean.detach().clone()
            down[i] -= eps
            numeric[i] = (draw(up) - draw(down)) / (2 * eps)
        assert torch.allclose(analytic, numeric, atol=1e-6)
        assert torch.allclose(analytic, torch.ones(4, dtype=torch.float64))


class TestInferActions:
    def test_identical_slots_mean_mode_zero_latent(self):
        inv = make_invdyn("scene")
        slots = torch.randn(2, 3, 16, generator=torch.Generator().manual_seed(7))
        action = inv.infer_actions(slots, slots, mode="mean")
        assert torch.allclose(action.z, torch.zeros_like(action.z), atol=1e-6)
        assert torch.allclose(action.variability, -action.prototype.detach() + action.z, atol=1e-6)

    def test_object_variant_one_action_per_slot(self):
        inv = make_invdyn("object")
        a = torch.randn(2, 3, 16, generator=torch.Generator().manual_seed(8))
        b = torch.randn(2, 3, 16, generator=torch.Generator().manual_seed(9))
        action = inv.infer_actions(a, b, mode="mean")
        assert action.z.shape == (2, 3, 4)
        assert action.index.shape == (2, 3)

    def test_slot_count_mismatch(self):
        inv = make_invdyn("object")
        with pytest.raises(ValueError):
            inv.infer_actions(torch.randn(1, 3, 16), torch.randn(1, 2, 16))

    def test_bottleneck_enforced_in_config(self):
        with pytest.raises(ValueError):
            tiny_profile(action_dim=16)  # equals slot_dim of the tiny profile
