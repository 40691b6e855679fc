import numpy as np
import pytest
import torch

from slotworld.models import (
    SceneParser,
    desk_profile,
    full_profile,
    tiny_profile,
)


@pytest.fixture(scope="module")
def tiny_parser():
    torch.manual_seed(0)
    return SceneParser(tiny_profile().parser)


def rand_frames(parser, batch=2, t=1, seed=0):
    g = torch.Generator().manual_seed(seed)
    size = parser.config.image_size
    return torch.rand(batch, t, 3, size, size, generator=g)


class TestEncoder:
    def test_full_profile_is_stride_preserving(self):
        torch.manual_seed(0)
        parser = SceneParser(full_profile().parser)
        frame = torch.rand(1, 3, 64, 64)
        feats = parser.encode_frame(frame)
        assert feats.shape == (1, 64 * 64, 32)

    def test_identical_frames_identical_features(self, tiny_parser):
        frame = rand_frames(tiny_parser)[:, 0]
        a = tiny_parser.encode_frame(frame)
        b = tiny_parser.encode_frame(frame.clone())
        assert torch.equal(a, b)

    def test_zero_frame_finite(self, tiny_parser):
        size = tiny_parser.config.image_size
        feats = tiny_parser.encode_frame(torch.zeros(1, 3, size, size))
        assert torch.isfinite(feats).all()

    def test_shape_mismatch_raises(self, tiny_parser):
        with pytest.raises(ValueError):
            tiny_parser.encode_frame(torch.zeros(1, 3, 8, 8))


class TestSlotAttention:
    def test_attention_columns_sum_to_one_over_slots(self, tiny_parser):
        frame = rand_frames(tiny_parser)[:, 0]
        feats = tiny_parser.encode_frame(frame)
        slots = tiny_parser.initial_slots(2, torch.Generator().manual_seed(1))
        attn = tiny_parser.slot_attention.attention(slots, feats)
        col_sums = attn.sum(dim=1)
        assert torch.allclose(col_sums, torch.ones_like(col_sums), atol=1e-6)

    def test_permutation_equivariance(self, tiny_parser):
        frame = rand_frames(tiny_parser)[:, 0]
        feats = tiny_parser.encode_frame(frame)
        slots = torch.randn(2, 2, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(2))
        out = tiny_parser.refine_slots(slots, feats, n_iters=2)
        perm = [1, 0]
        out_perm = tiny_parser.refine_slots(slots[:, perm], feats, n_iters=2)
        assert torch.allclose(out[:, perm], out_perm, atol=1e-5)

    def test_single_slot_reduces_to_mean_pooled_gru(self, tiny_parser):
        # With one slot the attention is all ones; the update must equal
        # GRU(mean of values, slot) computed by hand, plus the residual MLP.
        frame = rand_frames(tiny_parser)[:, 0]
        feats = tiny_parser.encode_frame(frame)
        sa = tiny_parser.slot_attention
        slots = torch.randn(2, 1, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(3))
        attn = sa.attention(slots, feats)
        assert torch.allclose(attn, torch.ones_like(attn))
        v = sa.project_v(sa.norm_inputs(feats))
        pooled = v.mean(dim=1, keepdim=True)
        expected = sa.gru(pooled.reshape(2, -1), slots.reshape(2, -1)).reshape(2, 1, -1)
        expected = expected + sa.mlp(sa.norm_mlp(expected))
        got = sa.step(slots, feats)
        assert torch.allclose(got, expected, atol=1e-6)

    def test_refine_composition(self, tiny_parser):
        frame = rand_frames(tiny_parser)[:, 0]
        feats = tiny_parser.encode_frame(frame)
        slots = tiny_parser.initial_slots(2, torch.Generator().manual_seed(4))
        manual = slots
        for _ in range(3):
            manual = tiny_parser.slot_attention.step(manual, feats)
        assert torch.allclose(tiny_parser.refine_slots(slots, feats, 3), manual, atol=1e-7)
        one = tiny_parser.refine_slots(slots, feats, 1)
        assert torch.allclose(one, tiny_parser.slot_attention.step(slots, feats), atol=1e-7)

    def test_constructed_fixed_point(self):
        # Zero out the GRU's candidate path and the MLP: step(s, f) = s for any
        # input, so refinement is the identity regardless of iteration count.
        torch.manual_seed(0)
        parser = SceneParser(tiny_profile().parser)
        sa = parser.slot_attention
        with torch.no_grad():
            # GRU update gate ~ sigmoid(large negative) -> keep hidden state.
            sa.gru.bias_ih.zero_()
            sa.gru.bias_hh.zero_()
            sa.gru.weight_ih.zero_()
            sa.gru.weight_hh.zero_()
            hidden = sa.gru.hidden_size
            sa.gru.bias_ih[hidden : 2 * hidden] = 1e4  # update gate z -> 1 keeps h
            for p in sa.mlp.parameters():
                p.zero_()
        frame = rand_frames(parser)[:, 0]
        feats = parser.encode_frame(frame)
        slots = torch.randn(2, 2, parser.config.slot_dim, generator=torch.Generator().manual_seed(5))
        for n_iters in (1, 2, 5):
            out = parser.refine_slots(slots, feats, n_iters)
            assert torch.allclose(out, slots, atol=1e-5)


class TestDecoder:
    def test_mask_normalization(self, tiny_parser):
        slots = torch.randn(2, 2, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(6))
        decoded = tiny_parser.decode_slots(slots)
        sums = decoded.masks.sum(dim=1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)

    def test_identical_slots_identical_outputs(self, tiny_parser):
        slot = torch.randn(1, 1, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(7))
        slots = torch.cat([slot, slot.clone()], dim=1)
        decoded = tiny_parser.decode_slots(slots)
        assert torch.allclose(decoded.objects[:, 0], decoded.objects[:, 1], atol=1e-7)
        assert torch.allclose(decoded.mask_logits[:, 0], decoded.mask_logits[:, 1], atol=1e-7)

    def test_reconstruction_matches_brute_force(self, tiny_parser):
        slots = torch.randn(2, 2, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(8))
        decoded = tiny_parser.decode_slots(slots)
        objects = decoded.objects.detach().numpy()
        logits = decoded.mask_logits.detach().numpy()
        # Independent oracle: numpy softmax + weighted sum.
        exp = np.exp(logits - logits.max(axis=1, keepdims=True))
        weights = exp / exp.sum(axis=1, keepdims=True)
        expected = (objects * weights).sum(axis=1)
        assert np.allclose(decoded.reconstruction.detach().numpy(), expected, atol=1e-6)

    def test_decode_pure_function(self, tiny_parser):
        slots = torch.randn(1, 2, tiny_parser.config.slot_dim, generator=torch.Generator().manual_seed(9))
        a = tiny_parser.decode_slots(slots)
        b = tiny_parser.decode_slots(slots.clone())
        assert torch.equal(a.reconstruction, b.reconstruction)
        assert torch.equal(a.masks, b.masks)


class TestParseVideo:
    def test_single_frame_parse(self, tiny_parser):
        frames = rand_frames(tiny_parser, batch=1, t=1)
        g = torch.Generator().manual_seed(11)
        slots = tiny_parser.parse_video(frames, g)
        assert slots.shape == (1, 1, 2, tiny_parser.config.slot_dim)

    def test_fixed_seed_deterministic(self, tiny_parser):
        frames = rand_frames(tiny_parser, batch=1, t=3)
        a = tiny_parser.parse_video(frames, torch.Generator().manual_seed(12))
        b = tiny_parser.parse_video(frames, torch.Generator().manual_seed(12))
        assert torch.equal(a, b)

    def test_t_frames_t_slot_sets(self, tiny_parser):
        frames = rand_frames(tiny_parser, batch=2, t=4)
        slots = tiny_parser.parse_video(frames, torch.Generator().manual_seed(13))
        assert slots.shape[:2] == (2, 4)

    def test_first_frame_gets_three_iterations(self):
        # Counting step() invocations: 3 for the first frame, 1 for later ones.
        torch.manual_seed(0)
        parser = SceneParser(tiny_profile().parser)
        calls = []
        original = parser.slot_attention.step

        def counting_step(slots, feats):
            calls.append(1)
            return original(slots, feats)

        parser.slot_attention.step = counting_step
        frames = rand_frames(parser, batch=1, t=2)
        parser.parse_video(frames, torch.Generator().manual_seed(14))
        assert len(calls) == parser.config.iters_first + parser.config.iters_later


class TestGradients:
    def test_reconstruction_gradient_matches_finite_differences(self):
        # float64 central differences on a 2-slot, 8x8 instance.
        torch.manual_seed(0)
        cfg = tiny_profile(image_size=8).parser
        cfg.decoder.broadcast_size = 4
        parser = SceneParser(cfg).double()
        # The output head starts zeroed; give it weight so the check is
        # non-degenerate.
        torch.nn.init.normal_(parser.decoder.cnn[-1].weight, std=0.1)
        torch.nn.init.normal_(parser.decoder.cnn[-1].bias, std=0.1)
        slots = torch.randn(1, 2, cfg.slot_dim, dtype=torch.float64, requires_grad=True)
        target = torch.rand(1, 3, 8, 8, dtype=torch.float64)

        def loss_fn(s):
            return ((parser.decode_slots(s).reconstruction - target) ** 2).sum()

        loss = loss_fn(slots)
        (analytic,) = torch.autograd.grad(loss, slots)
        eps = 1e-5
        numeric = torch.zeros_like(slots)
        flat = slots.detach().clone().reshape(-1)
        for i in range(flat.numel()):
            bumped = flat.clone()
            bumped[i] += eps
            up = loss_fn(bumped.reshape(slots.shape))
            bumped[i] -= 2 * eps
            down = loss_fn(bumped.reshape(slots.shape))
            numeric.reshape(-1)[i] = (up - down) / (2 * eps)
        rel = (analytic - numeric).norm() / numeric.norm()
        assert rel < 1e-3
