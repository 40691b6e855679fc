import json

import numpy as np
import pytest
import torch

from slotworld.datagen import GridConfig, generate_episode, write_dataset
from slotworld.models import SceneParser, WorldModel, load_checkpoint, tiny_profile
from slotworld.training import (
    EpisodeCache,
    LossWeights,
    NonFiniteGradientError,
    PrerequisiteError,
    TrainConfig,
    clip_global_norm,
    lr_at_step,
    parser_reconstruction_loss,
    prediction_loss,
    train_stage,
    vq_loss,
)

TINY_GRID = GridConfig(image_size=16, grid_step=4, n_shapes=1, episode_length=8)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "train"
    episodes = [generate_episode(TINY_GRID, seed=s) for s in range(6)]
    write_dataset(path, episodes)
    return path


class TestLossBasics:
    def test_perfect_autoencoder_stub_zero(self):
        class Identity:
            def parse_video(self, frames, generator=None):
                return frames

            def reconstruct_video(self, slots):
                return slots

        frames = torch.rand(2, 3, 3, 4, 4)
        loss = parser_reconstruction_loss(Identity(), frames)
        assert float(loss) == 0.0

    def test_hand_computed_offset(self):
        # Constant +0.1 error on a 2x2x3 frame: 12 elements * 0.01 = 0.12.
        class Offset:
            def parse_video(self, frames, generator=None):
                return frames

            def reconstruct_video(self, slots):
                return slots + 0.1

        frames = torch.zeros(1, 1, 3, 2, 2)
        loss = parser_reconstruction_loss(Offset(), frames)
        assert abs(float(loss) - 0.12) < 1e-6

    def test_nonnegative(self):
        torch.manual_seed(0)
        parser = SceneParser(tiny_profile().parser)
        frames = torch.rand(1, 2, 3, 16, 16)
        assert float(parser_reconstruction_loss(parser, frames, torch.Generator().manual_seed(0))) >= 0

    def test_weights_validate(self):
        with pytest.raises(ValueError):
            LossWeights(image=-1.0)
        w = LossWeights()
        assert (w.image, w.slot, w.vq) == (1.0, 1.0, 0.25)


class TestVqLoss:
    def test_zero_on_prototype(self):
        z = torch.randn(4, 3)
        assert float(vq_loss(z, z.clone())) == pytest.approx(0.0, abs=1e-12)

    def test_commitment_gradient_matches_finite_differences(self):
        # Stop-gradient semantics: autograd through the full loss must equal
        # finite differences of the commitment term alone, prototype constant.
        z = torch.randn(2, 3, dtype=torch.float64, requires_grad=True)
        proto = torch.randn(2, 3, dtype=torch.float64)
        loss = vq_loss(z, proto)
        (analytic,) = torch.autograd.grad(loss, z)

        def commitment_only(x):
            return 0.25 * ((x - proto) ** 2).sum(dim=1).mean()

        eps = 1e-6
        numeric = torch.zeros_like(z)
        flat = z.detach().reshape(-1)
        for i in range(flat.numel()):
            up = flat.clone()
            up[i] += eps
            down = flat.clone()
            down[i] -= eps
            numeric.reshape(-1)[i] = (
                commitment_only(up.reshape(z.shape)) - commitment_only(down.reshape(z.shape))
            ) / (2 * eps)
        assert torch.allclose(analytic, numeric, atol=1e-6)


class TestSchedules:
    def test_clip_scales_to_max_norm(self):
        p = torch.zeros(10, requires_grad=True)
        p.grad = torch.full((10,), 0.5 / np.sqrt(10.0))
        pre = clip_global_norm([p], 0.05)
        assert pre == pytest.approx(0.5, rel=1e-5)
        assert float(torch.linalg.norm(p.grad)) == pytest.approx(0.05, rel=1e-5)

    def test_linear_warmup_midpoint(self):
        lr = lr_at_step(1999, base_lr=1e-4, total_steps=10000, schedule="warmup_cosine", warmup_steps=4000)
        assert lr == pytest.approx(0.5e-4, rel=1e-3)

    def test_cosine_endpoint_near_zero(self):
        lr = lr_at_step(9999, base_lr=2e-4, total_steps=10000, schedule="cosine")
        assert lr < 2e-4 * 1e-3

    def test_nonfinite_gradient_aborts(self):
        from slotworld.training.schedules import optimizer_step

        p = torch.zeros(3, requires_grad=True)
        p.grad = torch.tensor([float("nan"), 0.0, 0.0])
        opt = torch.optim.Adam([p])
        with pytest.raises(NonFiniteGradientError):
            optimizer_step(opt, [p], lr=1e-3, clip_norm=0.05)


class TestPredictionLoss:
    def make_model(self, action_space="hybrid"):
        torch.manual_seed(0)
        return WorldModel(tiny_profile(), action_space=action_space)

    def test_components_and_total(self, tiny_dataset):
        model = self.make_model()
        cache = EpisodeCache(tiny_dataset)
        frames, _ = cache.sample_batch(torch.Generator().manual_seed(0), 2, 4)
        weights = LossWeights()
        total, comps = prediction_loss(model, frames, n_seed=2, weights=weights, generator=torch.Generator().manual_seed(1))
        assert comps["total"] == pytest.approx(
            weights.image * comps["image"] + weights.slot * comps["slot"] + weights.vq * comps["vq"],
            rel=1e-5,
        )
        assert all(v >= 0 for v in comps.values())

    def test_parser_params_untouched(self, tiny_dataset):
        model = self.make_model()
        model.freeze_parser()
        cache = EpisodeCache(tiny_dataset)
        frames, _ = cache.sample_batch(torch.Generator().manual_seed(0), 2, 4)
        before = {k: v.clone() for k, v in model.parser.state_dict().items()}
        opt = torch.optim.Adam(list(model.dynamics_parameters()), lr=1e-3)
        total, _ = prediction_loss(model, frames, 2, LossWeights(), generator=torch.Generator().manual_seed(1))
        total.backward()
        opt.step()
        after = model.parser.state_dict()
        for k in before:
            assert torch.equal(before[k], after[k]), k

    def test_gradients_reach_dynamics_through_both_paths(self, tiny_dataset):
        cache = EpisodeCache(tiny_dataset)
        frames, _ = cache.sample_batch(torch.Generator().manual_seed(0), 2, 4)
        # Conditioning path only (vq weight zero): dynamics still gets gradient.
        model = self.make_model()
        total, _ = prediction_loss(
            model, frames, 2, LossWeights(vq=0.0), generator=torch.Generator().manual_seed(1)
        )
        total.backward()
        cond_norm = sum(
            p.grad.norm() for p in model.dynamics.parameters() if p.grad is not None
        )
        assert float(cond_norm) > 0
        # Commitment path only (image and slot weights zero).
        model = self.make_model()
        total, _ = prediction_loss(
            model, frames, 2, LossWeights(image=0.0, slot=0.0), generator=torch.Generator().manual_seed(1)
        )
        total.backward()
        vq_norm = sum(p.grad.norm() for p in model.dynamics.parameters() if p.grad is not None)
        assert float(vq_norm) > 0

    def test_oracle_space_uses_gt_actions(self, tiny_dataset):
        model = self.make_model("oracle")
        cache = EpisodeCache(tiny_dataset)
        frames, actions = cache.sample_batch(torch.Generator().manual_seed(0), 2, 4)
        total, comps = prediction_loss(
            model, frames, 2, LossWeights(), oracle_actions=actions, generator=torch.Generator().manual_seed(1)
        )
        assert comps["vq"] == 0.0
        total.backward()
        assert model.oracle_embed.weight.grad is not None


class TestTrainStage:
    def test_dynamics_requires_parser_checkpoint(self, tiny_dataset, tmp_path):
        cfg = TrainConfig(stage="dynamics", total_steps=1, batch_size=2, n_seed=2, n_predict=2, eval_every=0, ckpt_every=0)
        with pytest.raises(PrerequisiteError):
            train_stage("dynamics", tiny_dataset, tmp_path / "out", cfg)

    def test_overfit_smoke_and_determinism(self, tiny_dataset, tmp_path):
        # 30 steps on a tiny model must show a decreasing loss trend and be
        # exactly reproducible run to run.
        cfg = TrainConfig(
            stage="parser", total_steps=30, batch_size=2, seq_len=2, base_lr=3e-3,
            schedule="constant", log_every=1, eval_every=0, ckpt_every=0, seed=7,
        )

        def run(out):
            train_stage("parser", tiny_dataset, out, cfg, world_config=tiny_profile())
            lines = [json.loads(l) for l in (out / "metrics.ndjson").read_text().splitlines()]
            return [l["loss"]["total"] for l in lines if "loss" in l]

        losses_a = run(tmp_path / "a")
        losses_b = run(tmp_path / "b")
        assert losses_a == losses_b
        first, last = np.mean(losses_a[:5]), np.mean(losses_a[-5:])
        assert last < first

    def test_resume_reproduces_trajectory(self, tiny_dataset, tmp_path):
        base = dict(
            stage="parser", batch_size=2, seq_len=2, base_lr=1e-3, schedule="constant",
            log_every=1, eval_every=0, seed=3,
        )
        full_cfg = TrainConfig(total_steps=12, ckpt_every=0, **base)
        train_stage("parser", tiny_dataset, tmp_path / "full", full_cfg, world_config=tiny_profile())
        half_cfg = TrainConfig(total_steps=12, ckpt_every=6, **base)
        train_stage("parser", tiny_dataset, tmp_path / "half", half_cfg, world_config=tiny_profile())
        resume_cfg = TrainConfig(total_steps=12, ckpt_every=0, **base)
        train_stage(
            "parser",
            tiny_dataset,
            tmp_path / "resumed",
            resume_cfg,
            resume=tmp_path / "half" / "checkpoints" / "step_000006.ckpt",
        )

        def losses(out, lo=6):
            lines = [json.loads(l) for l in (out / "metrics.ndjson").read_text().splitlines()]
            return {l["step"]: l["loss"]["total"] for l in lines if "loss" in l and l["step"] >= lo}

        assert losses(tmp_path / "resumed") == losses(tmp_path / "full")

    def test_full_pipeline_checkpoint_stages(self, tiny_dataset, tmp_path):
        parser_cfg = TrainConfig(
            stage="parser", total_steps=3, batch_size=2, seq_len=2, schedule="constant",
            log_every=1, eval_every=0, ckpt_every=0,
        )
        parser_ckpt = train_stage(
            "parser", tiny_dataset, tmp_path / "p", parser_cfg, world_config=tiny_profile()
        )
        model = load_checkpoint(parser_ckpt)
        assert model.trained_stages == ["parser"]
        dyn_cfg = TrainConfig(
            stage="dynamics", total_steps=3, batch_size=2, n_seed=2, n_predict=2,
            schedule="constant", log_every=1, eval_every=0, ckpt_every=0,
        )
        dyn_ckpt = train_stage(
            "dynamics", tiny_dataset, tmp_path / "d", dyn_cfg, base_checkpoint=parser_ckpt
        )
        model = load_checkpoint(dyn_ckpt)
        assert model.trained_stages == ["parser", "dynamics"]
