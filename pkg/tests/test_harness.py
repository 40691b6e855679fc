import numpy as np
import pytest
import torch

from slotworld.datagen import GridConfig, generate_episode, write_dataset
from slotworld.evaluation import (
    SEGMENTATION_PALETTE,
    classify_direction,
    displacement_consistency,
    eval_prediction,
    matched_shape_iou,
    prototype_consistency,
    render_segmentation,
    scaling_study,
)
from slotworld.models import WorldModel, tiny_profile
from slotworld.training import EpisodeCache

GRID = GridConfig(image_size=16, grid_step=4, n_shapes=1, episode_length=10)


@pytest.fixture(scope="module")
def tiny_model():
    torch.manual_seed(0)
    model = WorldModel(tiny_profile())
    model.dynamics.codebook.seed_from_batch(
        torch.randn(32, 4, generator=torch.Generator().manual_seed(1)),
        torch.Generator().manual_seed(2),
    )
    model.eval()
    return model


@pytest.fixture(scope="module")
def tiny_eval_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("evaldata") / "val"
    write_dataset(path, [generate_episode(GRID, seed=s) for s in range(3)])
    return path


class TestEvalPrediction:
    def test_report_structure_and_averages(self, tiny_model, tiny_eval_dataset):
        report = eval_prediction(tiny_model, tiny_eval_dataset, n_seed=3, horizon=4, seed=0)
        assert len(report.per_step_psnr) == 4
        assert len(report.per_episode_psnr) == 3
        # Aggregate equals the hand-average of per-episode means.
        assert report.mean_psnr == pytest.approx(float(np.mean(report.per_episode_psnr)), rel=1e-9)
        assert report.mean_ssim == pytest.approx(float(np.mean(report.per_episode_ssim)), rel=1e-9)
        assert -1.0 <= report.mean_ssim <= 1.0

    def test_zero_horizon_is_error(self, tiny_model, tiny_eval_dataset):
        with pytest.raises(ValueError):
            eval_prediction(tiny_model, tiny_eval_dataset, n_seed=3, horizon=0)

    def test_episode_too_short(self, tiny_model, tiny_eval_dataset):
        with pytest.raises(ValueError):
            eval_prediction(tiny_model, tiny_eval_dataset, n_seed=6, horizon=15)

    def test_deterministic_reports(self, tiny_model, tiny_eval_dataset):
        a = eval_prediction(tiny_model, tiny_eval_dataset, n_seed=3, horizon=3, seed=5)
        b = eval_prediction(tiny_model, tiny_eval_dataset, n_seed=3, horizon=3, seed=5)
        assert a.to_dict() == b.to_dict()

    def test_zero_action_source_runs(self, tiny_model, tiny_eval_dataset):
        report = eval_prediction(
            tiny_model, tiny_eval_dataset, n_seed=3, horizon=3, action_source="zero"
        )
        assert report.action_source == "zero"

    def test_scaling_study_rows(self, tiny_model, tiny_eval_dataset):
        entries = [
            {"n_objects": n, "variant": v, "model": tiny_model, "dataset": EpisodeCache(tiny_eval_dataset)}
            for n in (1, 2, 3, 4, 5)
            for v in ("scene", "object")
        ]
        rows = scaling_study(entries, n_seed=3, horizon=2, n_episodes=1)
        assert len(rows) == 10
        assert {(r["n_objects"], r["variant"]) for r in rows} == {
            (n, v) for n in (1, 2, 3, 4, 5) for v in ("scene", "object")
        }


class TestDisplacementConsistency:
    def test_straight_line_oracle_scores_one(self):
        disps = [np.array([0.0, 1.0])] * 10
        assert displacement_consistency(disps) == pytest.approx(1.0)

    def test_random_walk_oracle_near_zero(self):
        rng = np.random.default_rng(0)
        scores = []
        for _ in range(1000):
            disps = [rng.normal(0, 1, 2) for _ in range(10)]
            scores.append(displacement_consistency(disps))
        assert abs(float(np.mean(scores))) < 0.2

    def test_static_scores_zero(self):
        assert displacement_consistency([np.zeros(2)] * 5) == 0.0

    def test_direction_classification(self):
        assert classify_direction(np.array([1.0, 0.1])) == "down"
        assert classify_direction(np.array([-1.0, 0.1])) == "up"
        assert classify_direction(np.array([0.1, 1.0])) == "right"
        assert classify_direction(np.array([0.0, -1.0])) == "left"
        assert classify_direction(np.array([0.01, 0.01])) == "stay"


class TestPrototypeConsistency:
    def test_returns_score_and_direction(self, tiny_model, tiny_eval_dataset):
        cache = EpisodeCache(tiny_eval_dataset)
        frame = cache.episode_frames(0)[0]
        out = prototype_consistency(tiny_model, 0, frame, horizon=4, seed=0)
        assert set(out) >= {"prototype", "score", "direction", "vanished"}
        assert -1.0 <= out["score"] <= 1.0

    def test_out_of_range_prototype(self, tiny_model, tiny_eval_dataset):
        cache = EpisodeCache(tiny_eval_dataset)
        frame = cache.episode_frames(0)[0]
        with pytest.raises(ValueError):
            prototype_consistency(tiny_model, 99, frame, horizon=2)


class TestSegmentation:
    def test_one_hot_masks_exact_palette(self):
        masks = np.zeros((3, 1, 8, 8))
        masks[0, 0, :4] = 1.0
        masks[1, 0, 4:, :4] = 1.0
        masks[2, 0, 4:, 4:] = 1.0
        seg = render_segmentation(masks)
        assert np.array_equal(seg[0, 0], SEGMENTATION_PALETTE[0])
        assert np.array_equal(seg[5, 0], SEGMENTATION_PALETTE[1])
        assert np.array_equal(seg[5, 5], SEGMENTATION_PALETTE[2])

    def test_palette_stable_across_frames(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            masks = rng.random((4, 1, 8, 8))
            seg = render_segmentation(masks)
            labels = masks[:, 0].argmax(axis=0)
            assert np.array_equal(seg, SEGMENTATION_PALETTE[labels])

    def test_matched_iou_perfect_segmentation(self):
        # Labels that exactly reproduce the ground-truth shape masks give 1.0.
        gt = np.zeros((2, 1, 8, 8), dtype=bool)
        gt[:, 0, 2:4, 2:4] = True
        labels = np.zeros((2, 8, 8), dtype=int)
        labels[:, 2:4, 2:4] = 1
        assert matched_shape_iou(labels, gt) == pytest.approx(1.0)

    def test_matched_iou_background_confusion_low(self):
        gt = np.zeros((1, 1, 8, 8), dtype=bool)
        gt[0, 0, 0:2, 0:2] = True
        labels = np.zeros((1, 8, 8), dtype=int)  # everything one slot
        assert matched_shape_iou(labels, gt) < 0.1
