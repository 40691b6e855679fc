from .metrics import PSNR_CAP_DB, psnr, ssim
from .harness import (
    ACTION_SOURCES,
    SEGMENTATION_PALETTE,
    MetricReport,
    ablation_table,
    classify_direction,
    displacement_consistency,
    eval_prediction,
    matched_shape_iou,
    mean_segmentation_iou,
    prototype_consistency,
    render_segmentation,
    rollout_episode_frames,
    scaling_study,
    segmentation_iou_on_episode,
    segmentation_labels,
)

__all__ = [
    "PSNR_CAP_DB",
    "psnr",
    "ssim",
    "ACTION_SOURCES",
    "SEGMENTATION_PALETTE",
    "MetricReport",
    "ablation_table",
    "classify_direction",
    "displacement_consistency",
    "eval_prediction",
    "matched_shape_iou",
    "mean_segmentation_iou",
    "prototype_consistency",
    "render_segmentation",
    "rollout_episode_frames",
    "scaling_study",
    "segmentation_iou_on_episode",
    "segmentation_labels",
]
