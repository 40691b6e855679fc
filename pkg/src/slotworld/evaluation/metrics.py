"""Pixel-fidelity metrics over [0, 1] frames.

PSNR caps at 100 dB for identical frames so aggregates stay finite. SSIM is
the windowed formulation with an 11-tap Gaussian window (sigma 1.5) and the
standard stabilizing constants, averaged over channels.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

PSNR_CAP_DB = 100.0
_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5  # 11-tap window: radius = int(3.5 * 1.5 + 0.5) = 5
_C1 = 0.01**2
_C2 = 0.03**2


def _check_pair(pred: np.ndarray, target: np.ndarray) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")


def psnr(pred: np.ndarray, target: np.ndarray) -> float:
    """10*log10(1/MSE) for unit-range images; identical inputs give the cap."""
    _check_pair(pred, target)
    mse = float(np.mean((pred.astype(np.float64) - target.astype(np.float64)) ** 2))
    if mse <= 10 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    blur = lambda a: gaussian_filter(a, sigma=_SSIM_SIGMA, truncate=_SSIM_TRUNCATE, mode="nearest")
    mu_x = blur(x)
    mu_y = blur(y)
    var_x = blur(x * x) - mu_x**2
    var_y = blur(y * y) - mu_y**2
    cov = blur(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _C1) * (2 * cov + _C2)
    den = (mu_x**2 + mu_y**2 + _C1) * (var_x + var_y + _C2)
    ssim_map = num / den
    # Drop the window-radius border where the filter support is incomplete.
    pad = int(_SSIM_TRUNCATE * _SSIM_SIGMA + 0.5)
    if min(ssim_map.shape) > 2 * pad:
        ssim_map = ssim_map[pad:-pad, pad:-pad]
    return float(np.mean(ssim_map))


def ssim(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean local SSIM over channels; accepts (H, W) or (H, W, C) or (C, H, W)."""
    _check_pair(pred, target)
    pred = pred.astype(np.float64)
    target = target.astype(np.float64)
    if pred.ndim == 2:
        return _ssim_channel(pred, target)
    if pred.ndim != 3:
        raise ValueError("ssim expects 2D or 3D images")
    # Treat the smallest axis as channels.
    ch_axis = int(np.argmin(pred.shape))
    pred = np.moveaxis(pred, ch_axis, 0)
    target = np.moveaxis(target, ch_axis, 0)
    return float(np.mean([_ssim_channel(pred[c], target[c]) for c in range(pred.shape[0])]))
