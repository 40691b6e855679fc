import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slotworld.evaluation import PSNR_CAP_DB, psnr, ssim


class TestPsnr:
    def test_identical_frames_capped(self):
        a = np.random.default_rng(0).random((16, 16, 3))
        assert psnr(a, a) == PSNR_CAP_DB

    def test_uniform_half_difference(self):
        a = np.zeros((8, 8, 3))
        b = np.full((8, 8, 3), 0.5)
        assert psnr(a, b) == pytest.approx(6.0206, abs=1e-3)

    def test_mse_001_is_20db(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((12, 12, 3)), rng.random((12, 12, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((5, 5)))

    @given(st.floats(0.01, 0.3))
    @settings(max_examples=20, deadline=None)
    def test_noise_monotonicity(self, amplitude):
        rng = np.random.default_rng(42)
        base = rng.random((16, 16, 3)) * 0.5 + 0.25
        noise = rng.normal(0, 1, base.shape)
        low = np.clip(base + amplitude * 0.5 * noise, 0, 1)
        high = np.clip(base + amplitude * noise, 0, 1)
        assert psnr(low, base) > psnr(high, base)


class TestSsim:
    def test_identical_is_one(self):
        a = np.random.default_rng(2).random((32, 32, 3))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_inverted_checkerboard_low(self):
        tile = np.indices((32, 32)).sum(axis=0) % 2
        a = np.stack([tile] * 3, axis=-1).astype(np.float64)
        b = 1.0 - a
        assert ssim(a, b) < 0.2

    def test_matches_reference_implementation(self):
        # Oracle: scikit-image windowed SSIM with the standard settings.
        from skimage.metrics import structural_similarity

        rng = np.random.default_rng(3)
        a = rng.random((32, 32, 3))
        b = np.clip(a + rng.normal(0, 0.08, a.shape), 0, 1)
        ref = structural_similarity(
            a, b, channel_axis=-1, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0,
        )
        assert ssim(a, b) == pytest.approx(ref, abs=1e-9)

    def test_constant_shift_value_frozen(self):
        # Frozen from the reference implementation: +0.1 shift on a smooth
        # gradient image, clipped to [0, 1].
        xx, yy = np.meshgrid(np.linspace(0, 1, 32), np.linspace(0, 1, 32))
        a = np.stack([xx, yy, 0.5 * (xx + yy)], axis=-1)
        b = np.clip(a + 0.1, 0, 1)
        assert ssim(a, b) == pytest.approx(0.9740947, abs=1e-4)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a, b = rng.random((20, 20)), rng.random((20, 20))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((8, 8)), np.zeros((8, 9)))
