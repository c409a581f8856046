"""Tests for loss algebra and discriminator histogram features."""

import numpy as np
import pytest

from rhoraw.bayer import RgbImage
from rhoraw.errors import DegeneratePairError, ShapeError
from rhoraw.losses import (
    YuvImage,
    adv_losses,
    chroma_hist,
    cycle_loss,
    gray_hist,
    var_loss,
    yuv_from_rgb,
)


def rgb(pixels):
    return RgbImage(pixels=np.asarray(pixels, dtype=np.float64))


class TestCycleLoss:
    def test_identical_images_zero(self, rng):
        y = rgb(rng.random((4, 4, 3)))
        assert cycle_loss(y, y) == 0.0

    def test_uniform_offset(self, rng):
        pixels = rng.random((4, 4, 3)) * 0.5
        assert cycle_loss(rgb(pixels + 0.1), rgb(pixels)) == pytest.approx(0.1)

    def test_matches_double_loop_oracle(self, rng):
        a = rng.random((5, 6, 3))
        b = rng.random((5, 6, 3))
        total = 0.0
        for i in range(5):
            for j in range(6):
                for c in range(3):
                    total += abs(a[i, j, c] - b[i, j, c])
        expected = total / (5 * 6 * 3)
        assert cycle_loss(rgb(a), rgb(b)) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            cycle_loss(rgb(rng.random((4, 4, 3))), rgb(rng.random((4, 6, 3))))

    def test_metric_properties_on_random_triples(self, rng):
        for _ in range(20):
            a, b, c = (rgb(rng.random((3, 3, 3))) for _ in range(3))
            dab = cycle_loss(a, b)
            dba = cycle_loss(b, a)
            assert dab == dba
            assert dab >= 0.0
            assert cycle_loss(a, b) <= cycle_loss(a, c) + cycle_loss(c, b) + 1e-15
        x = rgb(rng.random((3, 3, 3)))
        assert cycle_loss(x, x) == 0.0


def const_yuv(y, u, v, shape=(4, 4)):
    return YuvImage(
        y=np.full(shape, y), u=np.full(shape, u), v=np.full(shape, v)
    )


class TestVarLoss:
    def test_identical_images_zero(self):
        x = const_yuv(0.5, 0.1, -0.1)
        assert var_loss(x, x, 0.0, 0.0, 2.0, 1.0) == 0.0

    def test_hand_computed_case(self):
        # Constant u shift of 0.2 with theta gap 2, identical luma, phi gap 1:
        # -0.2/2 - 0/1 = -0.1.
        x1 = const_yuv(0.5, 0.2, 0.0)
        x2 = const_yuv(0.5, 0.0, 0.0)
        assert var_loss(x1, x2, 2.0, 1.0, 0.0, 0.0) == pytest.approx(-0.1, abs=1e-12)

    def test_doubling_theta_gap_halves_chroma_term(self):
        x1 = const_yuv(0.5, 0.2, 0.0)
        x2 = const_yuv(0.5, 0.0, 0.0)
        l1 = var_loss(x1, x2, 2.0, 1.0, 0.0, 0.0)
        l2 = var_loss(x1, x2, 4.0, 1.0, 0.0, 0.0)
        assert l2 == pytest.approx(l1 / 2.0, abs=1e-12)

    def test_more_separation_more_negative(self, rng):
        base = const_yuv(0.5, 0.0, 0.0)
        losses = [
            var_loss(const_yuv(0.5 + dy, 0.1 * dy, 0.0), base, 1.0, 1.0, 0.0, 0.0)
            for dy in (0.1, 0.2, 0.3)
        ]
        assert losses[0] > losses[1] > losses[2]

    def test_always_nonpositive(self, rng):
        for _ in range(10):
            x1 = YuvImage(y=rng.random((3, 3)), u=rng.random((3, 3)) - 0.5, v=rng.random((3, 3)) - 0.5)
            x2 = YuvImage(y=rng.random((3, 3)), u=rng.random((3, 3)) - 0.5, v=rng.random((3, 3)) - 0.5)
            assert var_loss(x1, x2, 1.0, 2.0, -1.0, -2.0) <= 0.0

    def test_degenerate_pair_guard(self):
        x = const_yuv(0.5, 0.0, 0.0)
        with pytest.raises(DegeneratePairError):
            var_loss(x, x, 1.0, 1.0, 1.0, 2.0)
        with pytest.raises(DegeneratePairError):
            var_loss(x, x, 1.0, 1.0, 2.0, 1.0 + 1e-9)


class TestAdvLosses:
    def test_perfect_fool_zeroes_generator(self):
        loss_g, _ = adv_losses(0.5, 1.0)
        assert loss_g == 0.0

    def test_perfect_discriminator_zeroes_discriminator(self):
        _, loss_d = adv_losses(1.0, 0.0)
        assert loss_d == 0.0

    def test_hand_computed_case(self):
        _, loss_d = adv_losses(0.8, 0.3)
        assert loss_d == pytest.approx(0.13, abs=1e-12)
        loss_g, _ = adv_losses(0.8, 0.3)
        assert loss_g == pytest.approx(0.49, abs=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            adv_losses(float("nan"), 0.5)


class TestChromaHist:
    def test_constant_gray_single_center_bin(self):
        img = rgb(np.full((8, 8, 3), 0.4))
        h = chroma_hist(img)
        assert h.bins[32, 32] == pytest.approx(1.0)
        assert np.count_nonzero(h.bins) == 1
        assert h.excluded == 0

    def test_intensity_invariance(self, rng):
        pixels = rng.random((8, 8, 3)) * 0.4 + 0.05
        h1 = chroma_hist(rgb(pixels))
        h2 = chroma_hist(rgb(pixels * 2.0))  # pre-clamp doubling
        np.testing.assert_array_equal(h1.bins, h2.bins)

    def test_two_tone_counting_oracle(self):
        pixels = np.empty((2, 8, 3))
        pixels[0] = [0.2, 0.2, 0.2]
        pixels[1] = [0.4, 0.2, 0.2]  # log(R/G) = log 2, log(B/G) = 0
        h = chroma_hist(rgb(pixels))
        iu = int(np.floor((np.log(2.0) + 4.0) / 8.0 * 64))
        assert h.bins[32, 32] == pytest.approx(0.5)
        assert h.bins[iu, 32] == pytest.approx(0.5)

    def test_dark_green_pixels_excluded(self):
        pixels = np.zeros((2, 2, 3))
        pixels[0, 0] = [0.5, 0.5, 0.5]
        h = chroma_hist(rgb(pixels))
        assert h.excluded == 3
        assert h.bins.sum() == pytest.approx(1.0)

    def test_sums_to_one(self, rng):
        h = chroma_hist(rgb(rng.random((16, 16, 3))))
        assert h.bins.sum() == pytest.approx(1.0, abs=1e-9)


class TestGrayHist:
    def test_constant_image_single_bin(self):
        h = gray_hist(rgb(np.full((4, 4, 3), 0.25)))
        assert np.count_nonzero(h.bins) == 1
        assert h.bins.sum() == pytest.approx(1.0)

    def test_white_lands_in_top_bin(self):
        h = gray_hist(rgb(np.ones((2, 2, 3))))
        assert h.bins[63] == pytest.approx(1.0)

    def test_sums_to_one(self, rng):
        h = gray_hist(rgb(rng.random((16, 16, 3))))
        assert h.bins.sum() == pytest.approx(1.0, abs=1e-9)


class TestYuv:
    def test_ranges(self, rng):
        img = rgb(rng.random((16, 16, 3)))
        yuv = yuv_from_rgb(img)
        assert yuv.y.min() >= 0.0 and yuv.y.max() <= 1.0
        assert yuv.u.min() >= -0.5 - 1e-12 and yuv.u.max() <= 0.5 + 1e-12
        assert yuv.v.min() >= -0.5 - 1e-12 and yuv.v.max() <= 0.5 + 1e-12

    def test_gray_has_zero_chroma(self):
        yuv = yuv_from_rgb(rgb(np.full((2, 2, 3), 0.7)))
        np.testing.assert_allclose(yuv.u, 0.0, atol=1e-15)
        np.testing.assert_allclose(yuv.v, 0.0, atol=1e-15)
        np.testing.assert_allclose(yuv.y, 0.7, atol=1e-15)
