"""Tests for the patch-mean density model and Monte-Carlo analyses."""

import numpy as np
import pytest
from scipy import integrate, stats

from rhoraw.errors import EstimationError
from rhoraw.rawstats import (
    BnSimConfig,
    GradVarResult,
    KQuadModel,
    bn_var_mc,
    fit_k,
    fit_k_image,
    gamma_k_report,
    grad_var_mc,
    kquad_density,
    patch_stats,
    sample_kquad,
    spearman_rho,
    synth_kquad_image,
    synth_night_raw_image,
)


class TestDensity:
    @pytest.mark.parametrize("k", [-6.0, -3.0, 0.0, 4.0, 8.0, 12.0])
    def test_integrates_to_one(self, k):
        # Closed form: k/3 - k/2 + k/6 + 1 = 1; quadrature confirms.
        val, _ = integrate.quad(lambda m: kquad_density(m, k), 0.0, 1.0)
        assert val == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [-6.0, 0.0, 12.0])
    def test_nonnegative_at_range_boundaries(self, k):
        mu = np.linspace(0, 1, 1001)
        assert kquad_density(mu, k).min() >= -1e-12

    def test_symmetric_about_half(self):
        mu = np.linspace(0, 1, 101)
        for k in (-6.0, 5.0, 12.0):
            np.testing.assert_allclose(
                kquad_density(mu, k), kquad_density(1.0 - mu, k), atol=1e-12
            )

    def test_model_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            KQuadModel(k=13.0)


class TestSampler:
    def test_uniform_at_k_zero(self):
        s = sample_kquad(0.0, 100_000, seed=1)
        d = stats.kstest(s, "uniform")
        assert d.statistic < 0.02

    @pytest.mark.parametrize("k", [-6.0, -2.0, 3.0, 12.0])
    def test_mean_half_by_symmetry(self, k):
        s = sample_kquad(k, 100_000, seed=2)
        assert s.mean() == pytest.approx(0.5, abs=0.01)

    def test_histogram_matches_density(self):
        # 4e6 draws keep the per-bin MC noise well under the 2% gate.
        k = 8.0
        s = sample_kquad(k, 4_000_000, seed=3)
        counts, edges = np.histogram(s, bins=50, range=(0, 1))
        centers = (edges[:-1] + edges[1:]) / 2
        density = counts * 50 / counts.sum()
        expected = kquad_density(centers, k)
        mask = expected > 0.2
        rel = np.abs(density[mask] - expected[mask]) / expected[mask]
        assert rel.max() < 0.02

    def test_deterministic_given_seed(self):
        np.testing.assert_array_equal(
            sample_kquad(5.0, 1000, seed=9), sample_kquad(5.0, 1000, seed=9)
        )


class TestFitK:
    @pytest.mark.parametrize("k", [-4.0, 0.0, 4.0, 8.0])
    def test_recovers_planted_k(self, k):
        s = sample_kquad(k, 1_000_000, seed=11)
        assert fit_k(s).k == pytest.approx(k, abs=0.5)

    def test_clamp_boundary_one_sided(self):
        s = sample_kquad(12.0, 1_000_000, seed=12)
        fitted = fit_k(s).k
        assert 11.0 <= fitted <= 12.0

    def test_uniform_fits_near_zero(self, rng):
        assert abs(fit_k(rng.random(200_000)).k) < 0.5

    def test_gaussian_mid_samples_fit_negative(self, rng):
        s = np.clip(0.5 + 0.15 * rng.standard_normal(200_000), 0, 1)
        assert fit_k(s).k < 0

    def test_too_few_samples_rejected(self):
        with pytest.raises(EstimationError):
            fit_k(np.linspace(0, 1, 99))


class TestPatchStats:
    def test_constant_patches_recovered(self):
        img = synth_kquad_image(10.0, 128, 128, patch_size=16, seed=4)
        ps = patch_stats(img, 16)
        assert ps.means.size == 64
        np.testing.assert_allclose(ps.sigmas, 0.0, atol=1e-12)

    def test_partial_patches_dropped(self, rng):
        ps = patch_stats(rng.random((40, 50)), 16)
        assert ps.means.size == 2 * 3

    def test_image_fit_matches_sample_fit(self):
        img = synth_kquad_image(8.0, 512, 512, seed=5)
        k_img = fit_k_image(img).k
        assert k_img == pytest.approx(8.0, abs=1.0)


class TestGradVarMc:
    def test_variance_ordering_and_affinity(self):
        res = grad_var_mc(seed=3)
        assert isinstance(res, GradVarResult)
        # Strictly increasing in k, including the endpoints from the claim.
        assert np.all(np.diff(res.variances) > 0)
        assert res.r_squared > 0.95
        assert res.slope > 0

    def test_label_scale_quadruples_slope(self):
        base = grad_var_mc(seed=3)
        doubled = grad_var_mc(seed=3, label_scale=2.0)
        assert doubled.slope / base.slope == pytest.approx(4.0, rel=0.15)

    def test_large_eta_rejected(self):
        with pytest.raises(ValueError):
            grad_var_mc(eta=0.5)

    def test_deterministic(self):
        a = grad_var_mc(n_trials=2000, seed=7)
        b = grad_var_mc(n_trials=2000, seed=7)
        np.testing.assert_array_equal(a.variances, b.variances)


class TestBnVarMc:
    @pytest.fixture(scope="class")
    @staticmethod
    def full_scale_curve():
        # Full 500x500 scale; the k=0 vs k=2 gap is small and needs it.
        return bn_var_mc(BnSimConfig())

    def test_monotone_in_k(self, full_scale_curve):
        res = full_scale_curve
        rho = spearman_rho(res.k_values, res.values)
        assert rho >= 0.9
        assert res.values[-1] > 2.0 * res.values[0]

    def test_minimum_at_low_end(self, full_scale_curve):
        assert full_scale_curve.values.argmin() == 0

    def test_halving_batches_stable(self):
        full = bn_var_mc(BnSimConfig(n_batches=400, n_repeats=200))
        half = bn_var_mc(BnSimConfig(n_batches=200, n_repeats=200))
        rel = np.abs(half.values - full.values) / full.values
        assert rel.max() < 0.10

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BnSimConfig(batch_size=1)
        with pytest.raises(ValueError):
            BnSimConfig(k_grid=())


class TestGammaRegularization:
    def test_night_raw_images_k_drops(self):
        wins = 0
        for seed in range(10):
            img = synth_night_raw_image(seed=seed)
            k_before, k_after = gamma_k_report(img)
            assert k_before >= 6.0
            wins += k_after < k_before
        assert wins >= 9

    def test_uniform_image_stays_small(self, rng):
        img = np.kron(rng.random((32, 32)), np.ones((16, 16)))
        k_before, k_after = gamma_k_report(img)
        assert abs(k_before) < 0.7

    def test_midtone_gaussian_reported(self, rng):
        means = np.clip(0.5 + 0.12 * rng.standard_normal((32, 32)), 0, 1)
        img = np.kron(means, np.ones((16, 16)))
        k_before, k_after = gamma_k_report(img)
        assert k_before < 0  # bell-shaped regime, reported without claim
