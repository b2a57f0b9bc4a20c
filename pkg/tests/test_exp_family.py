import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from idtdetect.exp_family import (
    COV_REG,
    GaussianFamily,
    GaussianMember,
    SufficientStatsAccumulator,
    accumulate,
    fit_moment_match,
    log_density,
    min_count,
    point_loss,
    stat_dim,
    sufficient_stats,
)


def acc_of(samples):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    acc = SufficientStatsAccumulator(stat_dim(samples.shape[1]))
    for x in samples:
        acc.accumulate(sufficient_stats(x))
    return acc


class TestSufficientStats:
    def test_2d(self):
        np.testing.assert_array_equal(sufficient_stats([1.0, 2.0]), [1, 2, 1, 2, 4])

    def test_zero(self):
        np.testing.assert_array_equal(sufficient_stats([0.0, 0.0]), np.zeros(5))

    def test_1d(self):
        np.testing.assert_array_equal(sufficient_stats([3.0]), [3, 9])

    def test_batch_matches_rows(self):
        X = np.random.default_rng(0).normal(size=(6, 3))
        batch = sufficient_stats(X)
        assert batch.shape == (6, stat_dim(3))
        for row, x in zip(batch, X):
            np.testing.assert_array_equal(row, sufficient_stats(x))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            sufficient_stats([1.0, np.nan])


class TestAccumulate:
    def test_first_sample_is_mean(self):
        acc = accumulate(SufficientStatsAccumulator(1), [4.0])
        assert acc.count == 1 and acc.running_mean[0] == 4.0

    def test_second_sample(self):
        acc = accumulate(SufficientStatsAccumulator(1, np.array([4.0]), 1), [0.0])
        assert acc.count == 2 and acc.running_mean[0] == 2.0

    def test_three_samples(self):
        acc = SufficientStatsAccumulator(1)
        for v in (1.0, 2.0, 3.0):
            acc = accumulate(acc, [v])
        assert acc.running_mean[0] == pytest.approx(2.0)

    def test_functional_form_leaves_input(self):
        acc = SufficientStatsAccumulator(1)
        accumulate(acc, [5.0])
        assert acc.count == 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            SufficientStatsAccumulator(2).accumulate([1.0])


class TestFit:
    def test_four_corners(self):
        pts = [(0, 0), (2, 0), (0, 2), (2, 2)]
        m = fit_moment_match(acc_of(pts))
        np.testing.assert_allclose(m.mean, [1, 1])
        # population covariance is I; loading is COV_REG * max(trace/d, 1)
        np.testing.assert_allclose(m.covariance, (1 + COV_REG) * np.eye(2), atol=1e-12)

    def test_cold_start(self):
        m = fit_moment_match(SufficientStatsAccumulator(5))
        np.testing.assert_array_equal(m.mean, [0, 0])
        np.testing.assert_array_equal(m.covariance, np.eye(2))

    def test_cold_start_below_min_count_uses_sample_mean(self):
        m = fit_moment_match(acc_of([(1.0, 3.0), (3.0, 5.0)]))
        assert min_count(2) > 2
        np.testing.assert_allclose(m.mean, [2, 4])
        np.testing.assert_array_equal(m.covariance, np.eye(2))

    def test_zero_variance_floor(self):
        m = fit_moment_match(acc_of([[1.0]] * 4))
        assert m.mean[0] == pytest.approx(1.0)
        assert m.covariance[0, 0] == pytest.approx(COV_REG, rel=1e-6)

    def test_matches_numpy_population_moments(self):
        X = np.random.default_rng(3).normal(size=(200, 3)) @ np.array([[1, 0, 0], [0.5, 2, 0], [0, 0.3, 0.7]])
        m = fit_moment_match(acc_of(X), reg=0.0)
        np.testing.assert_allclose(m.mean, X.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(m.covariance, np.cov(X.T, bias=True), atol=1e-10)

    def test_family_wrapper(self):
        fam = GaussianFamily(2)
        acc = fam.accumulator()
        for x in [(0, 0), (2, 0), (0, 2), (2, 2)]:
            acc.accumulate(fam.sufficient_stats(x))
        np.testing.assert_allclose(fam.fit(acc).mean, [1, 1])


class TestLogDensity:
    def test_standard_1d(self):
        assert log_density(GaussianMember.standard(1), [0.0]) == pytest.approx(-0.9189385332, abs=1e-9)

    def test_standard_2d(self):
        assert log_density(GaussianMember.standard(2), [0.0, 0.0]) == pytest.approx(-1.8378770664, abs=1e-9)

    def test_translation_at_mode(self):
        shifted = GaussianMember([3.0, -2.0], np.eye(2))
        assert shifted.log_density([3.0, -2.0]) == pytest.approx(GaussianMember.standard(2).log_density([0, 0]))

    def test_against_scipy(self):
        cov = np.array([[0.14, 0.2], [0.2, 0.4]])
        m = GaussianMember([1.0, -1.0], cov)
        X = np.random.default_rng(1).normal(size=(20, 2))
        np.testing.assert_allclose(m.log_density(X), multivariate_normal([1, -1], cov).logpdf(X), rtol=1e-10)

    def test_density_1d_scipy(self):
        m = GaussianMember([0.5], [[2.0]])
        assert m.density([1.3]) == pytest.approx(norm(0.5, math.sqrt(2.0)).pdf(1.3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            GaussianMember.standard(2).log_density([1.0, 2.0, 3.0])


class TestPointLoss:
    def test_standard_1d(self):
        assert point_loss(GaussianMember.standard(1), [0.0]) == pytest.approx(0.9189385332, abs=1e-9)

    def test_standard_2d(self):
        assert point_loss(GaussianMember.standard(2), [0.0, 0.0]) == pytest.approx(1.8378770664, abs=1e-9)

    def test_natural_parameter_form_agrees_with_log_density(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(3, 3))
        m = GaussianMember(rng.normal(size=3), A @ A.T + np.eye(3))
        for x in rng.normal(size=(10, 3)):
            assert point_loss(m, x) + log_density(m, x) == pytest.approx(0.0, abs=1e-9)
