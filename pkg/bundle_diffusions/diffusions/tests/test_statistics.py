import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from diffusions.exceptions import InsufficientSamplesError, OrderEstimateError
from diffusions.statistics import (
    fit_constant, fit_order, max_cross_correlation, mean_estimate, moment_z_score, variance_z_score,
)


class MeanEstimateTests(SimpleTestCase):
    def test_mean_of_constants(self):
        estimate = mean_estimate(np.full(10, 2.5))
        self.assertEqual(estimate.mean, 2.5)
        self.assertEqual(estimate.standard_error, 0.0)

    def test_needs_two_samples(self):
        with self.assertRaises(InsufficientSamplesError):
            mean_estimate([1.0])

    def test_z_score_in_standard_errors(self):
        estimate = mean_estimate(np.array([0.0, 2.0, 0.0, 2.0]))
        self.assertAlmostEqual(estimate.z_score(1.0 + float(estimate.standard_error)), 1.0)

    def test_variance_of_gaussian_samples(self):
        samples = np.random.default_rng(0).standard_normal(20000) * 0.1
        self.assertLess(variance_z_score(samples, 0.01), 4.0)


class CorrelationTests(SimpleTestCase):
    def test_stream_with_itself(self):
        a = np.random.default_rng(1).standard_normal((100, 1))
        self.assertAlmostEqual(max_cross_correlation(a, a), 1.0)

    def test_identical_laws_have_small_moment_gap(self):
        rng = np.random.default_rng(2)
        self.assertLess(moment_z_score(rng.standard_normal((500, 2)), rng.standard_normal((500, 2))), 4.0)


class OrderFitTests(SimpleTestCase):
    def test_synthetic_first_order(self):
        dts = 0.05 / 2.0 ** np.arange(5)
        estimate = fit_order(dts, 0.3 * dts)
        self.assertAlmostEqual(estimate.order, 1.0, delta=0.05)
        self.assertAlmostEqual(estimate.constant, 0.3, places=8)

    def test_second_order_in_any_level_order(self):
        dts = np.array([1e-3, 4e-3, 2e-3])
        self.assertAlmostEqual(fit_order(dts, 5.0 * dts ** 2).order, 2.0, places=8)

    def test_errors_below_floor_are_exact(self):
        estimate = fit_order([4e-3, 2e-3], [1e-15, 2e-15])
        self.assertTrue(estimate.exact)
        self.assertEqual(str(estimate), 'exact at every level')

    def test_non_decreasing_errors_raise(self):
        with self.assertRaises(OrderEstimateError):
            fit_order([4e-3, 2e-3, 1e-3], [1e-3, 2e-3, 1e-4])

    def test_constant_is_the_worst_ratio(self):
        assert_allclose(fit_constant([2e-3, 1e-3], [4e-3, 1e-3]), 2.0)
