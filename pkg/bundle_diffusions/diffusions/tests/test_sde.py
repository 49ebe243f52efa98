import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from diffusions.exceptions import ConfigurationError, StepSizeError
from diffusions.groups import ROTATION_GENERATOR, SpecialOrthogonalGroup
from diffusions.sde import (
    BrownianPath, convergence_order, grid_size, integrate_group, integrate_stratonovich, refine, rotation_angle,
    sample_batch, sample_brownian, strat_correction,
)
from diffusions.scenarios import get_scenario
from diffusions.statistics import max_cross_correlation


class BrownianPathTests(SimpleTestCase):
    def test_same_seed_and_stream_give_identical_increments(self):
        first = sample_brownian(3, 0.5, 1e-3, seed=42, stream=7)
        second = sample_brownian(3, 0.5, 1e-3, seed=42, stream=7)
        assert_array_equal(first.increments, second.increments)

    def test_streams_are_uncorrelated(self):
        first = sample_brownian(1, 10.0, 1e-3, seed=42, stream=0)
        second = sample_brownian(1, 10.0, 1e-3, seed=42, stream=1)
        self.assertLess(max_cross_correlation(first.increments, second.increments) * np.sqrt(first.n_steps), 5.0)

    def test_increment_variance_is_dt(self):
        path = sample_brownian(4, 20.0, 1e-3, seed=1)
        self.assertAlmostEqual(float(np.var(path.increments)) / 1e-3, 1.0, delta=0.02)

    def test_grid_must_be_integral(self):
        self.assertEqual(grid_size(1.0, 0.25), 4)
        with self.assertRaises(ConfigurationError):
            grid_size(1.0, 0.3)
        with self.assertRaises(ConfigurationError):
            grid_size(1.0, -0.1)

    def test_coarsen_sums_increments(self):
        path = sample_brownian(2, 1.0, 0.125, seed=3)
        coarse = path.coarsen(2)
        self.assertEqual(coarse.n_steps, 4)
        self.assertEqual(coarse.dt, 0.25)
        assert_allclose(coarse.values()[-1], path.values()[-1])
        with self.assertRaises(ConfigurationError):
            path.coarsen(3)

    def test_window_keeps_time_offset(self):
        path = sample_brownian(1, 1.0, 0.1, seed=3)
        window = path.window(4, 10)
        self.assertAlmostEqual(window.grid[0], 0.4)
        self.assertEqual(window.n_steps, 6)

    def test_batch_stacks_streams(self):
        batch = sample_batch(2, 0.1, 0.01, seed=5, streams=range(3))
        self.assertEqual(batch.increments.shape, (10, 3, 2))
        assert_array_equal(batch.increments[:, 1], sample_brownian(2, 0.1, 0.01, seed=5, stream=1).increments)

    def test_zero_path(self):
        path = BrownianPath.zeros(2, 1.0, 0.5)
        assert_array_equal(path.increments, np.zeros((2, 2)))


class IntegrationTests(SimpleTestCase):
    def test_sphere_paths_stay_on_the_sphere(self):
        system = get_scenario('s2-gradient').base_system
        path = sample_brownian(3, 0.2, 1e-3, seed=9)
        sample = integrate_stratonovich(system, np.array([0.0, 0.6, 0.8]), path)
        self.assertLess(sample.constraint_residual(), 1e-12)
        self.assertEqual(sample.points.shape, (201, 3))

    def test_batched_integration_matches_single_paths(self):
        system = get_scenario('s2-gradient').base_system
        batch = sample_batch(3, 0.05, 1e-3, seed=9, streams=range(2))
        x0 = np.array([0.0, 0.6, 0.8])
        together = integrate_stratonovich(system, x0, batch)
        alone = integrate_stratonovich(system, x0, sample_brownian(3, 0.05, 1e-3, seed=9, stream=1))
        assert_allclose(together.points[:, 1], alone.points, atol=1e-12)

    def test_abelian_group_path_has_closed_form(self):
        group = SpecialOrthogonalGroup(2)
        path = sample_brownian(1, 1.0, 1e-3, seed=4)
        coefficient = lambda k, g: ((0.7 * ROTATION_GENERATOR)[:, :, None], 0.3 * ROTATION_GENERATOR)
        final = integrate_group(group, coefficient, path).final
        angle = 0.7 * path.values()[-1, 0] + 0.3
        expected = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        assert_allclose(final, expected, atol=1e-10)
        self.assertAlmostEqual(rotation_angle(final), np.arctan2(np.sin(angle), np.cos(angle)), places=10)

    def test_large_group_steps_are_refused(self):
        group = SpecialOrthogonalGroup(2)
        path = BrownianPath(np.array([[10.0]]), 1.0)
        coefficient = lambda k, g: (ROTATION_GENERATOR[:, :, None], np.zeros((2, 2)))
        with self.assertRaises(StepSizeError):
            integrate_group(group, coefficient, path)

    def test_stratonovich_correction_on_the_sphere(self):
        system = get_scenario('s2-gradient').base_system
        x = system.manifold.random_point(np.random.default_rng(0))
        assert_allclose(strat_correction(lambda y: np.outer(y, y), system, x), x, atol=1e-6)


class OrderTests(SimpleTestCase):
    def test_heun_is_second_order_without_noise(self):
        estimate = convergence_order('torus-drift', seed=1, n_paths=2, levels=3)
        self.assertGreater(estimate.order, 1.8)

    def test_unknown_case(self):
        with self.assertRaises(ConfigurationError):
            convergence_order('s3-rotation', seed=1)

    def test_refine_on_an_exact_measure(self):
        estimate = refine(lambda path: 0.0, 1, 0.1, 1e-3, 3, seed=0, streams=range(2))
        self.assertTrue(estimate.exact)
