import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from diffusions.diffeo_flow import (
    cloud, composite_check, glm_homomorphism, glm_refinement, grid_inversion, grid_tolerance, horizontal_lift_ode,
    nearest_preimages, noise_correlation, noise_split, theta_base_defect, theta_flow, xi_flow,
)
from diffusions.exceptions import DomainError
from diffusions.manifolds import FlatTorus, Sphere
from diffusions.scenarios import get_scenario
from diffusions.sde import integrate_stratonovich, sample_batch, sample_brownian

DT = 1e-3


class CloudTests(SimpleTestCase):
    def test_sphere_cloud_starts_at_x0(self):
        x0 = np.array([0.0, 0.6, 0.8])
        points = cloud(Sphere(2), 10, x0)
        self.assertEqual(points.shape, (10, 3))
        assert_allclose(points[0], x0)
        assert_allclose(np.linalg.norm(points, axis=1), np.ones(10))

    def test_circle_cloud_is_evenly_spaced(self):
        points = cloud(Sphere(1), 8, np.array([1.0, 0.0]))
        assert_allclose(points[0], [1.0, 0.0], atol=1e-15)
        self.assertAlmostEqual(grid_tolerance(Sphere(1), points), 2.0 * np.sin(np.pi / 8))

    def test_torus_cloud_is_a_shifted_grid(self):
        points = cloud(FlatTorus(2), 10, np.array([0.3, 1.1]))
        self.assertEqual(points.shape, (10, 2))
        assert_allclose(points[0], [0.3, 1.1])

    def test_unsupported_manifold(self):
        with self.assertRaises(DomainError):
            cloud(Sphere(3), 10, np.array([1.0, 0.0, 0.0, 0.0]))

    def test_nearest_preimages(self):
        torus = FlatTorus(2)
        images = np.array([[0.1, 0.1], [3.0, 3.0], [6.2, 0.1]])
        index, residual = nearest_preimages(torus, images, np.array([[6.25, 0.1], [0.1, 0.1]]))
        assert_array_equal(index, [2, 0])
        assert_allclose(residual, [0.05, 0.0], atol=1e-12)


class ThetaFlowTests(SimpleTestCase):
    def test_theta_equals_xi_for_full_rank_constant_fields(self):
        system = get_scenario('torus-flat').base_system
        sources = cloud(system.manifold, 10, np.array([0.3, 1.1]))
        path = sample_brownian(2, 0.2, DT, seed=1)
        theta = theta_flow(system, sources, path)
        xi = xi_flow(system, sources, path)
        assert_allclose(system.manifold.distance(theta.images, xi.images), 0.0, atol=1e-10)
        self.assertLess(theta_base_defect(system, sources[0], path), 1e-10)

    def test_theta_keeps_frames_when_asked(self):
        scenario = get_scenario('s2-gradient')
        path = sample_brownian(3, 0.05, DT, seed=2)
        theta = theta_flow(scenario.base_system, np.array([scenario.x0]), path, scenario.start_frame())
        self.assertEqual(theta.frames.shape, (path.n_steps + 1, 3, 2))
        self.assertEqual(len(theta.final), 1)

    def test_theta_derivative_is_the_horizontal_lift(self):
        scenario = get_scenario('s2-gradient')
        decomposition = scenario.derivative_decomposition(rng=np.random.default_rng(0))
        path = sample_brownian(3, 0.05, DT, seed=4)
        frames, defect = glm_homomorphism(decomposition, scenario.x0, scenario.start_frame(), path)
        self.assertEqual(frames.shape, (path.n_steps + 1, 3, 2))
        self.assertLess(defect, 20 * DT)

    def test_composite_on_the_flat_torus(self):
        scenario = get_scenario('torus-flat')
        decomposition = scenario.derivative_decomposition(rng=np.random.default_rng(0))
        sources = cloud(scenario.manifold, 17, scenario.x0)
        report = composite_check(decomposition, sources, scenario.start_frame(), sample_brownian(2, 0.1, DT, seed=6))
        self.assertLess(report.base_defect, 1e-10)
        self.assertLess(report.frame_defect, 1e-10)
        self.assertTrue(report.base_fixed)
        self.assertLess(report.grid_ratio, 1e-6)


class CircleCompositeTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scenario = get_scenario('s1-rank1')
        cls.system = cls.scenario.base_system
        cls.sources = cloud(cls.scenario.manifold, 64, cls.scenario.x0)
        cls.path = sample_brownian(2, 0.1, DT, seed=8)
        cls.theta = theta_flow(cls.system, cls.sources, cls.path)
        cls.xi = xi_flow(cls.system, cls.sources, cls.path)

    def test_defects_are_first_order_with_a_nontrivial_group_path(self):
        decomposition = self.scenario.derivative_decomposition(rng=np.random.default_rng(0))
        report = composite_check(decomposition, self.sources, self.scenario.start_frame(), self.path)
        self.assertLess(report.base_defect, 50 * DT)
        self.assertLess(report.frame_defect, 50 * DT)
        self.assertTrue(report.grid.passed, str(report.grid))
        self.assertTrue(report.base_fixed)

    def test_matching_flows_invert_on_the_grid(self):
        grid = grid_inversion(self.scenario.manifold, self.sources, self.theta.images, self.xi.images, DT)
        self.assertTrue(grid.starts_at_identity)
        self.assertTrue(grid.base_fixed)
        self.assertLessEqual(grid.ratio, 1.0)

    def test_rotated_targets_are_rejected(self):
        c, s = np.cos(0.3), np.sin(0.3)
        rotated = self.xi.images @ np.array([[c, s], [-s, c]])
        grid = grid_inversion(self.scenario.manifold, self.sources, self.theta.images, rotated, DT)
        self.assertFalse(grid.starts_at_identity)
        self.assertFalse(grid.base_fixed)
        self.assertEqual(grid.ratio, np.inf)
        self.assertFalse(grid.passed)

    def test_unrelated_targets_are_rejected(self):
        angles = np.random.default_rng(3).uniform(0.0, 2.0 * np.pi, self.xi.images.shape[:2])
        targets = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        grid = grid_inversion(self.scenario.manifold, self.sources, self.theta.images, targets, DT)
        self.assertFalse(grid.passed)


class GlmRefinementTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s2-gradient')
        self.decomposition = self.scenario.derivative_decomposition(rng=np.random.default_rng(0))

    def test_defect_shrinks_with_the_step(self):
        estimate = glm_refinement(
            self.decomposition, self.scenario.x0, self.scenario.start_frame(), seed=12,
            horizon=0.1, fine_dt=DT, levels=3, n_paths=4,
        )
        self.assertTrue(estimate.exact or estimate.order > 0.5, str(estimate))

    def test_glm_map_is_equivariant_in_the_start_frame(self):
        u0 = self.scenario.start_frame()
        h = self.decomposition.generator.bundle.group.random_element(np.random.default_rng(5))
        path = sample_brownian(3, 0.05, DT, seed=9)
        frames, _ = glm_homomorphism(self.decomposition, self.scenario.x0, u0, path)
        moved, _ = glm_homomorphism(self.decomposition, self.scenario.x0, u0 @ h, path)
        assert_allclose(moved, frames @ h, atol=1e-10)


class NoiseSplitTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s1-rank1')
        self.system = self.scenario.base_system

    def test_transport_carries_the_kernel(self):
        path = sample_batch(2, 0.2, DT, seed=3, streams=range(3))
        base = integrate_stratonovich(self.system, self.scenario.x0, path)
        split = noise_split(self.system, base.points, path)
        self.assertEqual(split.transports.shape, (path.n_steps + 1, 3, 2, 2))
        self.assertLess(float(np.max(split.kernel_angles)), 1e-8)
        self.assertLess(float(np.max(split.orthogonality)), 1e-6)
        self.assertEqual(split.reconstruction_defect().shape, (3,))
        self.assertLess(float(np.max(split.reconstruction_defect())), 50 * DT)

    def test_full_rank_systems_have_no_redundant_noise(self):
        system = get_scenario('torus-flat').base_system
        self.assertEqual(noise_correlation(system, np.array([0.3, 1.1]), seed=1, n_paths=4, horizon=0.1, dt=0.01), 0.0)

    def test_relevant_and_redundant_noise_are_uncorrelated(self):
        z = noise_correlation(self.system, self.scenario.x0, seed=5, n_paths=200, horizon=0.1, dt=0.01, chunk=100)
        self.assertLess(z, 5.0)

    def test_horizontal_lift_tracks_the_drift_curve(self):
        sigma, sigma_dot = self.scenario.drift_curve()
        times = np.linspace(0.0, 0.4, 401)
        lift = horizontal_lift_ode(self.system, sigma, sigma_dot, np.array([self.scenario.x0]), times)
        expected = np.array([sigma(t) for t in times])
        assert_allclose(lift.images[:, 0], expected, atol=1e-5)
