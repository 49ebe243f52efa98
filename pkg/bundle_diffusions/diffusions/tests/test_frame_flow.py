from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from diffusions.bundles import FrameBundle
from diffusions.exceptions import FrameDegenerationError
from diffusions.frame_flow import (
    check_frames, concatenation_check, conformality_defect, derivative_flow, equivariance_in_law,
    fibre_linear_function, horizontal_lift_path, horizontal_transport_defect, reconstruct_and_compare,
    reconstruction_refinement, small_time_generator_check,
)
from diffusions.manifolds import Sphere, one_form_library
from diffusions.scenarios import get_scenario
from diffusions.sde import sample_brownian

DT = 1e-3


class SkewProductTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('torus-flat')
        self.decomposition = self.scenario.decomposition(rng=np.random.default_rng(0))
        m = self.scenario.generator.system.n_fields
        self.path = sample_brownian(m, 0.2, DT, seed=3)

    def test_reconstruction_follows_the_direct_path(self):
        run = reconstruct_and_compare(self.decomposition, self.scenario.start_point(), self.path)
        self.assertEqual(run.defects.shape, (self.path.n_steps + 1,))
        self.assertEqual(run.defects[0], 0.0)
        self.assertLess(run.max_defect, 50 * DT)

    def test_group_path_starts_at_the_identity(self):
        run = reconstruct_and_compare(self.decomposition, self.scenario.start_point(), self.path)
        assert_allclose(run.group_path.elements[0], np.eye(2))

    def test_concatenation_at_the_midpoint(self):
        report = concatenation_check(
            self.decomposition, self.scenario.start_point(), self.path, self.path.n_steps // 2,
        )
        self.assertEqual(report.split, self.path.n_steps // 2)
        self.assertLess(report.max_defect, 50 * DT)

    def test_reconstruction_defect_shrinks_with_the_step(self):
        estimate = reconstruction_refinement(
            self.decomposition, self.scenario.start_point(), seed=14, horizon=0.2, fine_dt=DT, levels=3, n_paths=4,
        )
        self.assertEqual(len(estimate.dts), 3)
        self.assertTrue(estimate.exact or estimate.order > 0.5, str(estimate))


class DerivativeFlowTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s2-gradient')
        self.path = sample_brownian(3, 0.1, DT, seed=5)

    def test_gradient_flow_on_the_sphere_is_conformal(self):
        sample = derivative_flow(self.scenario.base_system, self.scenario.x0, self.scenario.start_frame(), self.path)
        self.assertLess(conformality_defect(self.scenario.bundle, sample), 20 * DT)

    def test_horizontal_lift_is_parallel_transport(self):
        decomposition = self.scenario.derivative_decomposition(rng=np.random.default_rng(0))
        lift = horizontal_lift_path(decomposition, self.scenario.start_point(), self.path)
        self.assertLess(horizontal_transport_defect(self.scenario.bundle, lift), 10 * DT)

    def test_pathwise_equivariance(self):
        g = self.scenario.bundle.group.random_element(np.random.default_rng(1))
        report = equivariance_in_law(
            self.scenario.generator, self.scenario.start_point(), g, horizon=0.05, dt=DT, seed=7, n_paths=4,
        )
        self.assertLess(report.pathwise_defect, 1e-9)
        self.assertTrue(np.isfinite(report.moment_z))

    def test_degenerate_frames_are_reported(self):
        bundle = FrameBundle(Sphere(2))
        x = np.array([0.0, 0.0, 1.0])
        good = bundle.join(x, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
        flat = bundle.join(x, np.array([[1.0, 1.0], [0.0, 1e-14], [0.0, 0.0]]))
        sample = SimpleNamespace(points=np.array([good, flat]), times=np.array([0.0, 0.5]))
        with self.assertRaises(FrameDegenerationError):
            check_frames(bundle, sample)


class SmallTimeTests(SimpleTestCase):
    def test_direct_generator_matches_the_split(self):
        scenario = get_scenario('s2-gradient')
        decomposition = scenario.derivative_decomposition(rng=np.random.default_rng(0))
        phi = one_form_library(scenario.manifold)[0]
        report = small_time_generator_check(
            decomposition, phi, scenario.start_point(), horizon=0.01, dt=DT, n_paths=2000, seed=2, chunk=500,
        )
        self.assertEqual(report.monte_carlo.shape, (2,))
        self.assertLess(report.split_defect, 1e-3)

    def test_fibre_linear_function(self):
        scenario = get_scenario('s2-gradient')
        phi = one_form_library(scenario.manifold)[0]
        b = scenario.start_point()
        x, frame = scenario.bundle.split(b)
        function = fibre_linear_function(scenario.bundle, phi, [1.0, 0.0])
        self.assertAlmostEqual(function(b), float(phi.covector(x) @ frame[:, 0]))
