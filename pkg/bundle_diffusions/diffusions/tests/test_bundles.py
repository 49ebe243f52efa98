import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from diffusions.bundles import (
    BundlePoint, FrameBundle, SemiConnection, associated_covariant_derivative, equivariance_alpha_beta,
    equivariance_probe, predicted_derivative_coefficients, verticality_check, weitzenbock_on_oneform,
)
from diffusions.exceptions import ConfigurationError, DomainError
from diffusions.lw_connection import adjoint_covariant_derivative
from diffusions.manifolds import Sphere, ambient_function_library, function_library, one_form_library
from diffusions.scenarios import PRODUCT_DRIFT, PRODUCT_NOISE, get_scenario


class FrameBundleTests(SimpleTestCase):
    def setUp(self):
        self.bundle = FrameBundle(Sphere(2))
        self.rng = np.random.default_rng(2)

    def test_split_inverts_join(self):
        b = self.bundle.random_point(self.rng)
        x, frame = self.bundle.split(b)
        assert_allclose(self.bundle.join(x, frame), b)
        self.assertEqual(frame.shape, (3, 2))

    def test_right_action_composes(self):
        b = self.bundle.random_point(self.rng)
        a = self.bundle.group.random_element(self.rng)
        c = self.bundle.group.random_element(self.rng)
        assert_allclose(self.bundle.act(self.bundle.act(b, a), c), self.bundle.act(b, a @ c), atol=1e-12)

    def test_fundamental_fields_are_vertical(self):
        b = self.bundle.random_point(self.rng)
        for xi in self.bundle.group.basis.matrices:
            assert_allclose(self.bundle.push_vector(self.bundle.fundamental(b, xi)), np.zeros(3))

    def test_bundle_point_checks_the_frame(self):
        b = self.bundle.random_point(self.rng)
        self.assertEqual(BundlePoint(self.bundle, b).x.shape, (3,))
        x, _ = self.bundle.split(b)
        with self.assertRaises(DomainError):
            BundlePoint(self.bundle, self.bundle.join(x, np.column_stack([x, x])))


class SemiConnectionTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s2-frames')
        self.bundle = self.scenario.bundle
        self.rng = np.random.default_rng(4)
        self.decomposition = self.scenario.decomposition(rng=np.random.default_rng(0))
        self.connection = self.decomposition.connection

    def test_generator_is_equivariant(self):
        points = self.scenario.probe_points(self.rng, 5)
        self.assertLess(equivariance_probe(self.scenario.generator, points, self.rng), 1e-8)

    def test_horizontal_lift_projects_to_v(self):
        b = self.scenario.start_point()
        v = self.scenario.manifold.random_tangent(self.scenario.x0, self.rng)
        assert_allclose(self.bundle.push_vector(self.connection.horizontal_lift(b, v)), v, atol=1e-10)

    def test_horizontal_lift_is_equivariant(self):
        b = self.scenario.start_point()
        v = self.scenario.manifold.random_tangent(self.scenario.x0, self.rng)
        a = self.bundle.group.random_element(self.rng)
        moved = self.connection.horizontal_lift(self.bundle.act(b, a), v)
        assert_allclose(moved, self.bundle.act(self.connection.horizontal_lift(b, v), a), atol=1e-10)

    def test_lift_rejects_vectors_outside_e(self):
        b = self.scenario.start_point()
        with self.assertRaises(DomainError):
            self.connection.horizontal_lift(b, self.scenario.x0)

    def test_connection_form_reproduces_algebra_and_kills_lifts(self):
        b = self.scenario.start_point()
        for xi in self.bundle.group.basis.matrices:
            assert_allclose(self.connection.connection_form(b, self.bundle.fundamental(b, xi)), xi, atol=1e-10)
        v = self.scenario.manifold.random_tangent(self.scenario.x0, self.rng)
        assert_allclose(self.connection.connection_form(b, self.connection.horizontal_lift(b, v)), np.zeros((2, 2)), atol=1e-10)

    def test_unknown_completion(self):
        with self.assertRaises(ConfigurationError):
            SemiConnection(self.scenario.generator, completion='flat')

    def test_alpha_is_positive_semidefinite_and_equivariant(self):
        coeffs = self.decomposition.coeffs
        b = self.scenario.start_point()
        self.assertGreater(np.linalg.eigvalsh(coeffs.alpha(b))[0], -1e-10)
        report = equivariance_alpha_beta(coeffs, self.bundle, b, self.bundle.group.random_element(self.rng))
        self.assertLess(report.max_defect, 1e-5)

    def test_vertical_part_is_vertical(self):
        f1s = ambient_function_library(self.bundle.ambient_dim)[:1]
        f2s = function_library(self.scenario.manifold)[:2]
        points = [self.scenario.start_point()]
        vertical = verticality_check(self.decomposition.vertical_apply, self.bundle, f1s, f2s, points)
        horizontal = verticality_check(self.decomposition.horizontal_apply, self.bundle, f1s, f2s, points)
        self.assertLess(vertical.max_defect, 1e-5)
        self.assertGreater(horizontal.max_defect, 1e-3)


class DerivativeFlowCoefficientTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s2-gradient')
        self.decomposition = self.scenario.derivative_decomposition(rng=np.random.default_rng(0))
        self.u = self.scenario.start_point()

    def test_coefficients_match_the_connection_prediction(self):
        basis = self.scenario.bundle.group.basis
        alpha, beta = predicted_derivative_coefficients(self.scenario.base_system, self.scenario.bundle, self.u, basis)
        assert_allclose(self.decomposition.coeffs.alpha(self.u), alpha, atol=1e-4)
        assert_allclose(self.decomposition.coeffs.beta(self.u), beta, atol=1e-4)

    def test_weitzenbock_term_is_minus_half_ricci(self):
        phi = one_form_library(self.scenario.manifold)[0]
        report = weitzenbock_on_oneform(
            self.scenario.bundle, self.u, phi, self.decomposition.coeffs, self.scenario.base_system,
        )
        x, frame = self.scenario.bundle.split(self.u)
        expected = -0.5 * phi.covector(x) @ frame
        assert_allclose(report.way_coefficients, expected, atol=1e-4)
        assert_allclose(report.way_ricci, expected, atol=1e-3)


class ProductGeneratorTests(SimpleTestCase):
    def test_decomposition_returns_the_vertical_noise(self):
        scenario = get_scenario('trivial-bundle-so2')
        coeffs = scenario.decomposition(rng=np.random.default_rng(0)).coeffs
        for b in scenario.probe_points(np.random.default_rng(1), 3):
            assert_allclose(coeffs.alpha(b), [[0.5 * PRODUCT_NOISE ** 2]], atol=1e-8)
            assert_allclose(coeffs.beta(b), [PRODUCT_DRIFT], atol=1e-8)

    def test_completion_does_not_change_coefficients(self):
        scenario = get_scenario('trivial-bundle-so2')
        ambient = scenario.decomposition(rng=np.random.default_rng(0)).coeffs
        twisted = scenario.decomposition('twisted', rng=np.random.default_rng(0)).coeffs
        b = scenario.start_point()
        assert_allclose(twisted.alpha(b), ambient.alpha(b), atol=1e-6)
        assert_allclose(twisted.beta(b), ambient.beta(b), atol=1e-6)


class AssociatedDerivativeTests(SimpleTestCase):
    def setUp(self):
        self.scenario = get_scenario('s2-gradient')
        self.connection = self.scenario.derivative_decomposition(rng=np.random.default_rng(0)).connection
        self.rng = np.random.default_rng(6)

    def field(self, y):
        return self.scenario.manifold.tangent_projector(y) @ np.array([0.3, -0.4, 0.8])

    def test_does_not_depend_on_the_frame(self):
        bundle = self.scenario.bundle
        b = self.scenario.start_point()
        w = self.scenario.manifold.random_tangent(self.scenario.x0, self.rng)
        a = bundle.group.random_element(self.rng, 0.3)
        assert_allclose(
            associated_covariant_derivative(self.connection, self.field, bundle.act(b, a), w),
            associated_covariant_derivative(self.connection, self.field, b, w),
            atol=1e-5,
        )

    def test_is_the_adjoint_connection(self):
        w = self.scenario.manifold.random_tangent(self.scenario.x0, self.rng)
        expected = adjoint_covariant_derivative(self.scenario.base_system, self.field, self.scenario.x0, w)
        assert_allclose(
            associated_covariant_derivative(self.connection, self.field, self.scenario.start_point(), w),
            expected, atol=1e-5,
        )

    def test_needs_a_frame_bundle(self):
        scenario = get_scenario('trivial-bundle-so2')
        connection = scenario.decomposition(rng=np.random.default_rng(0)).connection
        with self.assertRaises(ConfigurationError):
            associated_covariant_derivative(connection, self.field, scenario.start_point(), np.zeros(3))
