import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from diffusions.exceptions import ConfigurationError, ConstantRankError, DomainError
from diffusions.hormander import (
    HormanderSystem, Y_map, Z_field, apply_X, check_constant_rank, delta, is_strongly_cohesive, kernel_projection, polarization_symbol,
    pseudo_inverse, symbol, z_vector_field,
)
from diffusions.manifolds import FlatTorus, OneForm, Sphere, apply_operator, function_library, one_form_library
from diffusions.scenarios import get_scenario


class PseudoInverseTests(SimpleTestCase):
    def test_matches_numpy_on_full_rank(self):
        matrix = np.random.default_rng(0).standard_normal((3, 4))
        assert_allclose(pseudo_inverse(matrix), np.linalg.pinv(matrix), atol=1e-12)

    def test_broadcasts_over_stacks(self):
        stack = np.random.default_rng(1).standard_normal((5, 2, 3))
        inverse = pseudo_inverse(stack)
        self.assertEqual(inverse.shape, (5, 3, 2))
        assert_allclose(stack @ inverse, np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)


class GradientSystemTests(SimpleTestCase):
    def setUp(self):
        self.system = get_scenario('s2-gradient').base_system
        self.sphere = self.system.manifold
        self.rng = np.random.default_rng(5)
        self.x = self.sphere.random_point(self.rng)

    def test_symbol_is_tangent_projector(self):
        assert_allclose(symbol(self.system, self.x).matrix, self.sphere.tangent_projector(self.x), atol=1e-14)
        self.assertEqual(symbol(self.system, self.x).rank, 2)

    def test_right_inverse_on_e(self):
        v = self.sphere.random_tangent(self.x, self.rng)
        assert_allclose(self.system.field_matrix(self.x) @ Y_map(self.system, self.x, v), v, atol=1e-12)

    def test_y_map_rejects_normal_vectors(self):
        with self.assertRaises(DomainError):
            Y_map(self.system, self.x, self.x)

    def test_kernel_is_the_normal_line(self):
        kernel, complement = kernel_projection(self.system, self.x)
        assert_allclose(kernel, np.outer(self.x, self.x), atol=1e-12)
        assert_allclose(kernel + complement, np.eye(3))

    def test_z_field_reproduces_w_at_x(self):
        w = self.sphere.random_tangent(self.x, self.rng)
        assert_allclose(z_vector_field(self.system, self.x, w)(self.x), w, atol=1e-12)

    def test_delta_of_exact_form_is_the_generator(self):
        for f in function_library(self.sphere)[:3]:
            from_delta = delta(self.system, OneForm.exact(f), self.x)
            self.assertAlmostEqual(from_delta, apply_operator(self.system, f, self.x), places=6)

    def test_delta_leibniz_rule(self):
        f = function_library(self.sphere)[2]
        phi = one_form_library(self.sphere)[-1]
        expected = 0.5 * f.gradient(self.x) @ self.system.symbol_matrix(self.x) @ phi.covector(self.x)
        expected += f(self.x) * delta(self.system, phi, self.x)
        self.assertAlmostEqual(delta(self.system, phi.scaled(f), self.x), expected, places=6)

    def test_polarization_gives_the_symbol(self):
        f, g = function_library(self.sphere)[2:4]
        expected = f.gradient(self.x) @ self.system.symbol_matrix(self.x) @ g.gradient(self.x)
        self.assertAlmostEqual(polarization_symbol(self.system, f, g, self.x), expected, places=5)

    def test_strongly_cohesive(self):
        points = [self.sphere.random_point(self.rng) for _ in range(3)]
        self.assertTrue(is_strongly_cohesive(self.system, points).passed)


class ConstantRankTests(SimpleTestCase):
    def test_declared_rank_mismatch_raises(self):
        torus = FlatTorus(2)
        system = HormanderSystem(
            torus,
            fields=lambda x: np.eye(2),
            drift=lambda x: np.zeros(2),
            n_fields=2,
            rank=1,
        )
        with self.assertRaises(ConstantRankError):
            check_constant_rank(system, [np.zeros(2)])

    def test_rank_drop_raises(self):
        torus = FlatTorus(2)
        system = HormanderSystem(
            torus,
            fields=lambda x: np.array([[np.sin(x[0])], [0.0]]),
            drift=lambda x: np.zeros(2),
            n_fields=1,
        )
        with self.assertRaises(ConstantRankError):
            check_constant_rank(system, [np.array([1.0, 0.0]), np.array([0.0, 0.0])])

    def test_validate_rejects_non_tangent_fields(self):
        sphere = Sphere(2)
        system = HormanderSystem(sphere, lambda x: np.eye(3), lambda x: np.zeros(3), 3)
        with self.assertRaises(ConfigurationError):
            system.validate([np.array([0.0, 0.0, 1.0])])


class TangentValuedMapTests(SimpleTestCase):
    def setUp(self):
        self.system = get_scenario('s2-gradient').base_system
        self.rng = np.random.default_rng(8)
        self.x = self.system.manifold.random_point(self.rng)

    def test_apply_x(self):
        e = self.rng.standard_normal(3)
        assert_allclose(apply_X(self.system, self.x, e).vec, self.system.field_matrix(self.x) @ e, atol=1e-14)

    def test_z_field_reproduces_w_at_x(self):
        w = self.system.manifold.random_tangent(self.x, self.rng)
        assert_allclose(Z_field(self.system, self.x, w, self.x).vec, w, atol=1e-12)
