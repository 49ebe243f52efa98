import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from diffusions.exceptions import DomainError, RetractionError
from diffusions.hormander import HormanderSystem
from diffusions.manifolds import (
    FlatTorus, Frame, ManifoldPoint, OneForm, ScalarField, SpecialOrthogonal, Sphere, TangentVector, apply_operator,
    function_library, one_form_library, retract, tangent_project,
)


def sphere_gradient_system(sphere):
    return HormanderSystem(sphere, sphere.tangent_projector, lambda x: np.zeros_like(x), sphere.ambient_dim)


class SphereTests(SimpleTestCase):
    def setUp(self):
        self.sphere = Sphere(2)
        self.rng = np.random.default_rng(3)

    def test_retraction_is_idempotent(self):
        x = self.sphere.retraction(self.rng.standard_normal(3))
        assert_allclose(self.sphere.retraction(x), x, atol=1e-15)
        self.assertTrue(self.sphere.contains(x))

    def test_retraction_rejects_origin(self):
        with self.assertRaises(RetractionError):
            self.sphere.retraction(np.zeros(3))

    def test_projector_is_idempotent_with_rank_two(self):
        x = self.sphere.random_point(self.rng)
        projector = self.sphere.tangent_projector(x)
        assert_allclose(projector @ projector, projector, atol=1e-14)
        self.assertEqual(np.linalg.matrix_rank(projector), 2)

    def test_projector_broadcasts_over_points(self):
        points = self.sphere.retraction(self.rng.standard_normal((5, 3)))
        self.assertEqual(self.sphere.tangent_projector(points).shape, (5, 3, 3))

    def test_chord_transport_is_an_isometry_between_tangent_spaces(self):
        x = self.sphere.random_point(self.rng)
        y = self.sphere.retraction(x + 0.2 * self.sphere.random_tangent(x, self.rng))
        v = self.sphere.random_tangent(x, self.rng)
        moved = self.sphere.chord_transport(x, y, v)
        self.assertAlmostEqual(float(np.dot(moved, y)), 0.0, places=12)
        self.assertAlmostEqual(float(np.linalg.norm(moved)), float(np.linalg.norm(v)), places=12)

    def test_generator_of_gradient_system_is_half_laplacian(self):
        system = sphere_gradient_system(self.sphere)
        x1 = function_library(self.sphere)[0]
        x = self.sphere.random_point(self.rng)
        assert_allclose(apply_operator(system, x1, x), -x[0], atol=1e-6)


class TorusTests(SimpleTestCase):
    def test_difference_wraps_around(self):
        torus = FlatTorus(2)
        x = np.array([0.1, 6.2])
        y = np.array([6.2, 0.1])
        difference = torus.difference(x, y)
        self.assertTrue(np.all(np.abs(difference) < 0.5))

    def test_retraction_reduces_modulo_two_pi(self):
        torus = FlatTorus(2)
        assert_allclose(torus.retraction(np.array([2 * np.pi + 0.5, -0.5])), [0.5, 2 * np.pi - 0.5])


class SpecialOrthogonalTests(SimpleTestCase):
    def test_random_point_satisfies_constraint(self):
        group = SpecialOrthogonal(3)
        x = group.random_point(np.random.default_rng(0))
        self.assertTrue(group.contains(x))
        projector = group.tangent_projector(x)
        assert_allclose(projector @ projector, projector, atol=1e-12)


class PointTypeTests(SimpleTestCase):
    def setUp(self):
        self.sphere = Sphere(2)

    def test_point_off_manifold_is_rejected(self):
        with self.assertRaises(DomainError):
            ManifoldPoint(np.array([1.0, 1.0, 0.0]), self.sphere)

    def test_retract_returns_point(self):
        point = retract([0.0, 0.0, 2.0], self.sphere)
        assert_allclose(point.coords, [0.0, 0.0, 1.0])

    def test_tangent_vector_must_be_tangent(self):
        point = ManifoldPoint(np.array([0.0, 0.0, 1.0]), self.sphere)
        with self.assertRaises(DomainError):
            TangentVector(point, np.array([0.0, 0.0, 1.0]))
        projected = tangent_project(point, [1.0, 2.0, 3.0])
        assert_allclose(projected.vec, [1.0, 2.0, 0.0])

    def test_frame_rejects_degenerate_columns(self):
        point = ManifoldPoint(np.array([0.0, 0.0, 1.0]), self.sphere)
        Frame(point, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
        with self.assertRaises(DomainError):
            Frame(point, np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))


class FieldTests(SimpleTestCase):
    def test_product_gradient(self):
        f = ScalarField('x', lambda x: x[0], lambda x: np.array([1.0, 0.0, 0.0]))
        g = ScalarField('y', lambda x: x[1], lambda x: np.array([0.0, 1.0, 0.0]))
        x = np.array([0.6, 0.8, 0.0])
        assert_allclose(f.times(g).gradient(x), [0.8, 0.6, 0.0])

    def test_one_forms_are_linear(self):
        rng = np.random.default_rng(1)
        sphere = Sphere(2)
        x = sphere.random_point(rng)
        for phi in one_form_library(sphere):
            self.assertLess(phi.linearity_defect(sphere, x, rng), 1e-9)

    def test_exact_form_without_gradient_uses_finite_differences(self):
        sphere = Sphere(2)
        f = ScalarField('height', lambda x: x[2])
        x = sphere.retraction(np.array([0.3, 0.4, 0.8]))
        phi = OneForm.exact(f, sphere)
        v = sphere.random_tangent(x, np.random.default_rng(2))
        assert_allclose(phi(x, v), v[2], atol=1e-8)
