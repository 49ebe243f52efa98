"""
Built-in scenarios: a base Hormander system, a bundle and the equivariant
generator driving it, with the numeric defaults the commands start from.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from django.conf import settings

from .bundles import (
    FrameBundle, TrivialBundle, decompose, derivative_flow_generator, product_generator,
)
from .exceptions import ConfigurationError
from .groups import ROTATION_GENERATOR
from .hormander import HormanderSystem, check_constant_rank
from .manifolds import FlatTorus, Sphere

logger = logging.getLogger(__name__)

FRAME_SHEAR = np.array([[1.0, 0.3], [0.0, 0.8]])
TORUS_FIBRE_NOISE = np.array([[0.3, 0.5], [-0.2, 0.1]])
ROTATION_NOISE = 0.5
PRODUCT_TWIST = np.array([0.0, 0.0, 1.0])
PRODUCT_TWIST_STRENGTH = 0.5
PRODUCT_NOISE = 0.7
PRODUCT_DRIFT = 0.3
S1_ROTATION_SPEED = 0.3
TORUS_RANK1_DRIFT = 0.5


def _zeros_like_points(x):
    return np.zeros(np.shape(x))


def gradient_system(sphere):
    """X(x) e = e - <x, e> x with m equal to the ambient dimension"""
    identity = np.eye(sphere.ambient_dim)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return -(np.einsum('ik,...j->...ijk', identity, x) + np.einsum('...i,jk->...ijk', x, identity))

    return HormanderSystem(
        manifold=sphere,
        fields=sphere.tangent_projector,
        drift=_zeros_like_points,
        n_fields=sphere.ambient_dim,
        rank=sphere.intrinsic_dim,
        jacobian=jacobian,
        drift_jacobian=lambda x: np.zeros((sphere.ambient_dim, sphere.ambient_dim)),
        label=f'gradient system on {sphere.name}',
    )


def _constant_torus_system(columns, drift, label):
    torus = FlatTorus(2)
    columns = np.asarray(columns, dtype=float)
    drift = np.asarray(drift, dtype=float)
    m = columns.shape[1]
    return HormanderSystem(
        manifold=torus,
        fields=lambda x: np.broadcast_to(columns, np.shape(x)[:-1] + columns.shape).copy(),
        drift=lambda x: np.broadcast_to(drift, np.shape(x)).copy(),
        n_fields=m,
        rank=int(np.linalg.matrix_rank(columns)),
        jacobian=lambda x: np.zeros(np.shape(x)[:-1] + columns.shape + (2,)),
        drift_jacobian=lambda x: np.zeros((2, 2)),
        label=label,
    )


def _s1_system():
    circle = Sphere(1)
    system = gradient_system(circle)
    generator = S1_ROTATION_SPEED * ROTATION_GENERATOR
    return HormanderSystem(
        manifold=circle,
        fields=system.fields,
        drift=lambda x: np.asarray(x, dtype=float) @ generator.T,
        n_fields=2,
        rank=1,
        jacobian=system.jacobian,
        drift_jacobian=lambda x: generator,
        label='gradient system on S1 with rotation drift',
    )


def _rotation_curve(x0, speed):
    def sigma(t):
        c, s = np.cos(speed * t), np.sin(speed * t)
        return np.array([[c, -s], [s, c]]) @ x0

    def sigma_dot(t):
        return speed * ROTATION_GENERATOR @ sigma(t)

    return sigma, sigma_dot


def _line_curve(x0, velocity):
    return (lambda t: np.mod(x0 + t * velocity, 2.0 * np.pi)), (lambda t: velocity)


def _constant_curve(x0):
    return (lambda t: x0), (lambda t: np.zeros_like(x0))


def _torus_fibre_noise(generator):
    bundle = generator.bundle

    def fields(b):
        _, frame = bundle.split(b)
        return bundle.join(np.zeros(bundle.base_dim), TORUS_FIBRE_NOISE @ frame)

    return generator.with_fibre_noise(fields, _zeros_like_points, 1, 'derivative flow + fibre noise Q u')


def _rotation_fibre_noise(generator):
    bundle = generator.bundle

    def fields(b):
        x, frame = bundle.split(b)
        return bundle.join(np.zeros(bundle.base_dim), ROTATION_NOISE * np.cross(x, frame, axis=0))

    return generator.with_fibre_noise(fields, _zeros_like_points, 1, 'derivative flow + rotation noise x cross u')


def _product_fibre_noise(generator):
    bundle = generator.bundle

    def fields(b):
        x, g = bundle.split(b)
        return bundle.join(np.zeros_like(x), PRODUCT_NOISE * g @ ROTATION_GENERATOR)

    def drift(b):
        x, g = bundle.split(b)
        return bundle.join(np.zeros_like(x), PRODUCT_DRIFT * g @ ROTATION_GENERATOR)

    return generator.with_fibre_noise(fields, drift, 1, 'twisted product + vertical rotation noise')


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    description: str
    system_factory: Callable
    x0: np.ndarray
    bundle_type: str = 'frames'
    fibre_noise: Optional[Callable] = None
    curve_factory: Optional[Callable] = None
    dt: float = 1e-3
    horizon: float = 1.0
    n_paths: int = 16
    cloud_size: int = 257
    expected_ricci: float = 0.0
    expected_coefficients: Optional[tuple] = None

    def __str__(self):
        return self.name

    @cached_property
    def base_system(self):
        return self.system_factory()

    @property
    def manifold(self):
        return self.base_system.manifold

    @cached_property
    def bundle(self):
        if self.bundle_type == 'frames':
            return FrameBundle(self.manifold)
        if self.bundle_type == 'trivial':
            return TrivialBundle(self.manifold, 2)
        raise ConfigurationError(f'unknown bundle type {self.bundle_type!r}')

    @property
    def is_frame_scenario(self):
        return self.bundle_type == 'frames'

    @cached_property
    def generator(self):
        """The scenario's equivariant generator on its bundle"""
        if self.is_frame_scenario:
            generator = derivative_flow_generator(self.base_system, self.bundle)
        else:
            generator = product_generator(self.base_system, self.bundle, PRODUCT_TWIST, PRODUCT_TWIST_STRENGTH)
        return self.fibre_noise(generator) if self.fibre_noise else generator

    @cached_property
    def derivative_generator(self):
        if not self.is_frame_scenario:
            raise ConfigurationError(f'{self.name} has no derivative flow')
        return derivative_flow_generator(self.base_system, self.bundle)

    def decomposition(self, completion='ambient', basis=None, rng=None):
        return decompose(self.generator, completion, basis, self.probe_points(rng, 10), rng)

    def derivative_decomposition(self, completion='ambient', rng=None):
        return decompose(self.derivative_generator, completion, None, self.probe_points(rng, 10), rng)

    def start_frame(self):
        x0 = self.x0
        if self.is_frame_scenario:
            n = self.manifold.intrinsic_dim
            return self.manifold.tangent_basis(x0) @ FRAME_SHEAR[:n, :n]
        return np.eye(2)

    def start_point(self):
        return self.bundle.join(self.x0, self.start_frame())

    def base_points(self, rng, count):
        return [self.x0] + [self.manifold.random_point(rng) for _ in range(count - 1)]

    def probe_points(self, rng, count):
        rng = rng if rng is not None else np.random.default_rng(0)
        return [self.start_point()] + [self.bundle.random_point(rng) for _ in range(count - 1)]

    def drift_curve(self):
        """An exact integral curve of the base drift through x0, with its velocity"""
        if self.curve_factory is None:
            return _constant_curve(self.x0)
        return self.curve_factory(self.x0)

    def validate(self, rng, count=50):
        """Tangency and constant rank on the base, then the equivariance probe through decompose"""
        points = self.base_points(rng, count)
        self.base_system.validate(points)
        check_constant_rank(self.base_system, points)
        decompose(self.generator, probe_points=self.probe_points(rng, count), rng=rng)
        logger.debug('validated scenario %s on %d points', self.name, count)

    def defaults(self):
        return {
            'dt': self.dt,
            'horizon': self.horizon,
            'n_paths': self.n_paths,
            'cloud_size': self.cloud_size,
            'seed': settings.DIFFUSIONS_SEED,
        }


SCENARIOS = {
    scenario.name: scenario for scenario in [
        Scenario(
            'torus-flat',
            'constant full-rank fields on T2, frames with fibre noise Q u',
            lambda: _constant_torus_system(np.eye(2), np.zeros(2), 'constant fields on T2'),
            np.array([0.3, 1.1]),
            fibre_noise=_torus_fibre_noise,
        ),
        Scenario(
            'torus-rank1',
            'the single field d/dt1 with drift 0.5 d/dt1 on T2',
            lambda: _constant_torus_system([[1.0], [0.0]], [TORUS_RANK1_DRIFT, 0.0], 'd/dt1 on T2'),
            np.array([0.3, 1.1]),
            curve_factory=lambda x0: _line_curve(x0, np.array([TORUS_RANK1_DRIFT, 0.0])),
        ),
        Scenario(
            's1-rank1',
            'gradient system on S1 (m=2, one redundant direction) with rotation drift',
            _s1_system,
            np.array([1.0, 0.0]),
            curve_factory=lambda x0: _rotation_curve(x0, S1_ROTATION_SPEED),
            horizon=0.4,
            cloud_size=256,
        ),
        Scenario(
            's2-gradient',
            'gradient Brownian system on S2 and its derivative flow on GL(S2)',
            lambda: gradient_system(Sphere(2)),
            np.array([0.0, 0.6, 0.8]),
            horizon=0.4,
            cloud_size=512,
            expected_ricci=1.0,
        ),
        Scenario(
            's2-frames',
            'derivative flow of the S2 gradient system with rotation noise in the fibres',
            lambda: gradient_system(Sphere(2)),
            np.array([0.0, 0.6, 0.8]),
            fibre_noise=_rotation_fibre_noise,
            horizon=0.4,
            cloud_size=512,
            expected_ricci=1.0,
        ),
        Scenario(
            'trivial-bundle-so2',
            'twisted product generator on S2 x SO(2) with vertical rotation noise',
            lambda: gradient_system(Sphere(2)),
            np.array([0.0, 0.6, 0.8]),
            bundle_type='trivial',
            fibre_noise=_product_fibre_noise,
            horizon=0.4,
            cloud_size=512,
            expected_ricci=1.0,
            expected_coefficients=(np.array([[0.5 * PRODUCT_NOISE ** 2]]), np.array([PRODUCT_DRIFT])),
        ),
    ]
}

SCENARIO_CHOICES = [(name, name) for name in SCENARIOS]


def get_scenario(name):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(f'unknown scenario {name!r}; choose from {", ".join(SCENARIOS)}') from None
