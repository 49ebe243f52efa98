"""
Stratonovich integration on embedded manifolds and matrix groups.

Brownian increments come from a counter-based Philox generator keyed by the
run seed; the stream id selects a disjoint block of the counter space, so a
path is reproducible from (seed, stream) alone. Integration is Heun
predictor-corrector followed by retraction, and every field may broadcast
over leading axes to advance a whole batch of paths at once.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .exceptions import ConfigurationError, IntegrationError, RetractionError, StepSizeError
from .groups import ROTATION_GENERATOR, SpecialOrthogonalGroup
from .hormander import HormanderSystem
from .manifolds import FD_STEP, FlatTorus, Sphere, as_array, directional_derivative
from .statistics import EXACT_ERROR, fit_order

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-9
GROUP_PATH_TOLERANCE = 1e-8
MAX_ALGEBRA_NORM = 1.0
STREAM_SHIFT = 192


def grid_size(horizon, dt):
    """Number of steps K = T / dt; the ratio must be an integer"""
    if dt <= 0.0 or horizon <= 0.0:
        raise ConfigurationError(f'need T > 0 and dt > 0, got T={horizon}, dt={dt}')
    ratio = horizon / dt
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > GRID_TOLERANCE * max(1.0, ratio):
        raise ConfigurationError(f'T/dt = {ratio!r} is not an integer')
    return steps


def brownian_generator(seed, stream):
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(stream) << STREAM_SHIFT))


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments of shape (K, *batch, m) on a uniform grid"""

    increments: np.ndarray
    dt: float
    seed: Optional[int] = None
    stream: Optional[int] = None
    t0: float = 0.0

    @property
    def dimension(self):
        return self.increments.shape[-1]

    @property
    def n_steps(self):
        return self.increments.shape[0]

    @property
    def horizon(self):
        return self.n_steps * self.dt

    @property
    def grid(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def values(self):
        """B at the grid points, starting from 0"""
        zero = np.zeros((1,) + self.increments.shape[1:])
        return np.concatenate([zero, np.cumsum(self.increments, axis=0)])

    def coarsen(self, factor):
        """Same path seen on a grid with step factor * dt"""
        if factor < 1 or self.n_steps % factor:
            raise ConfigurationError(f'cannot coarsen {self.n_steps} steps by {factor}')
        summed = self.increments.reshape((self.n_steps // factor, factor) + self.increments.shape[1:]).sum(axis=1)
        return BrownianPath(summed, self.dt * factor, self.seed, self.stream, self.t0)

    def window(self, start, stop):
        return BrownianPath(self.increments[start:stop], self.dt, self.seed, self.stream, self.t0 + start * self.dt)

    def components(self, start, stop):
        """Path driven by the components start:stop only"""
        return BrownianPath(self.increments[..., start:stop], self.dt, self.seed, self.stream, self.t0)

    @classmethod
    def zeros(cls, m, horizon, dt, batch=()):
        return cls(np.zeros((grid_size(horizon, dt),) + tuple(batch) + (m,)), dt)

    @classmethod
    def stack(cls, paths):
        """Batch of paths along axis 1, all on the same grid"""
        paths = list(paths)
        return cls(np.stack([p.increments for p in paths], axis=1), paths[0].dt, paths[0].seed, paths[0].stream, paths[0].t0)


def sample_brownian(m, horizon, dt, seed, stream=0, batch=()):
    steps = grid_size(horizon, dt)
    rng = brownian_generator(seed, stream)
    increments = rng.standard_normal((steps,) + tuple(batch) + (m,)) * np.sqrt(dt)
    return BrownianPath(increments, dt, seed, stream)


def sample_batch(m, horizon, dt, seed, streams):
    """One independent path per stream id, stacked along the batch axis"""
    return BrownianPath.stack(sample_brownian(m, horizon, dt, seed, stream) for stream in streams)


@dataclass(frozen=True, eq=False)
class PathSample:
    manifold: object
    times: np.ndarray
    points: np.ndarray
    path: BrownianPath
    label: str = ''

    @property
    def final(self):
        return self.points[-1]

    @property
    def n_steps(self):
        return len(self.times) - 1

    def constraint_residual(self):
        return float(np.max(np.abs(self.manifold.constraint(self.points)), initial=0.0))


@dataclass(frozen=True, eq=False)
class GroupPath:
    group: object
    times: np.ndarray
    elements: np.ndarray
    residuals: np.ndarray = field(repr=False, default=None)

    @property
    def final(self):
        return self.elements[-1]


def _stochastic_increment(fields, drift, x, dB, dt):
    return np.einsum('...ij,...j->...i', fields(x), dB) + drift(x) * dt


def heun_step(fields, drift, manifold, x, dB, dt):
    k0 = _stochastic_increment(fields, drift, x, dB, dt)
    predictor = manifold.retraction(x + k0)
    k1 = _stochastic_increment(fields, drift, predictor, dB, dt)
    return manifold.retraction(x + 0.5 * (k0 + k1))


def integrate_stratonovich(system, x0, path, label=''):
    """dx = X(x) o dB + A(x) dt by Heun steps with retraction; x0 may be a batch, e.g. a point cloud sharing one noise"""
    manifold = system.manifold
    x = np.asarray(as_array(x0), dtype=float)
    batch = np.broadcast_shapes(x.shape[:-1], path.increments.shape[1:-1])
    x = np.broadcast_to(x, batch + x.shape[-1:]).copy()
    points = np.empty((path.n_steps + 1,) + x.shape)
    points[0] = x
    for k in range(path.n_steps):
        try:
            x = heun_step(system.fields, system.drift, manifold, x, path.increments[k], path.dt)
        except RetractionError as error:
            raise IntegrationError(f'retraction failed: {error}', k, path.grid[k]) from error
        if not np.all(np.isfinite(x)):
            raise IntegrationError('non-finite state', k, path.grid[k])
        points[k + 1] = x
    logger.debug('integrated %d steps of %s', path.n_steps, label or system)
    return PathSample(manifold, path.grid, points, path, label or str(system))


def group_step(group, g, xi0, xi1):
    """g exp(1/2 (xi0 + xi1)) with the step-size guard"""
    xi = 0.5 * (xi0 + xi1)
    if np.linalg.norm(xi, 2) > MAX_ALGEBRA_NORM:
        raise StepSizeError(f'algebra increment norm {np.linalg.norm(xi, 2):.3f} exceeds {MAX_ALGEBRA_NORM}')
    return group.project(g @ expm(xi))


def integrate_group(group, coefficient, path, g0=None):
    """dg = g (sum_j C_j(k, g) o dbeta^j + C_0(k, g) dt) with g_0 = id.

    coefficient(k, g) returns (noise, drift): noise has shape (n, n, m) and
    drift (n, n), both left-invariant algebra elements evaluated at grid index k.
    """
    g = group.identity() if g0 is None else np.asarray(g0, dtype=float)
    elements = np.empty((path.n_steps + 1, group.n, group.n))
    residuals = np.zeros(path.n_steps + 1)
    elements[0] = g

    def increment(k, h, dB):
        noise, drift = coefficient(k, h)
        return np.einsum('abj,j->ab', noise, dB) + drift * path.dt

    for k in range(path.n_steps):
        dB = path.increments[k]
        xi0 = increment(k, g, dB)
        if np.linalg.norm(xi0, 2) > MAX_ALGEBRA_NORM:
            raise StepSizeError(f'algebra increment norm {np.linalg.norm(xi0, 2):.3f} exceeds {MAX_ALGEBRA_NORM}', k, path.grid[k])
        predictor = group.project(g @ expm(xi0))
        xi1 = increment(k + 1, predictor, dB)
        try:
            g = group_step(group, g, xi0, xi1)
        except StepSizeError as error:
            raise StepSizeError(str(error), k, path.grid[k]) from error
        residuals[k + 1] = group.residual(g)
        if residuals[k + 1] > GROUP_PATH_TOLERANCE:
            raise IntegrationError(f'group residual {residuals[k + 1]:.3e}', k, path.grid[k])
        elements[k + 1] = g
    return GroupPath(group, path.grid, elements, residuals)


def strat_correction(K, system, x, step=FD_STEP):
    """Lambda(x) = 1/2 sum_j (D_{X^j} K)(x)[:, j], the drift turning int K o dB into an Ito integral"""
    x = as_array(x)
    fields = system.field_matrix(x)
    total = np.zeros(np.asarray(K(x)).shape[0])
    for j in range(fields.shape[1]):
        if not np.any(fields[:, j]):
            continue
        total += 0.5 * directional_derivative(K, system.manifold, x, fields[:, j], step)[:, j]
    return total


def rotation_angle(g):
    return float(np.arctan2(g[1, 0], g[0, 0]))


@dataclass(frozen=True, eq=False)
class OrderCase:
    name: str
    dimension: int
    solve: Callable
    point_distance: Callable
    horizon: float = 1.0
    base_dt: float = 0.05
    x0: Optional[np.ndarray] = None


def _manifold_case(name, system, x0, horizon=1.0, base_dt=0.05):
    manifold = system.manifold

    def solve(path):
        return integrate_stratonovich(system, x0, path, name).final

    distance = lambda a, b: manifold.distance(a, b)
    return OrderCase(name, system.n_fields, solve, distance, horizon, base_dt, np.asarray(x0, dtype=float))


def _torus_drift_case():
    torus = FlatTorus(2)
    system = HormanderSystem(
        torus,
        fields=lambda x: np.zeros(np.shape(x)[:-1] + (2, 1)),
        drift=lambda x: np.stack([1.0 + np.sin(x[..., 1]), 0.5 * np.cos(x[..., 0])], axis=-1),
        n_fields=1,
        label='torus drift',
    )
    return _manifold_case('torus-drift', system, np.array([0.3, 1.1]))


def _s2_rotation_case():
    sphere = Sphere(2)
    axis = np.array([0.0, 0.0, 1.0])
    e1 = np.array([1.0, 0.0, 0.0])

    def fields(x):
        return np.cross(axis, x)[..., :, None]

    def drift(x):
        return 0.3 * (e1 - np.sum(x * e1, axis=-1, keepdims=True) * x)

    system = HormanderSystem(sphere, fields, drift, n_fields=1, label='rotation about e3')
    return _manifold_case('s2-rotation', system, np.array([0.6, 0.0, 0.8]))


def _s2_gradient_case():
    sphere = Sphere(2)
    system = HormanderSystem(
        sphere,
        fields=sphere.tangent_projector,
        drift=lambda x: np.zeros_like(x),
        n_fields=3,
        label='gradient system on S2',
    )
    return _manifold_case('s2-gradient', system, np.array([0.0, 0.6, 0.8]), horizon=0.4, base_dt=0.02)


def _group_abelian_case(c=0.7, d=0.3):
    group = SpecialOrthogonalGroup(2)

    def coefficient(k, g):
        theta = rotation_angle(g)
        return (c * (1.0 + 0.5 * np.cos(theta)) * ROTATION_GENERATOR)[:, :, None], d * ROTATION_GENERATOR

    def solve(path):
        return np.array([integrate_group(group, coefficient, path).final.ravel()])

    def distance(a, b):
        return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)

    return OrderCase('group-abelian', 1, solve, distance)


ORDER_CASES = {
    'torus-drift': _torus_drift_case,
    's2-rotation': _s2_rotation_case,
    'group-abelian': _group_abelian_case,
    's2-gradient': _s2_gradient_case,
}


def _solve_batch(case, path):
    if case.name == 'group-abelian':
        return np.concatenate([case.solve(BrownianPath(path.increments[:, i], path.dt)) for i in range(path.increments.shape[1])])
    return case.solve(path)


def convergence_order(name, seed, n_paths=8, levels=4, reference_factor=64, base_dt=None):
    """Strong order from endpoint errors against a fine-grid reference driven by the same noise"""
    try:
        case = ORDER_CASES[name]()
    except KeyError:
        raise ConfigurationError(f'unknown order case {name!r}') from None
    base_dt = base_dt or case.base_dt
    if reference_factor < 2 ** (levels - 1) * 2:
        raise ConfigurationError('reference grid must be finer than every refinement level')
    fine_dt = base_dt / reference_factor
    fine = sample_batch(case.dimension, case.horizon, fine_dt, seed, range(n_paths))
    reference = _solve_batch(case, fine)
    dts, errors = [], []
    for level in range(levels):
        factor = reference_factor // 2 ** level
        coarse = fine.coarsen(factor)
        approximate = _solve_batch(case, coarse)
        errors.append(float(np.sqrt(np.mean(case.point_distance(approximate, reference) ** 2))))
        dts.append(coarse.dt)
    estimate = fit_order(dts, errors)
    logger.info('%s: %s', name, estimate)
    return estimate


def refine(measure, m, horizon, fine_dt, levels, seed, streams, floor=EXACT_ERROR):
    """Mean defect over paths at dt = fine_dt * 2^l, l < levels, every level driven by the same noise"""
    streams = list(streams)
    dts = [fine_dt * 2 ** level for level in range(levels - 1, -1, -1)]
    totals = np.zeros(levels)
    for stream in streams:
        fine = sample_brownian(m, horizon, fine_dt, seed, stream)
        for index, level in enumerate(range(levels - 1, -1, -1)):
            totals[index] += measure(fine.coarsen(2 ** level))
    errors = totals / len(streams)
    return fit_order(dts, errors, floor)
