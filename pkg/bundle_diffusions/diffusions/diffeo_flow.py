"""
Stochastic flows as point-cloud diffeomorphisms.

The flow xi of a Hormander system is split as xi_t = theta_t g_t: theta moves
every tracked point with the noise seen at the base point x0 through K^perp,
and g fixes x0. The redundant noise K dB is carried along the base path by
the K-parallel transport of the trivial R^m bundle.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import subspace_angles

from .bundles import FrameBundle, derivative_lift_matrix
from .exceptions import DomainError, IntegrationError, InverseGridError, RetractionError
from .frame_flow import derivative_flow, horizontal_lift_path, vertical_group_path
from .hormander import Y_map
from .manifolds import FlatTorus, Sphere, TWO_PI, as_array
from .sde import PathSample, integrate_stratonovich, refine, sample_batch
from .statistics import max_cross_correlation

logger = logging.getLogger(__name__)

TRANSPORT_DRIFT = 1e-6
ROUNDOFF_FLOOR = 1e-10
JUMP_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class PointCloudDiffeo:
    """Images of the tracked sources; index 0 is the base point x0"""

    sources: np.ndarray
    images: np.ndarray
    frame: Optional[np.ndarray] = None

    @property
    def base_point(self):
        return self.sources[0]

    @property
    def base_image(self):
        return self.images[0]

    def __len__(self):
        return len(self.sources)


@dataclass(frozen=True, eq=False)
class DiffeoPath:
    times: np.ndarray
    sources: np.ndarray
    images: np.ndarray
    frames: Optional[np.ndarray] = None

    def at(self, k):
        frame = None if self.frames is None else self.frames[k]
        return PointCloudDiffeo(self.sources, self.images[k], frame)

    @property
    def final(self):
        return self.at(len(self.times) - 1)


@dataclass(frozen=True, eq=False)
class NoiseSplit:
    """Transports (K+1, *batch, m, m), relevant increments B~ and redundant increments beta"""

    transports: np.ndarray
    relevant: np.ndarray
    redundant: np.ndarray
    increments: np.ndarray
    kernel_angles: np.ndarray
    orthogonality: np.ndarray

    def reconstruction_defect(self):
        """sup_t |B_t - sum //~ (d beta + dB~)| with the trapezoidal transport, one value per path"""
        middle = 0.5 * (self.transports[:-1] + self.transports[1:])
        rebuilt = np.einsum('k...ij,k...j->k...i', middle, self.relevant + self.redundant)
        gap = np.cumsum(self.increments - rebuilt, axis=0)
        return np.max(np.linalg.norm(gap, axis=-1), axis=0)


def cloud(manifold, size, x0):
    """Quasi-uniform sources with x0 prepended"""
    x0 = as_array(x0)
    if isinstance(manifold, Sphere) and manifold.intrinsic_dim == 1:
        start = np.arctan2(x0[1], x0[0])
        angles = start + TWO_PI * np.arange(size) / size
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if isinstance(manifold, Sphere) and manifold.intrinsic_dim == 2:
        index = np.arange(size - 1) + 0.5
        height = 1.0 - 2.0 * index / (size - 1)
        angle = np.pi * (1.0 + 5.0 ** 0.5) * index
        radius = np.sqrt(1.0 - height ** 2)
        points = np.column_stack([radius * np.cos(angle), radius * np.sin(angle), height])
        return np.vstack([x0, points])
    if isinstance(manifold, FlatTorus):
        side = max(int(round((size - 1) ** (1.0 / manifold.ambient_dim))), 1)
        axes = np.meshgrid(*[TWO_PI * np.arange(side) / side] * manifold.ambient_dim, indexing='ij')
        grid = np.column_stack([a.ravel() for a in axes])
        return np.vstack([x0, manifold.retraction(grid + x0 + np.pi / side)])
    raise DomainError(f'no point cloud for {manifold.name}')


def xi_flow(system, sources, path):
    """The flow itself: every source driven by the same noise"""
    sample = integrate_stratonovich(system, np.asarray(sources, dtype=float), path, 'xi flow')
    return DiffeoPath(sample.times, np.asarray(sources, dtype=float), sample.points)


def _theta_coefficients(system, z, dB, dt):
    """c = K^perp(z) dB + Y(z) A(z) dt"""
    fields = system.field_matrix(z)
    inverse = system.right_inverse(z)
    return inverse @ fields @ dB + inverse @ system.drift_vector(z) * dt


def theta_flow(system, sources, path, frame=None):
    """dtheta(x) = X(theta(x)) (K^perp(z) o dB + Y(z) A(z) dt) with z = theta(x0).

    With a frame at x0 the Jacobian T_x0 theta u0 is advanced in the same step.
    """
    manifold = system.manifold
    images = np.array(sources, dtype=float)
    bundle = FrameBundle(manifold) if frame is not None else None
    state = None if bundle is None else bundle.join(images[0], frame)
    history = np.empty((path.n_steps + 1,) + images.shape)
    history[0] = images
    frames = None
    if bundle is not None:
        frames = np.empty((path.n_steps + 1,) + np.shape(frame))
        frames[0] = frame

    for k in range(path.n_steps):
        dB = path.increments[k]
        try:
            c0 = _theta_coefficients(system, images[0], dB, path.dt)
            k0 = system.field_matrix(images) @ c0
            predictor = manifold.retraction(images + k0)
            c1 = _theta_coefficients(system, predictor[0], dB, path.dt)
            k1 = system.field_matrix(predictor) @ c1
            images = manifold.retraction(images + 0.5 * (k0 + k1))
            if bundle is not None:
                s0 = derivative_lift_matrix(bundle, system, state) @ c0
                state_p = bundle.retraction(state + s0)
                s1 = derivative_lift_matrix(bundle, system, state_p) @ c1
                state = bundle.retraction(state + 0.5 * (s0 + s1))
                frames[k + 1] = bundle.split(state)[1]
        except RetractionError as error:
            raise IntegrationError(f'theta flow retraction failed: {error}', k, path.grid[k]) from error
        history[k + 1] = images
    return DiffeoPath(path.grid, np.asarray(sources, dtype=float), history, frames)


def _polar_factor(matrix):
    u, _, vt = np.linalg.svd(matrix)
    return u @ vt


def _kernel_basis(projector):
    values, vectors = np.linalg.eigh(projector)
    return vectors[:, values > 0.5]


def noise_split(system, base_points, path, angles=True):
    """Transport //~ with D_t e = K d(K e) + K^perp d(K^perp e) = 0 and the split increments.

    base_points has shape (K+1, *batch, N) and the path increments (K, *batch, m).
    """
    m = system.n_fields
    increments = np.asarray(path.increments, dtype=float)
    batch = increments.shape[1:-1]
    identity = np.eye(m)
    transport = np.broadcast_to(identity, batch + (m, m)).copy()
    transports = [transport]
    kernels = [system.kernel_projector(base_points[0])]
    orthogonality = [0.0]

    for k in range(path.n_steps):
        k0 = kernels[-1]
        k1 = system.kernel_projector(base_points[k + 1])
        step = _polar_factor(k1 @ k0 + (identity - k1) @ (identity - k0))
        transport = step @ transport
        drift = float(np.max(np.abs(np.swapaxes(transport, -1, -2) @ transport - identity)))
        if drift > TRANSPORT_DRIFT:
            logger.warning('transport drifted %.3e from orthogonal at step %d; re-orthonormalising', drift, k)
            transport = _polar_factor(transport)
        transports.append(transport)
        kernels.append(k1)
        orthogonality.append(drift)

    transports = np.array(transports)
    kernels = np.array(kernels)
    inverse = np.swapaxes(transports, -1, -2)
    redundant_map = 0.5 * (inverse[:-1] @ kernels[:-1] + inverse[1:] @ kernels[1:])
    relevant_map = 0.5 * (inverse[:-1] @ (identity - kernels[:-1]) + inverse[1:] @ (identity - kernels[1:]))
    redundant = np.einsum('k...ij,k...j->k...i', redundant_map, increments)
    relevant = np.einsum('k...ij,k...j->k...i', relevant_map, increments)
    kernel_angles = _kernel_angles(transports, kernels) if angles else None
    return NoiseSplit(transports, relevant, redundant, increments, kernel_angles, np.array(orthogonality))


def _kernel_angles(transports, kernels):
    """Largest principal angle between //~ ker X(x0) and ker X(x_t), per step"""
    flat_t = transports.reshape((-1,) + transports.shape[-2:])
    flat_k = kernels.reshape((-1,) + kernels.shape[-2:])
    batch = flat_t.shape[0] // transports.shape[0]
    angles = np.zeros(len(flat_t))
    initial = [_kernel_basis(flat_k[i]) for i in range(batch)]
    for index in range(len(flat_t)):
        start = initial[index % batch]
        here = _kernel_basis(flat_k[index])
        if start.shape[1] == 0 and here.shape[1] == 0:
            continue
        if start.shape[1] != here.shape[1]:
            angles[index] = np.pi / 2
            continue
        angles[index] = float(np.max(subspace_angles(flat_t[index] @ start, here)))
    return angles.reshape(transports.shape[:-2])


def noise_correlation(system, x0, seed, n_paths, horizon, dt, chunk=1000):
    """z-score sqrt(n) |rho| of the relevant against the redundant increments, pooled over paths and steps"""
    kernel = _kernel_basis(system.kernel_projector(as_array(x0)))
    if kernel.shape[1] == 0:
        return 0.0
    complement = _kernel_basis(np.eye(system.n_fields) - system.kernel_projector(as_array(x0)))
    relevant, redundant = [], []
    for first in range(0, n_paths, chunk):
        path = sample_batch(system.n_fields, horizon, dt, seed, range(first, min(first + chunk, n_paths)))
        base = integrate_stratonovich(system, as_array(x0), path, 'correlation base paths')
        split = noise_split(system, base.points, path, angles=False)
        relevant.append((split.relevant @ complement).reshape(-1, complement.shape[1]))
        redundant.append((split.redundant @ kernel).reshape(-1, kernel.shape[1]))
    relevant = np.concatenate(relevant)
    redundant = np.concatenate(redundant)
    return max_cross_correlation(relevant, redundant) * np.sqrt(len(relevant))


@dataclass(frozen=True)
class GridInversion:
    """theta_t-preimages of the xi_t images, recovered on the cloud at every step"""

    residual: float
    tolerance: float
    max_jump: float
    jump_tolerance: float
    starts_at_identity: bool
    base_fixed: bool

    @property
    def residual_ratio(self):
        return self.residual / self.tolerance if self.tolerance > 0.0 else 0.0

    @property
    def ratio(self):
        """At most 1 when every preimage is within the cloud spacing and moves continuously"""
        if not self.starts_at_identity:
            return float('inf')
        return max(self.residual_ratio, self.max_jump / self.jump_tolerance)

    @property
    def passed(self):
        return self.ratio <= 1.0 and self.base_fixed


@dataclass(frozen=True)
class CompositeReport:
    base_defect: float
    frame_defect: float
    grid: GridInversion

    @property
    def grid_ratio(self):
        return self.grid.ratio

    @property
    def base_fixed(self):
        return self.grid.base_fixed


def nearest_preimages(manifold, images, targets):
    """Index of the nearest image for every target, with the residual distances"""
    distances = np.linalg.norm(manifold.difference(images[None, :, :], targets[:, None, :]), axis=-1)
    index = np.argmin(distances, axis=1)
    return index, distances[np.arange(len(targets)), index]


def grid_tolerance(manifold, images):
    """Largest nearest-neighbour distance in the cloud"""
    distances = np.linalg.norm(manifold.difference(images[None, :, :], images[:, None, :]), axis=-1)
    np.fill_diagonal(distances, np.inf)
    return float(np.max(np.min(distances, axis=1)))


def grid_inversion(manifold, sources, theta_images, xi_images, dt):
    """Recover g_t(x) = theta_t^-1(xi_t(x)) on the cloud along the whole path.

    theta_images and xi_images have shape (K+1, J, N) with the base point at index 0.
    g_0 must be the identity, g_t must fix x0 at every step, and the recovered
    preimage of each source may only move by a few cloud spacings per step.
    """
    sources = np.asarray(sources, dtype=float)
    worst_ratio, residual, tolerance = -1.0, 0.0, 0.0
    indices = []
    for theta_k, xi_k in zip(theta_images, xi_images):
        index, distances = nearest_preimages(manifold, theta_k, xi_k)
        spacing = grid_tolerance(manifold, theta_k)
        ratio = float(np.max(distances)) / spacing
        if ratio > worst_ratio:
            worst_ratio, residual, tolerance = ratio, float(np.max(distances)), spacing
        indices.append(index)
    indices = np.array(indices)

    preimages = sources[indices]
    jumps = manifold.distance(preimages[:-1], preimages[1:])
    jump_tolerance = JUMP_FACTOR * (grid_tolerance(manifold, sources) + np.sqrt(dt))
    return GridInversion(
        residual=residual,
        tolerance=tolerance,
        max_jump=float(np.max(jumps, initial=0.0)),
        jump_tolerance=float(jump_tolerance),
        starts_at_identity=bool(np.all(indices[0] == np.arange(len(sources)))),
        base_fixed=bool(np.all(indices[:, 0] == 0)),
    )


def composite_check(decomposition, sources, frame, path):
    """xi_t = theta_t g_t checked at the base point, at the frame level and by grid inversion"""
    system = decomposition.generator.base_system
    manifold = system.manifold
    bundle = decomposition.generator.bundle
    xi = xi_flow(system, sources, path)
    theta = theta_flow(system, sources, path, frame)

    base_defect = float(np.max(manifold.distance(xi.images[:, 0], theta.images[:, 0])))

    lift = _lift_sample(bundle, theta, path)
    group_path = vertical_group_path(decomposition, lift, path)
    direct = derivative_flow(system, sources[0], frame, path)
    _, direct_frames = bundle.split(direct.points)
    frame_defect = float(np.max(np.abs(direct_frames - theta.frames @ group_path.elements)))

    grid = grid_inversion(manifold, sources, theta.images, xi.images, path.dt)
    if grid.residual_ratio > 1.0:
        raise InverseGridError(
            f'inverse residual {grid.residual:.3e} exceeds the cloud spacing {grid.tolerance:.3e} with J={len(sources)}'
        )
    logger.debug('grid inversion: ratio %.3f, largest preimage jump %.3e', grid.ratio, grid.max_jump)
    return CompositeReport(base_defect, frame_defect, grid)


def _lift_sample(bundle, theta, path):
    points = bundle.join(theta.images[:, 0], theta.frames)
    return PathSample(bundle, theta.times, points, path, 'glm lift')


def glm_homomorphism(decomposition, x0, u0, path):
    """T_x0 theta_t u0 against the horizontal lift of the derivative-flow semi-connection"""
    system = decomposition.generator.base_system
    bundle = decomposition.generator.bundle
    theta = theta_flow(system, np.asarray([as_array(x0)]), path, u0)
    lift = horizontal_lift_path(decomposition, bundle.join(as_array(x0), u0), path)
    _, lift_frames = bundle.split(lift.points)
    defect = float(np.max(np.abs(theta.frames - lift_frames)))
    return theta.frames, defect


def horizontal_lift_ode(system, sigma, sigma_dot, sources, times):
    """y' = X(y) Y(sigma) sigma' for every source, by Heun steps on the given grid"""
    manifold = system.manifold
    images = np.array(sources, dtype=float)
    history = [images]
    coefficients = [Y_map(system, sigma(t), sigma_dot(t)) for t in times]
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        k0 = system.field_matrix(images) @ coefficients[k] * dt
        predictor = manifold.retraction(images + k0)
        k1 = system.field_matrix(predictor) @ coefficients[k + 1] * dt
        images = manifold.retraction(images + 0.5 * (k0 + k1))
        history.append(images)
    return DiffeoPath(np.asarray(times), np.asarray(sources, dtype=float), np.array(history))


def theta_base_defect(system, x0, path):
    """sup_t dist(theta_t(x0), xi_t(x0)) under shared noise"""
    sources = np.asarray([as_array(x0)])
    theta = theta_flow(system, sources, path)
    xi = xi_flow(system, sources, path)
    return float(np.max(system.manifold.distance(theta.images[:, 0], xi.images[:, 0])))


def theta_base_refinement(system, x0, seed, horizon, fine_dt=1e-3, levels=4, n_paths=16):
    measure = lambda path: theta_base_defect(system, x0, path)
    return refine(measure, system.n_fields, horizon, fine_dt, levels, seed, range(n_paths), ROUNDOFF_FLOOR)


def glm_refinement(decomposition, x0, u0, seed, horizon, fine_dt=1e-3, levels=4, n_paths=16):
    measure = lambda path: glm_homomorphism(decomposition, x0, u0, path)[1]
    m = decomposition.generator.system.n_fields
    return refine(measure, m, horizon, fine_dt, levels, seed, range(n_paths), ROUNDOFF_FLOOR)
