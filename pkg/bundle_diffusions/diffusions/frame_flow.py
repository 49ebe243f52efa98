"""
Skew-product decomposition of an equivariant bundle diffusion.

The direct path b solves the bundle SDE. The horizontal path y solves the
lifted base SDE from the same start, and the group path g integrates the
connection form of the bundle fields along y g. Under shared noise
b_t = y_t g_t holds pathwise up to discretisation error.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .bundles import FrameBundle, derivative_flow_generator, weitzenbock_on_oneform
from .exceptions import FrameDegenerationError, InsufficientSamplesError
from .manifolds import FRAME_CONDITION_LIMIT, ScalarField, apply_operator, as_array
from .sde import PathSample, integrate_group, integrate_stratonovich, refine, sample_batch, sample_brownian
from .statistics import mean_estimate, moment_z_score

logger = logging.getLogger(__name__)

SMALL_TIME_BUDGET = 5.0
SMALL_TIME_CHUNK = 10000


@dataclass(frozen=True, eq=False)
class SkewProductRun:
    direct: PathSample
    lift: PathSample
    group_path: object
    reconstruction: np.ndarray
    defects: np.ndarray

    @property
    def max_defect(self):
        return float(np.max(self.defects))


@dataclass(frozen=True, eq=False)
class ConcatenationReport:
    split: int
    defects: np.ndarray

    @property
    def max_defect(self):
        return float(np.max(self.defects, initial=0.0))


@dataclass(frozen=True, eq=False)
class SmallTimeReport:
    monte_carlo: np.ndarray
    standard_error: np.ndarray
    predicted: np.ndarray
    direct: np.ndarray
    horizon: float
    budget: float = SMALL_TIME_BUDGET

    @property
    def ratio(self):
        """|mc - predicted| over the allowance 3 SE + C t^2; at most 1 when the check passes"""
        allowance = 3.0 * self.standard_error + self.budget * self.horizon ** 2
        return float(np.max(np.abs(self.monte_carlo - self.predicted) / allowance))

    @property
    def split_defect(self):
        """Direct generator value against the horizontal plus Weitzenbock split, per unit time"""
        return float(np.max(np.abs(self.direct - self.predicted / self.horizon)))


@dataclass(frozen=True)
class LawReport:
    pathwise_defect: float
    moment_z: float


def check_frames(bundle, sample):
    """Raise when any frame along the path has condition number above the limit"""
    _, frames = bundle.split(sample.points)
    conditions = np.linalg.cond(frames)
    if np.any(conditions > FRAME_CONDITION_LIMIT):
        step = int(np.argwhere(conditions > FRAME_CONDITION_LIMIT)[0][0])
        raise FrameDegenerationError(
            f'frame condition number {float(np.max(conditions)):.3e}', step, float(sample.times[step]),
        )
    return conditions


def derivative_flow(base_system, x0, u0, path, bundle=None):
    """u_t = T xi_t u_0, integrated jointly with the base SDE"""
    generator = derivative_flow_generator(base_system, bundle)
    b0 = generator.bundle.join(as_array(x0), as_array(u0))
    sample = integrate_stratonovich(generator.system, b0, path, 'derivative flow')
    check_frames(generator.bundle, sample)
    return sample


def simulate_direct(generator, b0, path):
    """db = X~(b) o dW + A~(b) dt with W = (B, beta)"""
    sample = integrate_stratonovich(generator.system, as_array(b0), path, generator.label)
    if isinstance(generator.bundle, FrameBundle):
        check_frames(generator.bundle, sample)
    return sample


def horizontal_lift_path(decomposition, a, path):
    """Horizontal lift from a of the base SDE driven by the first m noise components"""
    m = decomposition.generator.n_base_noise
    base_noise = path.components(0, m) if path.dimension > m else path
    return integrate_stratonovich(decomposition.horizontal, as_array(a), base_noise, 'horizontal lift')


def vertical_group_path(decomposition, lift, path):
    """dg = g omega(X~(y g)) o dW + g omega(A~(y g)) dt along the horizontal path y"""
    bundle = decomposition.generator.bundle
    system = decomposition.generator.system
    connection = decomposition.connection

    def coefficient(k, g):
        b = bundle.act(lift.points[k], g)
        noise = connection.connection_form(b, system.field_matrix(b))
        drift = connection.connection_form(b, system.drift_vector(b))
        return np.moveaxis(noise, 0, -1), drift

    return integrate_group(bundle.group, coefficient, path)


def reconstruct_and_compare(decomposition, b0, path):
    bundle = decomposition.generator.bundle
    direct = simulate_direct(decomposition.generator, b0, path)
    lift = horizontal_lift_path(decomposition, b0, path)
    group_path = vertical_group_path(decomposition, lift, path)
    reconstruction = bundle.act(lift.points, group_path.elements)
    defects = bundle.distance(direct.points, reconstruction)
    logger.debug('reconstruction defect %.3e over %d steps', float(np.max(defects)), path.n_steps)
    return SkewProductRun(direct, lift, group_path, reconstruction, defects)


def reconstruction_refinement(decomposition, b0, seed, horizon, fine_dt=1e-3, levels=4, n_paths=16):
    measure = lambda path: reconstruct_and_compare(decomposition, b0, path).max_defect
    m = decomposition.generator.system.n_fields
    return refine(measure, m, horizon, fine_dt, levels, seed, range(n_paths))


def concatenation_check(decomposition, b0, path, split):
    """g_t against g_s g'_t where g' is built from the lift restarted at the direct path's b_s"""
    direct = simulate_direct(decomposition.generator, b0, path)
    lift = horizontal_lift_path(decomposition, b0, path)
    whole = vertical_group_path(decomposition, lift, path)
    rest = path.window(split, path.n_steps)
    second_lift = horizontal_lift_path(decomposition, direct.points[split], rest)
    second = vertical_group_path(decomposition, second_lift, rest)
    joined = whole.elements[split] @ second.elements
    defects = np.linalg.norm(whole.elements[split:] - joined, axis=(-2, -1))
    return ConcatenationReport(split, defects)


def concatenation_refinement(decomposition, b0, seed, horizon, split=0.5, fine_dt=1e-3, levels=4, n_paths=16):
    def measure(path):
        return concatenation_check(decomposition, b0, path, int(round(split * path.n_steps))).max_defect

    m = decomposition.generator.system.n_fields
    return refine(measure, m, horizon, fine_dt, levels, seed, range(n_paths))


def chord_transport_path(bundle, lift):
    """Frames moved along the discrete base path by chord transport, started at the lift's first frame"""
    x, frames = bundle.split(lift.points)
    transported = [frames[0]]
    for k in range(len(x) - 1):
        transported.append(bundle.base.chord_transport(x[k], x[k + 1], transported[-1]))
    return np.array(transported)


def horizontal_transport_defect(bundle, lift):
    _, frames = bundle.split(lift.points)
    return float(np.max(np.abs(frames - chord_transport_path(bundle, lift))))


def horizontality_defect(decomposition, lift):
    """Largest relative distance of a step's tangential base direction from E at its start"""
    base_system = decomposition.generator.base_system
    bundle = decomposition.generator.bundle
    x = bundle.project(lift.points)
    worst = 0.0
    for k in range(len(x) - 1):
        step = bundle.base.tangent_projector(x[k]) @ bundle.base.difference(x[k], x[k + 1])
        inside = base_system.e_projector(x[k]) @ step
        worst = max(worst, float(np.linalg.norm(step - inside)) / max(float(np.linalg.norm(step)), 1e-300))
    return worst


def conformality_defect(bundle, sample):
    """sup_t of the scale-free Gram matrix drift of the frames"""
    _, frames = bundle.split(sample.points)
    gram = np.swapaxes(frames, -1, -2) @ frames
    n = frames.shape[-1]
    normalised = gram / (np.trace(gram, axis1=-2, axis2=-1)[..., None, None] / n)
    return float(np.max(np.abs(normalised - normalised[0])))


def fibre_linear_function(bundle, phi, xi):
    """b -> phi(x)(u xi), the fibre-linear function of a one-form"""
    xi = np.asarray(xi, dtype=float)

    def value(b):
        x, frame = bundle.split(b)
        return float(phi.covector(x) @ frame @ xi)

    return ScalarField(f'{phi.name}~', value)


def small_time_generator_check(decomposition, phi, u0, coeffs=None, horizon=0.01, dt=1e-3, n_paths=100000,
                               seed=0, budget=SMALL_TIME_BUDGET, chunk=SMALL_TIME_CHUNK):
    """E[phi~(u_t)] - phi~(u_0) by Monte Carlo against t (A^H phi~ + B^V phi~)(u_0)"""
    generator = decomposition.generator
    bundle = generator.bundle
    u0 = as_array(u0)
    n = bundle.fibre_shape[1]
    coeffs = coeffs or decomposition.coeffs
    basis = np.eye(n)

    weitzenbock = weitzenbock_on_oneform(bundle, u0, phi, coeffs, generator.base_system)
    functions = [fibre_linear_function(bundle, phi, basis[i]) for i in range(n)]
    horizontal = np.array([decomposition.horizontal_apply(f, u0) for f in functions])
    predicted = horizon * (horizontal + weitzenbock.way_coefficients)
    direct = np.array([apply_operator(generator.system, f, u0) for f in functions])

    start = phi.covector(bundle.project(u0)) @ bundle.split(u0)[1]
    differences = []
    for first in range(0, n_paths, chunk):
        streams = range(first, min(first + chunk, n_paths))
        path = sample_batch(generator.system.n_fields, horizon, dt, seed, streams)
        sample = integrate_stratonovich(generator.system, u0, path, 'small-time derivative flow')
        x, frames = bundle.split(sample.final)
        values = np.array([phi.covector(y) @ frame for y, frame in zip(x, frames)])
        differences.append(values - start)
    estimate = mean_estimate(np.concatenate(differences))

    if np.any((np.abs(predicted) > 1e-12) & (estimate.standard_error > np.abs(predicted))):
        raise InsufficientSamplesError(
            f'standard error {float(np.max(estimate.standard_error)):.3e} exceeds the predicted change with N={n_paths}'
        )
    report = SmallTimeReport(estimate.mean, estimate.standard_error, predicted, direct, horizon, budget)
    logger.info('small-time generator: ratio %.3f with N=%d', report.ratio, n_paths)
    return report


def equivariance_in_law(generator, b0, g, horizon, dt, seed, n_paths=16):
    """b from b0 g against R_g(b) from b0: pathwise under shared noise, moments under independent noise"""
    bundle = generator.bundle
    m = generator.system.n_fields
    b0 = as_array(b0)
    moved = bundle.act(b0, g)

    shared = sample_brownian(m, horizon, dt, seed, 0)
    left = simulate_direct(generator, moved, shared)
    right = simulate_direct(generator, b0, shared)
    pathwise = float(np.max(bundle.distance(left.points, bundle.act(right.points, g))))

    base_direction = np.cos(np.arange(bundle.base_dim) + 0.25)
    fibre_direction = np.sin(np.arange(bundle.ambient_dim - bundle.base_dim) + 0.75)

    def observables(b):
        x, fibre = bundle.split(b)
        return np.array([base_direction @ x, fibre_direction @ fibre.ravel()])

    first = [observables(simulate_direct(generator, moved, sample_brownian(m, horizon, dt, seed, stream)).final)
             for stream in range(1, n_paths + 1)]
    second = [observables(bundle.act(simulate_direct(generator, b0, sample_brownian(m, horizon, dt, seed, stream)).final, g))
              for stream in range(n_paths + 1, 2 * n_paths + 1)]
    return LawReport(pathwise, moment_z_score(np.array(first), np.array(second)))


def variational_flow_oracle(base_system, x0, u0, path, step=1e-6):
    """Finite-difference Jacobian of the discrete flow map applied to u0"""
    manifold = base_system.manifold
    x0 = as_array(x0)
    columns = []
    for v in np.asarray(u0, dtype=float).T:
        forward = integrate_stratonovich(base_system, manifold.retraction(x0 + step * v), path).final
        backward = integrate_stratonovich(base_system, manifold.retraction(x0 - step * v), path).final
        columns.append(manifold.difference(backward, forward) / (2.0 * step))
    return np.column_stack(columns)
