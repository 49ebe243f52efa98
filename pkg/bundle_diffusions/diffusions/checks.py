"""
Check groups run by the management commands.

Each check measures one number, compares it with the tolerance table in
settings and becomes a CheckResult. Numerical errors raised while measuring
turn into failed records carrying the message. Every check draws its random
probes from a generator seeded by (run seed, check id), so records do not
depend on which groups ran before them.
"""
import logging
import zlib
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
from django.conf import settings

from .bundles import (
    SemiConnection, decompose, equivariance_alpha_beta, equivariance_probe, predicted_derivative_coefficients,
    associated_covariant_derivative, verticality_check, weitzenbock_on_oneform,
)
from .diffeo_flow import (
    cloud, composite_check, glm_refinement, horizontal_lift_ode, noise_correlation, noise_split, theta_base_refinement,
    theta_flow,
)
from .exceptions import ConfigurationError, DiffusionError
from .frame_flow import (
    concatenation_refinement, conformality_defect, derivative_flow, equivariance_in_law, horizontal_transport_defect,
    horizontality_defect, reconstruct_and_compare, reconstruction_refinement, small_time_generator_check,
    vertical_group_path,
)
from .groups import ROTATION_GENERATOR, SpecialOrthogonalGroup
from .hormander import (
    check_constant_rank, delta, e_residual, is_strongly_cohesive, symbol_projection_check, polarization_symbol,
    z_vector_field,
)
from .lw_connection import (
    adjoint_covariant_derivative, adjoint_torsion, curvature, kernel_parallel_defect, levi_civita_derivative,
    lw_covariant_derivative, lw_torsion, metricity_defect, ricci_sharp,
)
from .manifolds import (
    OneForm, Sphere, ambient_function_library, apply_operator, constant_field, function_library, one_form_library,
)
from .scenarios import get_scenario
from .sde import (
    BrownianPath, PathSample, convergence_order, integrate_group, integrate_stratonovich, sample_batch,
    sample_brownian, strat_correction,
)
from .statistics import fit_constant, fit_order, max_cross_correlation, variance_z_score

logger = logging.getLogger(__name__)

COMPARATORS = ('le', 'ge')

CHECK_ANCHORS = {
    'retraction-idempotence': 'retraction onto the manifold is idempotent',
    'projector-idempotence': 'tangent projector P(x) satisfies P^2 = P',
    'one-form-linearity': 'one-forms are linear in the tangent argument',
    'generator-constants': 'diffusion operators annihilate constants',
    'polarization-symbol': 'A(fg) - A(f)g - fA(g) = df(sigma dg)',
    'constant-rank': 'symbol of the base operator has constant rank',
    'symbol-psd': 'symbol X X^T is positive semi-definite',
    'right-inverse': 'X(x) Y(x) is the identity on E_x',
    'kernel-projection': 'X(x) K(x) = 0 for the kernel projection K',
    'z-field-identity': 'Z^w(x) = w for w in E_x',
    'delta-exact-forms': 'delta(df) = A f',
    'delta-leibniz': 'delta(f phi) = 1/2 df(sigma phi) + f delta(phi)',
    'strongly-cohesive': 'base operator is along the image of its symbol',
    'symbol-projection': 'T pi sigma^B (T pi)^* = sigma^A for a lifted operator',
    'symbol-projection-control': 'a non-lifted bundle operator breaks the symbol projection',
    'lift-well-defined': 'horizontal lift sigma^B (T pi)^* a does not depend on the preimage a',
    'lw-metricity': 'LW connection is metric for <Y v, Y w>',
    'lw-kernel-parallel': 'nabla X(e) = 0 for e orthogonal to ker X(x)',
    'lw-levi-civita': 'LW connection of a gradient system is Levi-Civita',
    'lw-adjoint-z-parallel': 'adjoint connection makes every Z^w parallel at x',
    'lw-torsion-adjoint': 'adjoint connection has the opposite torsion',
    'curvature-antisymmetry': 'R(u, v) w = -R(v, u) w',
    'ricci-in-e': 'Ric#(v) lies in E_x',
    'ricci-expected': 'Ric#(v) against the scenario curvature constant',
    'b-equivariance': 'bundle generator commutes with right translations',
    'horizontal-projection': 'T pi h_u(v) = v on E',
    'lift-equivariance': 'h_{ua} = T R_a h_u',
    'fundamental-vertical': 'fundamental vector fields are killed by T pi',
    'connection-reproducing': 'omega reproduces the algebra on fundamental fields',
    'connection-horizontal': 'omega vanishes on horizontal lifts',
    'verticality': 'B - A^H is vertical: D(f1 (f2 o pi)) = (f2 o pi) D f1',
    'verticality-control': 'the horizontal part A^H is not vertical',
    'alpha-psd': 'second-order vertical coefficients are positive semi-definite',
    'ad-equivariance': 'alpha(ug) and beta(ug) transform by Ad(g^-1)',
    'completion-invariance': 'alpha and beta do not depend on the completed connection form',
    'decompose-idempotent': 'decomposing A^H leaves no vertical part',
    'basis-independence': 'vertical operator does not depend on the algebra basis',
    'derivative-coefficients': 'derivative-flow alpha, beta from nabla X^p and Ric#',
    'product-coefficients': 'product generator returns its own vertical coefficients',
    'weitzenbock-two-way': 'vertical part on one-forms from alpha, beta equals -1/2 phi(Ric# u)',
    'weitzenbock-ricci': 'vertical part on one-forms against the scenario curvature constant',
    'associated-frame-independence': 'u d(Z~)(h_u w) does not depend on u in the fibre',
    'associated-adjoint': 'induced covariant derivative on TM is the adjoint LW connection',
    'reconstruction-order': 'b_t = y_t g_t pathwise: refinement order',
    'reconstruction-constant': 'b_t = y_t g_t pathwise: defect over dt',
    'concatenation-order': 'g_t = g_s g\'_t: refinement order',
    'concatenation-constant': 'g_t = g_s g\'_t: defect over dt',
    'base-projection': 'pi of the horizontal lift is the base path of b',
    'horizontality': 'horizontal lift steps stay in E',
    'horizontal-transport-constant': 'horizontal lift of frames is parallel transport',
    'group-residual': 'group path stays in the structure group',
    'g-path-determinism': 'g depends on the lift only through its points and the noise',
    'fibre-translation': 'b started at b0 a equals R_a of b started at b0',
    'equivariance-law': 'moments of b from b0 a and of R_a b from b0 agree',
    'derivative-conformality-constant': 'derivative flow of a sphere gradient system is conformal',
    'small-time-generator': 'E phi~(u_t) - phi~(u_0) = t (A^H + B^V) phi~(u_0) + O(t^2)',
    'small-time-direct': 'B phi~ equals its horizontal plus vertical split',
    'theta-base-order': 'theta_t(x0) = xi_t(x0) pathwise: refinement order',
    'theta-base-constant': 'theta_t(x0) = xi_t(x0) pathwise: defect over dt',
    'noise-reconstruction-constant': 'dB = //~ d beta + //~ dB~ pathwise',
    'transport-orthogonality': 'transport of the trivial R^m bundle is orthogonal',
    'kernel-alignment': '//~ maps ker X(x0) onto ker X(x_t)',
    'noise-correlation': 'relevant and redundant noise are uncorrelated',
    'glm-order': 'T theta_t u0 is the horizontal lift of the derivative flow: refinement order',
    'glm-constant': 'T theta_t u0 is the horizontal lift of the derivative flow: defect over dt',
    'composite-frame-constant': 'T xi_t u0 = (T theta_t u0) g_t at frame level',
    'composite-grid': 'xi_t = theta_t g_t on the tracked cloud',
    'fibre-base-fixed': 'g_t fixes the base point x0 at every step',
    'lift-ode-base': 'lift of a base curve tracks the curve at x0',
    'lift-ode-theta': 'lift of the drift curve is theta without noise',
    'brownian-determinism': 'increments are a function of (seed, stream)',
    'brownian-variance': 'increments have variance dt',
    'stream-correlation': 'distinct streams are uncorrelated',
    'strat-correction': 'Stratonovich correction of x x^T on the sphere is x',
    'group-closed-form': 'abelian group path is the closed-form rotation',
    'order-torus-drift': 'Heun order on a drift-only torus system',
    'order-s2-rotation': 'strong order with one commuting driver on S2',
    'order-group-abelian': 'strong order of the group integrator on SO(2)',
    'order-s2-gradient': 'strong order with non-commuting drivers on S2',
    'order-regression': 'order fit recovers slope 1 on synthetic errors',
}


def anchor_for(check_id):
    try:
        return CHECK_ANCHORS[check_id]
    except KeyError:
        raise ConfigurationError(f'unknown check {check_id!r}') from None


def tolerance_for(check_id, overrides=None):
    """(tolerance, comparator) with per-run overrides keeping the comparator"""
    try:
        tolerance, comparator = settings.DIFFUSIONS_TOLERANCES[check_id]
    except KeyError:
        raise ConfigurationError(f'no tolerance configured for {check_id!r}') from None
    if overrides and check_id in overrides:
        tolerance = float(overrides[check_id])
    if comparator not in COMPARATORS:
        raise ConfigurationError(f'bad comparator {comparator!r} for {check_id!r}')
    return float(tolerance), comparator


def compare(value, tolerance, comparator):
    if value is None or np.isnan(value):
        return False
    return value <= tolerance if comparator == 'le' else value >= tolerance


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    anchor: str
    value: float
    tolerance: float
    comparator: str
    passed: bool
    detail: str = ''

    def as_dict(self):
        return asdict(self)

    def __str__(self):
        status = 'PASS' if self.passed else 'FAIL'
        return f'{status} {self.check_id}: {self.value:.4g} {self.comparator} {self.tolerance:g}'


@dataclass
class RunConfig:
    scenario: str
    dt: float
    horizon: float
    n_paths: int
    cloud_size: int
    seed: int
    split: float = 0.5
    probes: int = 200
    levels: int = 4
    small_time: float = 0.01
    small_time_paths: int = 100000
    correlation_paths: int = 10000
    tolerances: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


@dataclass
class SuiteReport:
    config: RunConfig
    groups: list
    records: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(record.passed for record in self.records)

    @property
    def failures(self):
        return [record for record in self.records if not record.passed]


def _max(values):
    return float(np.max(np.asarray(list(values), dtype=float), initial=0.0))


class CheckSuite:
    """Runs check groups for one scenario and collects their records"""

    def __init__(self, config):
        self.config = config
        self.scenario = get_scenario(config.scenario)
        self.records = []
        self.traces = {}

    def rng(self, check_id):
        return np.random.default_rng([self.config.seed, zlib.crc32(check_id.encode())])

    def count(self, cap):
        return max(1, min(self.config.probes, cap))

    def share(self, divisor):
        """Point count for the finite-difference checks, a fixed fraction of config.probes"""
        return max(1, self.config.probes // divisor)

    def check(self, check_id, measure):
        """Run measure() and record its value; measure may return (value, detail)"""
        tolerance, comparator = tolerance_for(check_id, self.config.tolerances)
        detail = ''
        try:
            outcome = measure()
            value, detail = outcome if isinstance(outcome, tuple) else (outcome, '')
            value = float(value)
        except (DiffusionError, np.linalg.LinAlgError) as error:
            logger.warning('%s raised %s: %s', check_id, error.__class__.__name__, error)
            value = float('nan')
            detail = f'{error.__class__.__name__}: {error}'
        result = CheckResult(
            check_id, anchor_for(check_id), value, tolerance, comparator,
            compare(value, tolerance, comparator), detail,
        )
        logger.info('%s', result)
        self.records.append(result)
        return result

    def trace(self, name, header, rows):
        self.traces[name] = (list(header), [list(map(float, row)) for row in rows])

    # shared objects

    @property
    def base_system(self):
        return self.scenario.base_system

    @property
    def manifold(self):
        return self.scenario.manifold

    @property
    def bundle(self):
        return self.scenario.bundle

    @cached_property
    def decomposition(self):
        return self.scenario.decomposition(rng=self.rng('decomposition'))

    @cached_property
    def derivative_decomposition(self):
        return self.scenario.derivative_decomposition(rng=self.rng('derivative-decomposition'))

    def base_points(self, check_id, cap):
        return self.scenario.base_points(self.rng(check_id), self.count(cap))

    def bundle_points(self, check_id, cap):
        return self.scenario.probe_points(self.rng(check_id), self.count(cap))

    def e_vector(self, x, rng):
        """Random vector of E_x"""
        return self.base_system.e_projector(x) @ self.manifold.random_tangent(x, rng)

    def run(self, groups):
        for name in groups:
            try:
                runner = GROUPS[name]
            except KeyError:
                raise ConfigurationError(f'unknown check group {name!r}') from None
            logger.info('running %s checks on %s', name, self.scenario)
            runner(self)
        return SuiteReport(self.config, list(groups), self.records, self.traces)


def run_suite(config, groups):
    return CheckSuite(config).run(groups)


def run_geometry(suite):
    system = suite.base_system
    manifold = suite.manifold
    functions = function_library(manifold)

    def retraction_idempotence():
        rng = suite.rng('retraction-idempotence')
        worst = 0.0
        for x in suite.base_points('retraction-idempotence', 1000):
            once = manifold.retraction(x + 0.1 * rng.standard_normal(manifold.ambient_dim))
            worst = max(worst, _max(np.abs(manifold.retraction(once) - once)))
        return worst

    def projector_idempotence():
        worst = 0.0
        for x in suite.base_points('projector-idempotence', 1000):
            projector = manifold.tangent_projector(x)
            worst = max(worst, _max(np.abs(projector @ projector - projector)))
        return worst

    def one_form_linearity():
        rng = suite.rng('one-form-linearity')
        points = suite.base_points('one-form-linearity', 200)
        return _max(phi.linearity_defect(manifold, x, rng) for phi in one_form_library(manifold) for x in points)

    def generator_constants():
        one = constant_field()
        return _max(abs(apply_operator(system, one, x)) for x in suite.base_points('generator-constants', 200))

    def polarization():
        worst = 0.0
        for x in suite.base_points('polarization-symbol', 200):
            symbol = system.symbol_matrix(x)
            for f in functions:
                for g in functions:
                    expected = f.gradient(x) @ symbol @ g.gradient(x)
                    measured = polarization_symbol(system, f, g, x)
                    worst = max(worst, abs(measured - expected) / max(1.0, abs(expected)))
        return worst

    def constant_rank():
        points = suite.base_points('constant-rank', 1000)
        ranks = check_constant_rank(system, points)
        return 0.0, f'rank {int(ranks[0])} at {len(ranks)} points'

    def symbol_psd():
        return float(min(np.linalg.eigvalsh(system.symbol_matrix(x))[0] for x in suite.base_points('symbol-psd', 1000)))

    def right_inverse():
        rng = suite.rng('right-inverse')
        worst = 0.0
        for x in suite.base_points('right-inverse', 1000):
            v = suite.e_vector(x, rng)
            worst = max(worst, _max(np.abs(system.field_matrix(x) @ system.right_inverse(x) @ v - v)))
        return worst

    def kernel_projection():
        return _max(
            _max(np.abs(system.field_matrix(x) @ system.kernel_projector(x)))
            for x in suite.base_points('kernel-projection', 1000)
        )

    def z_identity():
        rng = suite.rng('z-field-identity')
        worst = 0.0
        for x in suite.base_points('z-field-identity', 1000):
            w = suite.e_vector(x, rng)
            worst = max(worst, _max(np.abs(z_vector_field(system, x, w)(x) - w)))
        return worst

    def delta_exact():
        points = suite.base_points('delta-exact-forms', 200)
        return _max(
            abs(delta(system, OneForm.exact(f), x) - apply_operator(system, f, x)) for f in functions for x in points
        )

    def delta_leibniz():
        worst = 0.0
        forms = one_form_library(manifold)
        for x in suite.base_points('delta-leibniz', 200):
            symbol = system.symbol_matrix(x)
            for f in functions[:3]:
                for phi in forms:
                    expected = 0.5 * f.gradient(x) @ symbol @ phi.covector(x) + f(x) * delta(system, phi, x)
                    worst = max(worst, abs(delta(system, phi.scaled(f), x) - expected))
        return worst

    def cohesive():
        report = is_strongly_cohesive(system, suite.base_points('strongly-cohesive', 100))
        return report.max_defect, f'{report.n_forms} annihilating forms at {report.n_points} points'

    generator = suite.scenario.generator

    def symbol_projection():
        points = suite.bundle_points('symbol-projection', 500)
        report = symbol_projection_check(generator.system, system, suite.bundle, points, suite.rng('symbol-projection'))
        return report.max_error, f'{report.n_points} points x {report.n_covectors} covectors'

    def symbol_projection_control():
        broken = generator.with_base_field(np.cos(np.arange(manifold.ambient_dim) + 0.5))
        points = suite.bundle_points('symbol-projection-control', 200)
        return symbol_projection_check(broken.system, system, suite.bundle, points, suite.rng('symbol-projection-control')).max_error

    def lift_well_defined():
        rng = suite.rng('lift-well-defined')
        connection = SemiConnection(generator)
        worst = 0.0
        for b in suite.bundle_points('lift-well-defined', 200):
            x = suite.bundle.project(b)
            v = suite.e_vector(x, rng)
            symbol = system.symbol_matrix(x)
            values, vectors = np.linalg.eigh(symbol)
            kernel = vectors[:, values <= 1e-10 * max(values[-1], 1.0)]
            reference = connection.horizontal_lift(b, v)
            for _ in range(20):
                covector = np.linalg.pinv(symbol) @ v + kernel @ rng.standard_normal(kernel.shape[1])
                worst = max(worst, _max(np.abs(connection.horizontal_lift(b, v, covector) - reference)))
        return worst

    checks = [
        ('retraction-idempotence', retraction_idempotence),
        ('projector-idempotence', projector_idempotence),
        ('one-form-linearity', one_form_linearity),
        ('generator-constants', generator_constants),
        ('polarization-symbol', polarization),
        ('constant-rank', constant_rank),
        ('symbol-psd', symbol_psd),
        ('right-inverse', right_inverse),
        ('kernel-projection', kernel_projection),
        ('z-field-identity', z_identity),
        ('delta-exact-forms', delta_exact),
        ('delta-leibniz', delta_leibniz),
        ('strongly-cohesive', cohesive),
        ('symbol-projection', symbol_projection),
        ('symbol-projection-control', symbol_projection_control),
        ('lift-well-defined', lift_well_defined),
    ]
    for check_id, measure in checks:
        suite.check(check_id, measure)
    _run_lw_checks(suite)


def _run_lw_checks(suite):
    system = suite.base_system
    manifold = suite.manifold
    full_rank = system.rank == manifold.intrinsic_dim

    def section(rng):
        coefficients = rng.standard_normal(system.n_fields)
        return lambda y: system.field_matrix(y) @ coefficients

    def metricity():
        rng = suite.rng('lw-metricity')
        return _max(
            metricity_defect(system, section(rng), section(rng), x, manifold.random_tangent(x, rng))
            for x in suite.base_points('lw-metricity', 200)
        )

    def kernel_parallel():
        rng = suite.rng('lw-kernel-parallel')
        return _max(
            kernel_parallel_defect(system, x, manifold.random_tangent(x, rng), rng.standard_normal(system.n_fields))
            for x in suite.base_points('lw-kernel-parallel', 200)
        )

    def levi_civita():
        rng = suite.rng('lw-levi-civita')
        worst = 0.0
        for x in suite.base_points('lw-levi-civita', 200):
            U = section(rng)
            v = manifold.random_tangent(x, rng)
            gap = lw_covariant_derivative(system, U, x, v) - levi_civita_derivative(manifold, U, x, v)
            worst = max(worst, _max(np.abs(gap)))
        return worst

    def adjoint_parallel():
        rng = suite.rng('lw-adjoint-z-parallel')
        worst = 0.0
        for x in suite.base_points('lw-adjoint-z-parallel', 200):
            Z = z_vector_field(system, x, suite.e_vector(x, rng))
            worst = max(worst, _max(np.abs(adjoint_covariant_derivative(system, Z, x, suite.e_vector(x, rng)))))
        return worst

    def torsion():
        rng = suite.rng('lw-torsion-adjoint')
        worst = 0.0
        for x in suite.base_points('lw-torsion-adjoint', 200):
            u, v = suite.e_vector(x, rng), suite.e_vector(x, rng)
            worst = max(worst, _max(np.abs(lw_torsion(system, x, u, v) + adjoint_torsion(system, x, u, v))))
        return worst

    def antisymmetry():
        rng = suite.rng('curvature-antisymmetry')
        worst = 0.0
        for x in suite.base_points('curvature-antisymmetry', suite.share(2)):
            u, v, w = (suite.e_vector(x, rng) for _ in range(3))
            worst = max(worst, _max(np.abs(curvature(system, x, u, v, w) + curvature(system, x, v, u, w))))
        return worst

    ricci_samples = []

    def ricci_values():
        if not ricci_samples:
            rng = suite.rng('ricci')
            for x in suite.base_points('ricci', suite.share(2)):
                v = suite.e_vector(x, rng)
                ricci_samples.append((x, v, ricci_sharp(system, x, v)))
        return ricci_samples

    def ricci_in_e():
        return _max(e_residual(system, x, ricci) for x, _, ricci in ricci_values())

    def ricci_expected():
        constant = suite.scenario.expected_ricci
        return _max(_max(np.abs(ricci - constant * v)) for _, v, ricci in ricci_values())

    suite.check('lw-metricity', metricity)
    suite.check('lw-kernel-parallel', kernel_parallel)
    if full_rank:
        suite.check('lw-levi-civita', levi_civita)
    suite.check('lw-adjoint-z-parallel', adjoint_parallel)
    suite.check('lw-torsion-adjoint', torsion)
    suite.check('curvature-antisymmetry', antisymmetry)
    suite.check('ricci-in-e', ricci_in_e)
    suite.check('ricci-expected', ricci_expected)


def run_decomposition(suite):
    scenario = suite.scenario
    bundle = suite.bundle
    generator = scenario.generator
    group = bundle.group
    basis = group.basis

    def connection():
        return suite.decomposition.connection

    def b_equivariance():
        points = suite.bundle_points('b-equivariance', 200)
        return equivariance_probe(generator, points, suite.rng('b-equivariance'))

    def horizontal_projection():
        rng = suite.rng('horizontal-projection')
        worst = 0.0
        for b in suite.bundle_points('horizontal-projection', 200):
            v = suite.e_vector(bundle.project(b), rng)
            worst = max(worst, _max(np.abs(bundle.push_vector(connection().horizontal_lift(b, v)) - v)))
        return worst

    def lift_equivariance():
        rng = suite.rng('lift-equivariance')
        worst = 0.0
        for b in suite.bundle_points('lift-equivariance', 200):
            v = suite.e_vector(bundle.project(b), rng)
            a = group.random_element(rng)
            moved = connection().horizontal_lift(bundle.act(b, a), v)
            worst = max(worst, _max(np.abs(moved - bundle.act(connection().horizontal_lift(b, v), a))))
        return worst

    def fundamental_vertical():
        return _max(
            _max(np.abs(bundle.push_vector(bundle.fundamental(b, xi))))
            for b in suite.bundle_points('fundamental-vertical', 200) for xi in basis.matrices
        )

    def reproducing():
        return _max(
            _max(np.abs(connection().connection_form(b, bundle.fundamental(b, xi)) - xi))
            for b in suite.bundle_points('connection-reproducing', 200) for xi in basis.matrices
        )

    def connection_horizontal():
        rng = suite.rng('connection-horizontal')
        worst = 0.0
        for b in suite.bundle_points('connection-horizontal', 200):
            lift = connection().horizontal_lift(b, suite.e_vector(bundle.project(b), rng))
            worst = max(worst, _max(np.abs(connection().connection_form(b, lift))))
        return worst

    f1s = ambient_function_library(bundle.ambient_dim)[:2]
    f2s = function_library(suite.manifold)[:2]

    def verticality():
        points = suite.bundle_points('verticality', suite.share(10))
        report = verticality_check(suite.decomposition.vertical_apply, bundle, f1s, f2s, points)
        return report.max_defect, f'{report.n_probes} probes'

    def verticality_control():
        points = suite.bundle_points('verticality-control', suite.share(10))
        return verticality_check(suite.decomposition.horizontal_apply, bundle, f1s, f2s, points).max_defect

    def alpha_psd():
        coeffs = suite.decomposition.coeffs
        return float(min(np.linalg.eigvalsh(coeffs.alpha(b))[0] for b in suite.bundle_points('alpha-psd', 200)))

    def ad_equivariance():
        rng = suite.rng('ad-equivariance')
        coeffs = suite.decomposition.coeffs
        return _max(
            equivariance_alpha_beta(coeffs, bundle, b, group.random_element(rng)).max_defect
            for b in suite.bundle_points('ad-equivariance', suite.share(2))
        )

    def completion_invariance():
        twisted = scenario.decomposition('twisted', rng=suite.rng('decomposition')).coeffs
        coeffs = suite.decomposition.coeffs
        return _max(
            max(_max(np.abs(twisted.alpha(b) - coeffs.alpha(b))), _max(np.abs(twisted.beta(b) - coeffs.beta(b))))
            for b in suite.bundle_points('completion-invariance', suite.share(2))
        )

    def idempotent():
        points = suite.bundle_points('decompose-idempotent', suite.share(2))
        horizontal = decompose(suite.decomposition.horizontal_generator(), probe_points=points, rng=suite.rng('decompose-idempotent'))
        return _max(
            max(_max(np.abs(horizontal.coeffs.alpha(b))), _max(np.abs(horizontal.coeffs.beta(b)))) for b in points
        )

    def basis_independence():
        rng = suite.rng('basis-independence')
        change = np.eye(basis.dim) + 0.3 * rng.standard_normal((basis.dim, basis.dim))
        rotated = scenario.decomposition(basis=basis.rotated(change), rng=suite.rng('decomposition')).coeffs
        coeffs = suite.decomposition.coeffs
        worst = 0.0
        for b in suite.bundle_points('basis-independence', suite.share(2)):
            second = np.abs(rotated.second_order_element(b) - coeffs.second_order_element(b))
            first = np.abs(rotated.first_order_element(b) - coeffs.first_order_element(b))
            worst = max(worst, _max(second), _max(first))
        return worst

    def derivative_coefficients():
        coeffs = suite.derivative_decomposition.coeffs
        worst = 0.0
        for b in suite.bundle_points('derivative-coefficients', suite.share(4)):
            alpha, beta = predicted_derivative_coefficients(suite.base_system, bundle, b, basis)
            worst = max(worst, _max(np.abs(coeffs.alpha(b) - alpha)), _max(np.abs(coeffs.beta(b) - beta)))
        return worst

    def product_coefficients():
        alpha, beta = scenario.expected_coefficients
        coeffs = suite.decomposition.coeffs
        return _max(
            max(_max(np.abs(coeffs.alpha(b) - alpha)), _max(np.abs(coeffs.beta(b) - beta)))
            for b in suite.bundle_points('product-coefficients', 200)
        )

    checks = [
        ('b-equivariance', b_equivariance),
        ('horizontal-projection', horizontal_projection),
        ('lift-equivariance', lift_equivariance),
        ('fundamental-vertical', fundamental_vertical),
        ('connection-reproducing', reproducing),
        ('connection-horizontal', connection_horizontal),
        ('verticality', verticality),
        ('verticality-control', verticality_control),
        ('alpha-psd', alpha_psd),
        ('ad-equivariance', ad_equivariance),
        ('completion-invariance', completion_invariance),
        ('decompose-idempotent', idempotent),
        ('basis-independence', basis_independence),
    ]
    if scenario.is_frame_scenario:
        checks.append(('derivative-coefficients', derivative_coefficients))
    if scenario.expected_coefficients is not None:
        checks.append(('product-coefficients', product_coefficients))
    for check_id, measure in checks:
        suite.check(check_id, measure)
    if scenario.is_frame_scenario:
        _run_weitzenbock_checks(suite)


def _run_weitzenbock_checks(suite):
    scenario = suite.scenario
    bundle = suite.bundle
    base_system = suite.base_system
    forms = one_form_library(suite.manifold)[:3]
    reports = []

    def weitzenbock_reports():
        if not reports:
            coeffs = suite.derivative_decomposition.coeffs
            for u in suite.bundle_points('weitzenbock', suite.share(20)):
                for phi in forms:
                    reports.append((u, phi, weitzenbock_on_oneform(bundle, u, phi, coeffs, base_system)))
        return reports

    def two_way():
        return _max(report.defect for _, _, report in weitzenbock_reports())

    def against_ricci():
        worst = 0.0
        for u, phi, report in weitzenbock_reports():
            x, frame = bundle.split(u)
            expected = -0.5 * scenario.expected_ricci * phi.covector(x) @ frame
            worst = max(worst, _max(np.abs(report.way_coefficients - expected)), _max(np.abs(report.way_ricci - expected)))
        return worst

    def field(y):
        return suite.manifold.tangent_projector(y) @ np.cos(np.arange(suite.manifold.ambient_dim) + 1.0)

    def frame_independence():
        rng = suite.rng('associated-frame-independence')
        connection = suite.derivative_decomposition.connection
        worst = 0.0
        for b in suite.bundle_points('associated-frame-independence', 100):
            w = suite.e_vector(bundle.project(b), rng)
            a = bundle.group.random_element(rng, 0.3)
            first = associated_covariant_derivative(connection, field, b, w)
            second = associated_covariant_derivative(connection, field, bundle.act(b, a), w)
            worst = max(worst, _max(np.abs(first - second)))
        return worst

    def adjoint():
        rng = suite.rng('associated-adjoint')
        connection = suite.derivative_decomposition.connection
        worst = 0.0
        for b in suite.bundle_points('associated-adjoint', 100):
            x = bundle.project(b)
            w = suite.e_vector(x, rng)
            gap = associated_covariant_derivative(connection, field, b, w) - adjoint_covariant_derivative(base_system, field, x, w)
            worst = max(worst, _max(np.abs(gap)))
        return worst

    suite.check('weitzenbock-two-way', two_way)
    suite.check('weitzenbock-ricci', against_ricci)
    suite.check('associated-frame-independence', frame_independence)
    suite.check('associated-adjoint', adjoint)


def _refinement_records(suite, prefix, estimate):
    suite.check(f'{prefix}-order', lambda: (estimate().order, str(estimate())))
    suite.check(f'{prefix}-constant', lambda: (fit_constant(estimate().dts, estimate().errors), str(estimate())))


def _memo(compute):
    """Evaluate compute once; the order and constant records share one refinement"""
    cache = []

    def value():
        if not cache:
            cache.append(compute())
        return cache[0]

    return value


def run_skew(suite):
    config = suite.config
    scenario = suite.scenario
    bundle = suite.bundle
    generator = scenario.generator
    b0 = scenario.start_point()
    m = generator.system.n_fields
    path = sample_brownian(m, config.horizon, config.dt, config.seed, 0)

    reconstruction = _memo(lambda: reconstruction_refinement(
        suite.decomposition, b0, config.seed, config.horizon, config.dt, config.levels, config.n_paths,
    ))
    concatenation = _memo(lambda: concatenation_refinement(
        suite.decomposition, b0, config.seed, config.horizon, config.split, config.dt, config.levels, config.n_paths,
    ))
    _refinement_records(suite, 'reconstruction', reconstruction)
    _refinement_records(suite, 'concatenation', concatenation)

    runs = []

    def run():
        if not runs:
            runs.append(reconstruct_and_compare(suite.decomposition, b0, path))
            sample = runs[0]
            suite.trace('reconstruction', ['t', 'defect'], zip(sample.direct.times, sample.defects))
        return runs[0]

    def base_projection():
        sample = run()
        return _max(suite.manifold.distance(bundle.project(sample.direct.points), bundle.project(sample.lift.points)))

    def horizontality():
        return horizontality_defect(suite.decomposition, run().lift)

    def transport():
        return horizontal_transport_defect(bundle, run().lift) / config.dt

    def group_residual():
        return _max(run().group_path.residuals)

    def determinism():
        lift = run().lift
        relabelled = PathSample(lift.manifold, lift.times.copy(), lift.points.copy(), lift.path, 'relabelled lift')
        again = vertical_group_path(suite.decomposition, relabelled, path)
        return _max(np.abs(again.elements - run().group_path.elements))

    law = _memo(lambda: equivariance_in_law(
        generator, b0, bundle.group.random_element(suite.rng('equivariance-law'), 0.3),
        config.horizon, config.dt * 2 ** (config.levels - 1), config.seed, config.n_paths,
    ))

    def conformality():
        sample = derivative_flow(suite.base_system, scenario.x0, scenario.start_frame(), path.components(0, suite.base_system.n_fields), bundle)
        return conformality_defect(bundle, sample) / config.dt

    def small_time():
        phi = one_form_library(suite.manifold)[0]
        report = small_time_generator_check(
            suite.derivative_decomposition, phi, b0, horizon=config.small_time, dt=_small_time_step(config),
            n_paths=config.small_time_paths, seed=config.seed,
        )
        return report

    small_time_report = _memo(small_time)

    suite.check('base-projection', base_projection)
    suite.check('horizontality', horizontality)
    if scenario.is_frame_scenario:
        suite.check('horizontal-transport-constant', transport)
    suite.check('group-residual', group_residual)
    suite.check('g-path-determinism', determinism)
    suite.check('fibre-translation', lambda: law().pathwise_defect)
    suite.check('equivariance-law', lambda: law().moment_z)
    if scenario.is_frame_scenario and isinstance(suite.manifold, Sphere):
        suite.check('derivative-conformality-constant', conformality)
    if scenario.is_frame_scenario:
        suite.check('small-time-generator', lambda: (small_time_report().ratio, f'N={config.small_time_paths}'))
        suite.check('small-time-direct', lambda: small_time_report().split_defect)


def _small_time_step(config):
    """The run step when it divides the small-time horizon, otherwise a tenth of the horizon"""
    steps = config.small_time / config.dt
    if config.dt < config.small_time and abs(steps - round(steps)) < 1e-9 * steps:
        return config.dt
    return config.small_time / 10.0


def run_diffeo(suite):
    config = suite.config
    scenario = suite.scenario
    system = suite.base_system
    manifold = suite.manifold
    x0 = scenario.x0
    m = system.n_fields

    theta_base = _memo(lambda: theta_base_refinement(
        system, x0, config.seed, config.horizon, config.dt, config.levels, config.n_paths,
    ))
    _refinement_records(suite, 'theta-base', theta_base)

    splits = []

    def split():
        if not splits:
            paths = sample_batch(m, config.horizon, config.dt, config.seed, range(config.n_paths))
            base = integrate_stratonovich(system, x0, paths, 'noise split base paths')
            result = noise_split(system, base.points, paths)
            splits.append(result)
            defects = np.cumsum(result.increments[:, 0] - np.einsum(
                'kij,kj->ki', 0.5 * (result.transports[:-1, 0] + result.transports[1:, 0]),
                result.relevant[:, 0] + result.redundant[:, 0],
            ), axis=0)
            suite.trace('noise-split', ['t', 'defect', 'orthogonality', 'kernel_angle'], zip(
                paths.grid[1:], np.linalg.norm(defects, axis=-1), result.orthogonality[1:], result.kernel_angles[1:, 0],
            ))
        return splits[0]

    suite.check('noise-reconstruction-constant', lambda: float(np.mean(split().reconstruction_defect())) / config.dt)
    suite.check('transport-orthogonality', lambda: _max(split().orthogonality))
    suite.check('kernel-alignment', lambda: _max(split().kernel_angles))
    suite.check('noise-correlation', lambda: (
        noise_correlation(system, x0, config.seed, config.correlation_paths, config.horizon, config.dt),
        f'N={config.correlation_paths}',
    ))

    if scenario.is_frame_scenario:
        u0 = scenario.start_frame()
        glm = _memo(lambda: glm_refinement(
            suite.derivative_decomposition, x0, u0, config.seed, config.horizon, config.dt, config.levels, config.n_paths,
        ))
        _refinement_records(suite, 'glm', glm)

        composite = _memo(lambda: composite_check(
            suite.derivative_decomposition, cloud(manifold, config.cloud_size, x0), u0,
            sample_brownian(m, config.horizon, config.dt, config.seed, 0),
        ))
        suite.check('composite-frame-constant', lambda: composite().frame_defect / config.dt)
        suite.check('composite-grid', lambda: (
            composite().grid_ratio, f'J={config.cloud_size}, largest preimage jump {composite().grid.max_jump:.3e}',
        ))
        suite.check('fibre-base-fixed', lambda: 0.0 if composite().base_fixed else 1.0)

    sigma, sigma_dot = scenario.drift_curve()
    sources = cloud(manifold, min(config.cloud_size, 64), x0)
    times = BrownianPath.zeros(m, config.horizon, config.dt).grid
    lifted = _memo(lambda: horizontal_lift_ode(system, sigma, sigma_dot, sources, times))

    def lift_base():
        return _max(manifold.distance(lifted().images[:, 0], np.array([sigma(t) for t in times])))

    def lift_theta():
        still = theta_flow(system, sources, BrownianPath.zeros(m, config.horizon, config.dt))
        return _max(manifold.distance(still.images, lifted().images))

    suite.check('lift-ode-base', lift_base)
    suite.check('lift-ode-theta', lift_theta)


def run_engine(suite):
    seed = suite.config.seed

    def determinism():
        first = sample_brownian(3, 1.0, 1e-3, seed, 7)
        second = sample_brownian(3, 1.0, 1e-3, seed, 7)
        return _max(np.abs(first.increments - second.increments))

    def variance():
        path = sample_brownian(10, 10.0, 1e-3, seed, 1)
        return variance_z_score(path.increments, path.dt), f'{path.increments.size} draws'

    def streams():
        first = sample_brownian(1, 10.0, 1e-3, seed, 2)
        second = sample_brownian(1, 10.0, 1e-3, seed, 3)
        return max_cross_correlation(first.increments, second.increments) * np.sqrt(first.n_steps)

    def correction():
        system = get_scenario('s2-gradient').base_system
        rng = suite.rng('strat-correction')
        K = lambda x: np.outer(x, x)
        points = [system.manifold.random_point(rng) for _ in range(suite.count(200))]
        return _max(_max(np.abs(strat_correction(K, system, x) - x)) for x in points)

    def closed_form():
        c, d = 0.7, 0.3
        group = SpecialOrthogonalGroup(2)
        path = sample_brownian(1, 1.0, 1e-3, seed, 4)
        coefficient = lambda k, g: ((c * ROTATION_GENERATOR)[:, :, None], d * ROTATION_GENERATOR)
        final = integrate_group(group, coefficient, path).final
        angle = c * float(path.values()[-1, 0]) + d * path.horizon
        expected = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        return _max(np.abs(final - expected))

    def regression():
        dts = 0.05 / 2.0 ** np.arange(5)
        return abs(fit_order(dts, 0.3 * dts).order - 1.0)

    suite.check('brownian-determinism', determinism)
    suite.check('brownian-variance', variance)
    suite.check('stream-correlation', streams)
    suite.check('strat-correction', correction)
    suite.check('group-closed-form', closed_form)

    def order(name):
        estimate = convergence_order(name, seed)
        return estimate.order, str(estimate)

    for name in ('torus-drift', 's2-rotation', 'group-abelian', 's2-gradient'):
        suite.check(f'order-{name}', lambda name=name: order(name))
    suite.check('order-regression', regression)


GROUPS = {
    'geometry': run_geometry,
    'decomposition': run_decomposition,
    'skew': run_skew,
    'diffeo': run_diffeo,
    'engine': run_engine,
}
