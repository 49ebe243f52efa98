"""
Principal bundles over embedded manifolds and the semi-connection induced
by an equivariant generator.

A bundle point is stored as one ambient vector b = (x, F.ravel()) where F is
the fibre matrix: a frame u (N x n) for the frame bundle, a group element g
(n x n) for the trivial bundle. The group acts on the right by F -> F a.
"""
import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .exceptions import (
    ConfigurationError, DomainError, EquivarianceError, SplittingDegenerateError,
)
from .groups import GROUP_TOLERANCE, GeneralLinearGroup, LieAlgebraBasis, SpecialOrthogonalGroup
from .hormander import (
    E_TOLERANCE, HormanderSystem, check_constant_rank, e_residual, pseudo_inverse,
)
from .lw_connection import lw_covariant_derivative, ricci_sharp
from .manifolds import (
    FD_STEP, FRAME_CONDITION_LIMIT, POINT_TOLERANCE, ManifoldDescriptor, ScalarField, as_array,
    apply_operator, directional_derivative,
)

logger = logging.getLogger(__name__)

EQUIVARIANCE_TOLERANCE = 1e-8
EQUIVARIANCE_PROBES = 50
FIBRE_CONDITION_LIMIT = 1e4
COMPLETIONS = ('ambient', 'twisted')


class PrincipalBundle(ManifoldDescriptor):
    def __init__(self, base, group, fibre_shape):
        self.base = base
        self.group = group
        self.fibre_shape = fibre_shape
        self.base_dim = base.ambient_dim
        self.ambient_dim = base.ambient_dim + fibre_shape[0] * fibre_shape[1]
        self.intrinsic_dim = base.intrinsic_dim + group.dim

    def split(self, b):
        b = as_array(b)
        x = b[..., :self.base_dim]
        fibre = b[..., self.base_dim:].reshape(b.shape[:-1] + self.fibre_shape)
        return x, fibre

    def join(self, x, fibre):
        fibre = np.asarray(fibre, dtype=float)
        return np.concatenate([np.asarray(x, dtype=float), fibre.reshape(fibre.shape[:-2] + (-1,))], axis=-1)

    def project(self, b):
        return as_array(b)[..., :self.base_dim]

    def push_vector(self, w):
        """T pi of a tangent vector"""
        return as_array(w)[..., :self.base_dim]

    def pull_covector(self, a):
        """(T pi)^* of a base covector"""
        a = np.asarray(a, dtype=float)
        return np.concatenate([a, np.zeros(a.shape[:-1] + (self.ambient_dim - self.base_dim,))], axis=-1)

    def act(self, b, a):
        """Right action R_a, also the tangent map T R_a since it is linear in b"""
        x, fibre = self.split(b)
        return self.join(x, fibre @ a)

    def act_columns(self, vectors, a):
        return self.act(np.asarray(vectors).T, a).T

    def fundamental(self, b, xi):
        """d/dt b exp(t xi) at t = 0"""
        x, fibre = self.split(b)
        return self.join(np.zeros_like(x), fibre @ xi)

    def fibre_inverse(self, fibre):
        raise NotImplementedError

    def ambient_lift(self, b, v):
        raise NotImplementedError

    def random_fibre(self, x, rng):
        raise NotImplementedError

    def random_point(self, rng):
        x = self.base.random_point(rng)
        return self.join(x, self.random_fibre(x, rng))

    def difference(self, b, c):
        xb, fb = self.split(b)
        xc, fc = self.split(c)
        return self.join(self.base.difference(xb, xc), fc - fb)

    def fibre_residual(self, b):
        raise NotImplementedError


class FrameBundle(PrincipalBundle):
    """Linear frames u: R^n -> T_xM with structure group GL+(n)"""

    def __init__(self, base):
        super().__init__(base, GeneralLinearGroup(base.intrinsic_dim), (base.ambient_dim, base.intrinsic_dim))
        self.name = f'GL({base.name})'

    def constraint(self, b):
        x, frame = self.split(b)
        normal = frame - self.base.tangent_projector(x) @ frame
        return np.concatenate([self.base.constraint(x), normal.reshape(normal.shape[:-2] + (-1,))], axis=-1)

    def retraction(self, b):
        x, frame = self.split(b)
        x = self.base.retraction(x)
        return self.join(x, self.base.tangent_projector(x) @ frame)

    def project_tangent(self, b, vectors):
        """(x', U') -> (P x', P U' + dP[P x'] u) applied to the columns of vectors"""
        x, frame = self.split(b)
        vectors = np.asarray(vectors, dtype=float)
        projector = self.base.tangent_projector(x)
        columns = []
        for w in vectors.T:
            wx, wf = self.split(w)
            base_part = projector @ wx
            columns.append(self.join(base_part, projector @ wf + self.base.projector_derivative(x, base_part) @ frame))
        return np.array(columns).T

    def tangent_projector(self, b):
        return self.project_tangent(b, np.eye(self.ambient_dim))

    def fibre_inverse(self, frame):
        return np.linalg.pinv(frame)

    def ambient_lift(self, b, v):
        """Levi-Civita lift: the frame moves by the normal correction dP[v] u only"""
        x, frame = self.split(b)
        return self.join(v, self.base.projector_derivative(x, v) @ frame)

    def random_fibre(self, x, rng, scale=0.3):
        return self.base.tangent_basis(x) @ self.group.random_element(rng, scale)

    def fibre_residual(self, b):
        _, frame = self.split(b)
        return float(np.linalg.cond(frame))


class TrivialBundle(PrincipalBundle):
    """M x SO(n)"""

    def __init__(self, base, n=2):
        super().__init__(base, SpecialOrthogonalGroup(n), (n, n))
        self.name = f'{base.name}xSO({n})'

    def constraint(self, b):
        x, g = self.split(b)
        gram = np.swapaxes(g, -1, -2) @ g - np.eye(self.group.n)
        return np.concatenate([self.base.constraint(x), gram.reshape(gram.shape[:-2] + (-1,))], axis=-1)

    def retraction(self, b):
        x, g = self.split(b)
        return self.join(self.base.retraction(x), self.group.project(g))

    def tangent_projector(self, b):
        x, g = self.split(b)
        n = self.group.n
        fibre_columns = []
        for k in range(n * n):
            w = np.zeros(n * n)
            w[k] = 1.0
            a = g.T @ w.reshape(n, n)
            fibre_columns.append((g @ (0.5 * (a - a.T))).ravel())
        projector = np.zeros((self.ambient_dim, self.ambient_dim))
        projector[:self.base_dim, :self.base_dim] = self.base.tangent_projector(x)
        projector[self.base_dim:, self.base_dim:] = np.column_stack(fibre_columns)
        return projector

    def fibre_inverse(self, g):
        return np.swapaxes(g, -1, -2)

    def ambient_lift(self, b, v):
        return self.join(v, np.zeros(self.fibre_shape))

    def random_fibre(self, x, rng, scale=1.0):
        return self.group.random_element(rng, scale)

    def fibre_residual(self, b):
        _, g = self.split(b)
        return self.group.residual(g)


@dataclass(frozen=True, eq=False)
class BundlePoint:
    bundle: PrincipalBundle
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        coords.setflags(write=False)
        object.__setattr__(self, 'coords', coords)
        residual = float(np.max(np.abs(self.bundle.constraint(coords)), initial=0.0))
        if residual > POINT_TOLERANCE:
            raise DomainError(f'point is not on {self.bundle.name}', residual)
        if isinstance(self.bundle, TrivialBundle) and self.bundle.fibre_residual(coords) > GROUP_TOLERANCE:
            raise DomainError('fibre element is not in the group', self.bundle.fibre_residual(coords))
        if isinstance(self.bundle, FrameBundle) and self.bundle.fibre_residual(coords) >= FIBRE_CONDITION_LIMIT:
            raise DomainError('frame is degenerate', self.bundle.fibre_residual(coords))

    @property
    def x(self):
        return self.bundle.project(self.coords)

    @property
    def fibre(self):
        return self.bundle.split(self.coords)[1]


@dataclass(frozen=True, eq=False)
class BundleGenerator:
    """Equivariant generator on a bundle: lifted base fields first, then fibre noise"""

    bundle: PrincipalBundle
    base_system: HormanderSystem
    system: HormanderSystem
    n_base_noise: int
    label: str = ''

    @property
    def n_fibre_noise(self):
        return self.system.n_fields - self.n_base_noise

    def with_fibre_noise(self, fields, drift, n_fields, label=''):
        """Append vertical fields driven by an independent noise and a vertical drift"""
        system = self.system
        combined = HormanderSystem(
            manifold=self.bundle,
            fields=lambda b: np.hstack([system.field_matrix(b), np.reshape(fields(b), (self.bundle.ambient_dim, n_fields))]),
            drift=lambda b: system.drift_vector(b) + drift(b),
            n_fields=system.n_fields + n_fields,
            label=label or f'{system.label} + fibre noise',
        )
        return BundleGenerator(self.bundle, self.base_system, combined, self.n_base_noise, label or self.label)

    def with_base_field(self, vector):
        """Append the field (vector, 0): a generator that no longer lifts the base operator"""
        system = self.system
        bundle = self.bundle

        def fields(b):
            x = bundle.project(b)
            extra = bundle.ambient_lift(b, bundle.base.tangent_projector(x) @ vector)
            return np.column_stack([system.field_matrix(b), extra])

        broken = HormanderSystem(bundle, fields, system.drift_vector, system.n_fields + 1, label='broken lift')
        return BundleGenerator(bundle, self.base_system, broken, self.n_base_noise + 1, 'broken lift')


def derivative_lift_matrix(bundle, system, b):
    """Columns (X^j(x), P DX^j[u] + dP[X^j] u): the fields of the derivative flow.

    Broadcasts over leading axes of b when the system has an analytic jacobian.
    """
    x, frame = bundle.split(b)
    base = bundle.base
    fields = system.field_matrix(x)
    if system.jacobian is not None:
        derivatives = np.einsum('...amk,...ki->...aim', system.jacobian(x), frame)
    else:
        derivatives = np.stack([system.field_derivative(x, frame[:, i]) for i in range(frame.shape[-1])], axis=1)
    covariant = np.einsum('...ab,...bim->...aim', base.tangent_projector(x), derivatives)
    correction = np.stack(
        [base.projector_derivative(x, fields[..., j]) @ frame for j in range(fields.shape[-1])], axis=-1,
    )
    fibre = covariant + correction
    return np.concatenate([fields, fibre.reshape(fibre.shape[:-3] + (-1, fields.shape[-1]))], axis=-2)


def derivative_lift_drift(bundle, system, b):
    x, frame = bundle.split(b)
    base = bundle.base
    drift = system.drift_vector(x)
    if system.drift_jacobian is not None:
        derivatives = system.drift_jacobian(x) @ frame
    else:
        derivatives = np.stack([system.drift_derivative(x, frame[..., :, i]) for i in range(frame.shape[-1])], axis=-1)
    fibre = base.tangent_projector(x) @ derivatives + base.projector_derivative(x, drift) @ frame
    return bundle.join(drift, fibre)


def derivative_flow_generator(base_system, bundle=None):
    """Generator of the derivative flow u_t = T xi_t u_0 on the frame bundle"""
    bundle = bundle or FrameBundle(base_system.manifold)
    system = HormanderSystem(
        manifold=bundle,
        fields=partial(derivative_lift_matrix, bundle, base_system),
        drift=partial(derivative_lift_drift, bundle, base_system),
        n_fields=base_system.n_fields,
        label=f'derivative flow of {base_system}',
    )
    return BundleGenerator(bundle, base_system, system, base_system.n_fields, system.label)


def product_generator(base_system, bundle, twist=None, twist_strength=0.0):
    """Fields (X^p(x), tau <a, X^p(x)> g Z) on M x G with Z the central generator"""
    central = bundle.group.central
    if central is None:
        raise ConfigurationError(f'{bundle.group.name} has no central generator for the twist')
    twist = np.zeros(bundle.base_dim) if twist is None else np.asarray(twist, dtype=float)

    def fields(b):
        x, g = bundle.split(b)
        base_fields = base_system.field_matrix(x)
        weights = twist_strength * (twist @ base_fields)
        fibre = np.einsum('p,ab->abp', weights, g @ central)
        return np.vstack([base_fields, fibre.reshape(-1, base_fields.shape[1])])

    def drift(b):
        x, g = bundle.split(b)
        return bundle.join(base_system.drift_vector(x), np.zeros(bundle.fibre_shape))

    system = HormanderSystem(bundle, fields, drift, base_system.n_fields, label=f'product generator of {base_system}')
    return BundleGenerator(bundle, base_system, system, base_system.n_fields, system.label)


def equivariance_probe(generator, points, rng):
    """Largest relative defect of X~(b a) - T R_a X~(b) over fields and drift"""
    bundle = generator.bundle
    system = generator.system
    worst = 0.0
    for b in points:
        a = bundle.group.random_element(rng)
        moved = bundle.act(b, a)
        fields = np.column_stack([system.field_matrix(b), system.drift_vector(b)])
        fields_moved = np.column_stack([system.field_matrix(moved), system.drift_vector(moved)])
        defect = np.max(np.abs(fields_moved - bundle.act_columns(fields, a)), initial=0.0)
        worst = max(worst, float(defect) / max(1.0, float(np.max(np.abs(fields), initial=0.0))))
    return worst


def fundamental_field(bundle, b, xi):
    return bundle.fundamental(as_array(b), np.asarray(xi, dtype=float))


class SemiConnection:
    """Horizontal lift induced by an equivariant generator, completed to a connection form"""

    def __init__(self, generator, completion='ambient', twist_covector=None):
        if completion not in COMPLETIONS:
            raise ConfigurationError(f'unknown completion {completion!r}')
        self.generator = generator
        self.bundle = generator.bundle
        self.base_system = generator.base_system
        self.completion = completion
        if completion == 'twisted':
            if self.bundle.group.central is None:
                raise ConfigurationError(f'{self.bundle.group.name} has no central element for a twisted completion')
            if twist_covector is None:
                twist_covector = np.cos(np.arange(self.bundle.base_dim) + 0.5)
        self.twist_covector = twist_covector

    def horizontal_lift_matrix(self, b):
        """H_b = sigma^B restricted to base covectors, composed with the pseudo-inverse of sigma^A"""
        b = as_array(b)
        x = self.bundle.project(b)
        bundle_fields = self.generator.system.field_matrix(b)
        base_fields = bundle_fields[:self.bundle.base_dim]
        symbol_columns = bundle_fields @ base_fields.T
        return symbol_columns @ pseudo_inverse(self.base_system.symbol_matrix(x))

    def horizontal_lift(self, b, v, covector=None):
        b = as_array(b)
        v = as_array(v)
        x = self.bundle.project(b)
        residual = e_residual(self.base_system, x, v)
        if residual > E_TOLERANCE * max(1.0, float(np.linalg.norm(v))):
            raise DomainError('vector is not in E_x', residual)
        if covector is None:
            covector = pseudo_inverse(self.base_system.symbol_matrix(x)) @ v
        bundle_symbol = self.generator.system.symbol_matrix(b)
        return bundle_symbol @ self.bundle.pull_covector(covector)

    def complement_lift(self, b, vectors):
        """Lift of base vectors outside E, one column per vector"""
        columns = []
        for v in np.asarray(vectors, dtype=float).T:
            lift = self.bundle.ambient_lift(b, v)
            if self.completion == 'twisted':
                lift = lift + self.bundle.fundamental(b, float(self.twist_covector @ v) * self.bundle.group.central)
            columns.append(lift)
        return np.array(columns).T

    def connection_form(self, b, w):
        """omega(w) as algebra matrices; w may be one vector or a D x r matrix of vectors"""
        b = as_array(b)
        w = np.asarray(w, dtype=float)
        single = w.ndim == 1
        vectors = w[:, None] if single else w
        bundle = self.bundle
        x, fibre = bundle.split(b)
        if isinstance(bundle, FrameBundle) and np.linalg.cond(fibre) > FRAME_CONDITION_LIMIT:
            raise SplittingDegenerateError(f'frame condition number {np.linalg.cond(fibre):.3e}')

        tangent = bundle.base.tangent_projector(x) @ vectors[:bundle.base_dim]
        inside = self.base_system.e_projector(x) @ tangent
        outside = tangent - inside
        vertical = vectors - self.horizontal_lift_matrix(b) @ inside
        if np.any(outside):
            vertical = vertical - self.complement_lift(b, outside)
        fibre_parts = vertical[bundle.base_dim:].T.reshape((vectors.shape[1],) + bundle.fibre_shape)
        xi = bundle.fibre_inverse(fibre) @ fibre_parts
        return xi[0] if single else xi


@dataclass(frozen=True, eq=False)
class VerticalCoeffs:
    basis: LieAlgebraBasis
    alpha: Callable
    beta: Callable

    def endomorphism(self, b):
        """sum alpha^ij A_i A_j + sum beta^k A_k, the action of B^V on fibre-linear functions"""
        matrices = self.basis.matrices
        second = np.einsum('ij,iab,jbc->ac', self.alpha(b), matrices, matrices)
        return second + self.basis.element(self.beta(b))

    def second_order_element(self, b):
        matrices = self.basis.matrices
        return np.einsum('ij,iab,jcd->abcd', self.alpha(b), matrices, matrices)

    def first_order_element(self, b):
        return self.basis.element(self.beta(b))


@dataclass(frozen=True, eq=False)
class Decomposition:
    generator: BundleGenerator
    connection: SemiConnection
    horizontal: HormanderSystem
    coeffs: VerticalCoeffs

    def horizontal_apply(self, f, b, step=FD_STEP):
        return apply_operator(self.horizontal, f, b, step)

    def vertical_apply(self, f, b, step=FD_STEP):
        return apply_operator(self.generator.system, f, b, step) - apply_operator(self.horizontal, f, b, step)

    def horizontal_generator(self):
        generator = self.generator
        return BundleGenerator(generator.bundle, generator.base_system, self.horizontal, self.horizontal.n_fields, 'horizontal part')


def horizontal_system(connection):
    """A^H: horizontal lifts of the base fields and of the base drift"""
    bundle = connection.bundle
    base = connection.base_system

    def fields(b):
        return connection.horizontal_lift_matrix(b) @ base.field_matrix(bundle.project(b))

    def drift(b):
        return connection.horizontal_lift_matrix(b) @ base.drift_vector(bundle.project(b))

    return HormanderSystem(bundle, fields, drift, base.n_fields, label=f'horizontal lift of {base}')


def _alpha(connection, basis, b):
    forms = connection.connection_form(b, connection.generator.system.field_matrix(b))
    coordinates = basis.coordinates(forms)
    return 0.5 * coordinates.T @ coordinates


def _beta(connection, basis, b, step=FD_STEP):
    system = connection.generator.system
    b = as_array(b)
    fields = system.field_matrix(b)
    total = basis.coordinates(connection.connection_form(b, system.drift_vector(b)))
    for j in range(fields.shape[1]):
        if not np.any(fields[:, j]):
            continue
        pairing = lambda c, j=j: basis.coordinates(connection.connection_form(c, system.field_matrix(c)[:, j]))
        total = total + 0.5 * directional_derivative(pairing, connection.bundle, b, fields[:, j], step)
    return total


def decompose(generator, completion='ambient', basis=None, probe_points=None, rng=None):
    """Split an equivariant generator into its horizontal lift and a vertical part"""
    rng = rng if rng is not None else np.random.default_rng(0)
    bundle = generator.bundle
    if probe_points is None:
        probe_points = [bundle.random_point(rng) for _ in range(EQUIVARIANCE_PROBES)]
    defect = equivariance_probe(generator, probe_points, rng)
    if defect > EQUIVARIANCE_TOLERANCE:
        raise EquivarianceError(defect, EQUIVARIANCE_TOLERANCE)
    check_constant_rank(generator.base_system, [bundle.project(b) for b in probe_points])

    connection = SemiConnection(generator, completion)
    basis = basis if basis is not None else bundle.group.basis
    coeffs = VerticalCoeffs(basis, partial(_alpha, connection, basis), partial(_beta, connection, basis))
    logger.debug('decomposed %s with %s completion', generator.label, completion)
    return Decomposition(generator, connection, horizontal_system(connection), coeffs)


@dataclass(frozen=True)
class DefectReport:
    max_defect: float
    n_probes: int


def verticality_check(apply, bundle, f1s, f2s, points):
    """max |D(f1 (f2 o pi)) - (f2 o pi) D(f1)| over probes and test functions"""
    worst = 0.0
    count = 0
    for f2 in f2s:
        lifted = f2.pullback(bundle.project, bundle.pull_covector)
        for f1 in f1s:
            product = f1.times(lifted)
            for b in points:
                defect = apply(product, b) - f2(bundle.project(b)) * apply(f1, b)
                worst = max(worst, abs(defect))
                count += 1
    return DefectReport(worst, count)


@dataclass(frozen=True)
class EquivarianceReport:
    alpha_defect: float
    beta_defect: float

    @property
    def max_defect(self):
        return max(self.alpha_defect, self.beta_defect)


def equivariance_alpha_beta(coeffs, bundle, b, g):
    """alpha(b g) against (Ad(g^-1) x Ad(g^-1)) alpha(b), beta likewise"""
    basis = coeffs.basis
    inverse = bundle.group.inverse(g)
    images = np.array([inverse @ a @ g for a in basis.matrices])
    adjoint = basis.coordinates(images).T
    moved = bundle.act(b, g)
    alpha_defect = np.max(np.abs(coeffs.alpha(moved) - adjoint @ coeffs.alpha(b) @ adjoint.T))
    beta_defect = np.max(np.abs(coeffs.beta(moved) - adjoint @ coeffs.beta(b)))
    return EquivarianceReport(float(alpha_defect), float(beta_defect))


def predicted_derivative_coefficients(base_system, bundle, b, basis):
    """alpha, beta of the derivative flow from the LW connection.

    zeta_p = u^-1 nabla_{u(.)} X^p gives alpha = 1/2 sum zeta_p x zeta_p, and
    beta = -1/2 sum_p u^-1 nabla_{nabla_{u(.)} X^p} X^p - 1/2 u^-1 Ric(u .)
    plus u^-1 nabla_{u(.)} A for the drift.
    """
    x, frame = bundle.split(b)
    inverse = np.linalg.pinv(frame)
    n = frame.shape[1]
    zetas = []
    second = np.zeros((bundle.base_dim, n))
    for p in range(base_system.n_fields):
        field = lambda y, p=p: base_system.field_matrix(y)[:, p]
        derivative = np.column_stack([lw_covariant_derivative(base_system, field, x, frame[:, i]) for i in range(n)])
        zetas.append(inverse @ derivative)
        second += np.column_stack([lw_covariant_derivative(base_system, field, x, derivative[:, i]) for i in range(n)])

    coordinates = basis.coordinates(np.array(zetas))
    alpha = 0.5 * coordinates.T @ coordinates
    ricci = np.column_stack([ricci_sharp(base_system, x, frame[:, i]) for i in range(n)])
    drift = base_system.drift_vector
    drift_part = np.column_stack([lw_covariant_derivative(base_system, drift, x, frame[:, i]) for i in range(n)])
    beta = basis.coordinates(inverse @ (drift_part - 0.5 * second - 0.5 * ricci))
    return alpha, beta


@dataclass(frozen=True)
class WeitzenbockReport:
    way_coefficients: np.ndarray
    way_ricci: np.ndarray

    @property
    def defect(self):
        return float(np.max(np.abs(self.way_coefficients - self.way_ricci)))


def weitzenbock_on_oneform(bundle, u, phi, coeffs, base_system, ricci=None):
    """B^V acting on the fibre-linear function phi~(u)(xi) = phi(u xi), computed two ways"""
    if not isinstance(bundle, FrameBundle):
        raise ConfigurationError('the Weitzenbock action on one-forms needs the frame bundle')
    x, frame = bundle.split(u)
    covector = phi.covector(x)
    way_coefficients = covector @ frame @ coeffs.endomorphism(as_array(u))
    if ricci is None:
        ricci = lambda v: ricci_sharp(base_system, x, v)
    way_ricci = -0.5 * np.array([covector @ ricci(frame[:, i]) for i in range(frame.shape[1])])
    return WeitzenbockReport(way_coefficients, way_ricci)


def associated_covariant_derivative(connection, Z, b, w, step=FD_STEP):
    """u d(Z~)(h_u(w)) for the equivariant function Z~(c) = c^-1 Z(pi(c)) of a vector field Z"""
    bundle = connection.bundle
    if not isinstance(bundle, FrameBundle):
        raise ConfigurationError('associated covariant derivatives are implemented for F = TM on frame bundles')
    b = as_array(b)
    _, frame = bundle.split(b)
    lift = connection.horizontal_lift(b, w)

    def coefficients(c):
        y, fibre = bundle.split(c)
        return bundle.fibre_inverse(fibre) @ Z(y)

    return frame @ directional_derivative(coefficients, bundle, b, lift, step)


def scaled_field(field, c):
    return ScalarField(f'{c}*{field.name}', lambda x: c * field.value(x), None if field.gradient is None else (lambda x: c * field.gradient(x)))
