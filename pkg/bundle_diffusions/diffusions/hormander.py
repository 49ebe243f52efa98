"""
Driving data of a diffusion operator in Hormander form.

A system carries m tangent vector fields X^1..X^m, stored together as the
N x m matrix X(x), and a drift A. Everything else (the symbol, the bundle E
it spans, the right inverse Y, the kernel projections and the Z^w fields)
is derived pointwise from X.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ConstantRankError, DomainError
from .manifolds import (
    FD_STEP, ManifoldDescriptor, ManifoldPoint, OneForm, TangentVector, apply_operator, as_array,
    check_tangent_fields, directional_derivative,
)

logger = logging.getLogger(__name__)

PINV_CUTOFF = 1e-10
RANK_TOLERANCE = 1e-8
E_TOLERANCE = 1e-8
ALONG_TOLERANCE = 1e-5


def pseudo_inverse(matrix, cutoff=PINV_CUTOFF):
    """Minimum-norm inverse; singular values below cutoff * s_max count as zero. Broadcasts over stacks"""
    matrix = np.asarray(matrix, dtype=float)
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.shape[-1] == 0:
        return np.zeros(matrix.shape[:-2] + (matrix.shape[-1], matrix.shape[-2]))
    keep = s > cutoff * s[..., :1]
    inverse_values = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.swapaxes(vt, -1, -2) @ (inverse_values[..., :, None] * np.swapaxes(u, -1, -2))


@dataclass(frozen=True, eq=False)
class HormanderSystem:
    manifold: ManifoldDescriptor
    fields: Callable
    drift: Callable
    n_fields: int
    rank: Optional[int] = None
    jacobian: Optional[Callable] = None
    drift_jacobian: Optional[Callable] = None
    label: str = ''

    def field_matrix(self, x):
        return np.asarray(self.fields(as_array(x)), dtype=float)

    def drift_vector(self, x):
        return np.asarray(self.drift(as_array(x)), dtype=float)

    def symbol_matrix(self, x):
        fields = self.field_matrix(x)
        return fields @ np.swapaxes(fields, -1, -2)

    def numerical_rank(self, x):
        s = np.linalg.svd(self.field_matrix(x), compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > RANK_TOLERANCE * s[0]))

    def right_inverse(self, x):
        """Y(x): minimum-norm right inverse of X(x) on E_x, an m x N matrix"""
        return pseudo_inverse(self.field_matrix(x))

    def e_projector(self, x):
        """Orthogonal projector of the ambient space onto E_x"""
        return self.field_matrix(x) @ self.right_inverse(x)

    def kernel_projector(self, x):
        k = np.eye(self.n_fields) - self.right_inverse(x) @ self.field_matrix(x)
        return 0.5 * (k + np.swapaxes(k, -1, -2))

    def field_derivative(self, x, v, step=FD_STEP):
        """Derivative of the field matrix at x along v (N x m)"""
        if self.jacobian is not None:
            return np.einsum('ijk,k->ij', self.jacobian(as_array(x)), v)
        return directional_derivative(self.field_matrix, self.manifold, as_array(x), v, step)

    def drift_derivative(self, x, v, step=FD_STEP):
        if self.drift_jacobian is not None:
            return self.drift_jacobian(as_array(x)) @ v
        return directional_derivative(self.drift_vector, self.manifold, as_array(x), v, step)

    def validate(self, points):
        """Tangency of every field and of the drift at the given points"""
        for x in points:
            check_tangent_fields(self.manifold, x, np.column_stack([self.field_matrix(x), self.drift_vector(x)]))

    def __str__(self):
        return self.label or f'Hormander system on {self.manifold.name}'


@dataclass(frozen=True, eq=False)
class SymbolOperator:
    base: ManifoldPoint
    matrix: np.ndarray

    @property
    def rank(self):
        values = np.linalg.eigvalsh(self.matrix)
        if values[-1] <= 0.0:
            return 0
        return int(np.sum(values > RANK_TOLERANCE ** 2 * values[-1]))

    def image_basis(self):
        values, vectors = np.linalg.eigh(self.matrix)
        return vectors[:, values > RANK_TOLERANCE ** 2 * max(values[-1], 0.0)]

    def __call__(self, covector):
        return self.matrix @ np.asarray(covector, dtype=float)


def _point(system, x):
    return x if isinstance(x, ManifoldPoint) else ManifoldPoint(x, system.manifold)


def apply_X(system, x, e):
    point = _point(system, x)
    return TangentVector(point, system.field_matrix(point.coords) @ np.asarray(e, dtype=float))


def symbol(system, x):
    point = _point(system, x)
    operator = SymbolOperator(point, system.symbol_matrix(point.coords))
    if system.rank is not None and operator.rank != system.rank:
        raise ConstantRankError(operator.rank, system.rank, point.coords)
    return operator


def check_constant_rank(system, points):
    """Numerical rank of X at every point; raises on the first deviation"""
    expected = system.rank
    ranks = []
    for x in points:
        rank = system.numerical_rank(x)
        if expected is None:
            expected = rank
        if rank != expected:
            raise ConstantRankError(rank, expected, np.asarray(x))
        ranks.append(rank)
    logger.debug('constant rank %s at %d points of %s', expected, len(ranks), system)
    return np.array(ranks)


def e_residual(system, x, v):
    v = as_array(v)
    return float(np.linalg.norm(v - system.e_projector(as_array(x)) @ v))


def Y_map(system, x, v):
    x = as_array(x)
    v = as_array(v)
    residual = e_residual(system, x, v)
    if residual > E_TOLERANCE * max(1.0, float(np.linalg.norm(v))):
        raise DomainError('vector is not in E_x', residual)
    return system.right_inverse(x) @ v


def kernel_projection(system, x):
    k = system.kernel_projector(as_array(x))
    return k, np.eye(system.n_fields) - k


def z_vector_field(system, x, w):
    """The field y -> X(y) Y(x) w as a plain array map"""
    coefficients = Y_map(system, x, w)
    return lambda y: system.field_matrix(y) @ coefficients


def Z_field(system, x, w, y):
    point = _point(system, y)
    return TangentVector(point, z_vector_field(system, x, w)(point.coords))


def delta(system, phi, x, step=FD_STEP):
    """delta(phi) = 1/2 sum_j d(phi(X^j))(X^j(x)) + phi(A(x))"""
    x = as_array(x)
    manifold = system.manifold
    fields = system.field_matrix(x)
    drift = system.drift_vector(x)
    check_tangent_fields(manifold, x, np.column_stack([fields, drift]))

    total = 0.0
    for j in range(fields.shape[1]):
        if not np.any(fields[:, j]):
            continue
        pairing = lambda y, j=j: phi(y, system.field_matrix(y)[:, j])
        total += 0.5 * float(directional_derivative(pairing, manifold, x, fields[:, j], step))
    return total + phi(x, drift)


def polarization_symbol(system, f, g, x, step=FD_STEP):
    """A(fg) - A(f) g - f A(g), which equals df(X X^T dg) at x"""
    x = as_array(x)
    product = apply_operator(system, f.times(g), x, step)
    return product - apply_operator(system, f, x, step) * g(x) - f(x) * apply_operator(system, g, x, step)


@dataclass(frozen=True)
class AlongReport:
    max_defect: float
    n_points: int
    n_forms: int
    tolerance: float = ALONG_TOLERANCE

    @property
    def passed(self):
        return self.max_defect <= self.tolerance


def annihilator_forms(manifold, subbundle_probe):
    """Covector fields (I - Pi_S) P c vanishing on S, one per ambient basis vector c"""

    def annihilator(y):
        basis = np.atleast_2d(np.asarray(subbundle_probe(y), dtype=float).T).T
        projector = basis @ pseudo_inverse(basis)
        return (np.eye(manifold.ambient_dim) - projector) @ manifold.tangent_projector(y)

    return [
        OneForm(f'annihilator[{i}]', lambda y, i=i: annihilator(y)[:, i])
        for i in range(manifold.ambient_dim)
    ]


def is_along(system, subbundle_probe, points, tolerance=ALONG_TOLERANCE):
    """max |delta(phi)| over one-forms vanishing on S at the sample points"""
    forms = annihilator_forms(system.manifold, subbundle_probe)
    worst = 0.0
    for x in points:
        for phi in forms:
            worst = max(worst, abs(delta(system, phi, x)))
    return AlongReport(worst, len(points), len(forms), tolerance)


def is_strongly_cohesive(system, points, tolerance=ALONG_TOLERANCE):
    """Constant rank plus being along the image of the symbol"""
    check_constant_rank(system, points)
    return is_along(system, system.field_matrix, points, tolerance)


@dataclass(frozen=True)
class DiagramReport:
    max_error: float
    n_points: int
    n_covectors: int


def symbol_projection_check(bundle_system, base_system, bundle, points, rng, n_covectors=4):
    """max |T pi sigma^B (T pi)^* a - sigma^A a| over probe points and covectors"""
    worst = 0.0
    for b in points:
        x = bundle.project(b)
        bundle_symbol = bundle_system.symbol_matrix(b)
        base_symbol = base_system.symbol_matrix(x)
        covectors = np.column_stack([np.eye(base_system.manifold.ambient_dim), rng.standard_normal((base_system.manifold.ambient_dim, n_covectors))])
        for a in covectors.T:
            pushed = bundle.push_vector(bundle_symbol @ bundle.pull_covector(a))
            worst = max(worst, float(np.max(np.abs(pushed - base_symbol @ a))))
    return DiagramReport(worst, len(points), n_covectors + base_system.manifold.ambient_dim)
