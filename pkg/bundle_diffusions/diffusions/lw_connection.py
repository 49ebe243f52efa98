"""
The LW connection of a Hormander system: the metric connection on E induced by the fields.

For a section U of E, the connection differentiates the coefficients
Y(y) U(y) and maps the result back with X(x). Its adjoint acts on arbitrary
vector fields through the Lie derivative along the Z^w fields.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import CurvatureInstabilityError, DomainError
from .hormander import E_TOLERANCE, HormanderSystem, Y_map, e_residual, z_vector_field
from .manifolds import FD_STEP, as_array, directional_derivative

logger = logging.getLogger(__name__)

CURVATURE_STEPS = (1e-3, 1e-4)
INSTABILITY_RATIO = 0.1
INSTABILITY_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class MetricE:
    """<v, w>_x = <Y(v), Y(w)> on the fibres of E"""

    system: HormanderSystem

    def __call__(self, x, v, w):
        return float(np.dot(Y_map(self.system, x, v), Y_map(self.system, x, w)))

    def orthonormal_basis(self, x):
        """Columns X(x) V_j for the leading right singular vectors V_j of X(x).

        These span the same space as Gram-Schmidt on the columns of X(x) but are
        orthonormal for the metric without a rank-revealing pivot.
        """
        fields = self.system.field_matrix(x)
        _, s, vt = np.linalg.svd(fields, full_matrices=False)
        rank = self.system.numerical_rank(x)
        return fields @ vt[:rank].T


@dataclass(frozen=True, eq=False)
class CurvatureSample:
    base: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    value: np.ndarray
    ricci: Optional[np.ndarray] = None


def lw_covariant_derivative(system, U, x, v, step=FD_STEP):
    """X(x) applied to the derivative of y -> Y(y) U(y) along v"""
    x = as_array(x)
    here = U(x)
    residual = e_residual(system, x, here)
    if residual > E_TOLERANCE * max(1.0, float(np.linalg.norm(here))):
        raise DomainError('section leaves E near the base point', residual)
    coefficients = lambda y: system.right_inverse(y) @ U(y)
    return system.field_matrix(x) @ directional_derivative(coefficients, system.manifold, x, as_array(v), step)


def lie_bracket(manifold, U, V, x, step=FD_STEP):
    x = as_array(x)
    forward = directional_derivative(V, manifold, x, U(x), step)
    backward = directional_derivative(U, manifold, x, V(x), step)
    return manifold.tangent_projector(x) @ (forward - backward)


def adjoint_covariant_derivative(system, V, x, w, step=FD_STEP):
    """L_{Z^w} V at x, the adjoint connection applied to an arbitrary vector field"""
    x = as_array(x)
    z = z_vector_field(system, x, as_array(w))
    return lie_bracket(system.manifold, z, V, x, step)


def levi_civita_derivative(manifold, U, x, v, step=FD_STEP):
    """Tangential part of the ambient derivative, the induced Levi-Civita connection"""
    x = as_array(x)
    return manifold.tangent_projector(x) @ directional_derivative(U, manifold, x, as_array(v), step)


def _extension(system, x, u):
    if e_residual(system, x, u) <= E_TOLERANCE * max(1.0, float(np.linalg.norm(u))):
        return z_vector_field(system, x, u)
    return lambda y: system.manifold.tangent_projector(y) @ u


def lw_torsion(system, x, u, v, step=FD_STEP):
    U = z_vector_field(system, x, u)
    V = z_vector_field(system, x, v)
    return (
        lw_covariant_derivative(system, V, x, u, step)
        - lw_covariant_derivative(system, U, x, v, step)
        - lie_bracket(system.manifold, U, V, x, step)
    )


def adjoint_torsion(system, x, u, v, step=FD_STEP):
    U = z_vector_field(system, x, u)
    V = z_vector_field(system, x, v)
    return (
        adjoint_covariant_derivative(system, V, x, u, step)
        - adjoint_covariant_derivative(system, U, x, v, step)
        - lie_bracket(system.manifold, U, V, x, step)
    )


def _curvature(system, x, u, v, w, step):
    manifold = system.manifold
    U = _extension(system, x, u)
    V = _extension(system, x, v)
    W = z_vector_field(system, x, w)

    along_v = lambda y: lw_covariant_derivative(system, W, y, V(y), step)
    along_u = lambda y: lw_covariant_derivative(system, W, y, U(y), step)
    bracket = lie_bracket(manifold, U, V, x, step)
    return (
        lw_covariant_derivative(system, along_v, x, u, step)
        - lw_covariant_derivative(system, along_u, x, v, step)
        - lw_covariant_derivative(system, W, x, bracket, step)
    )


def curvature(system, x, u, v, w, check_stability=True):
    """R(u, v) w = [nabla_u, nabla_v] w - nabla_[u,v] w with Z-field extensions"""
    x, u, v, w = (as_array(a) for a in (x, u, v, w))
    coarse_step, fine_step = CURVATURE_STEPS
    fine = _curvature(system, x, u, v, w, fine_step)
    if check_stability:
        coarse = _curvature(system, x, u, v, w, coarse_step)
        scale = max(float(np.linalg.norm(fine)), INSTABILITY_FLOOR)
        if np.linalg.norm(fine - coarse) > INSTABILITY_RATIO * scale:
            raise CurvatureInstabilityError(coarse, fine)
    return fine


def ricci_sharp(system, x, v, check_stability=True):
    """sum_j R(v, e_j) e_j over an orthonormal basis of E_x"""
    x = as_array(x)
    basis = MetricE(system).orthonormal_basis(x)
    total = np.zeros(system.manifold.ambient_dim)
    for j in range(basis.shape[1]):
        total += curvature(system, x, v, basis[:, j], basis[:, j], check_stability)
    return total


def curvature_sample(system, x, u, v, w):
    x = as_array(x)
    value = curvature(system, x, u, v, w)
    return CurvatureSample(x, as_array(u), as_array(v), as_array(w), value, ricci_sharp(system, x, as_array(v)))


def metricity_defect(system, U, W, x, v, step=FD_STEP):
    """d<U,W>(v) - <nabla_v U, W> - <U, nabla_v W> for sections U, W of E"""
    x = as_array(x)
    metric = MetricE(system)
    pairing = lambda y: metric(y, U(y), W(y))
    derivative = float(directional_derivative(pairing, system.manifold, x, as_array(v), step))
    return abs(
        derivative
        - metric(x, lw_covariant_derivative(system, U, x, v, step), W(x))
        - metric(x, U(x), lw_covariant_derivative(system, W, x, v, step))
    )


def kernel_parallel_defect(system, x, v, e, step=FD_STEP):
    """|nabla_v X(e)| for e orthogonal to ker X(x)"""
    x = as_array(x)
    e = system.right_inverse(x) @ system.field_matrix(x) @ np.asarray(e, dtype=float)
    section = lambda y: system.field_matrix(y) @ e
    return float(np.linalg.norm(lw_covariant_derivative(system, section, x, v, step)))
