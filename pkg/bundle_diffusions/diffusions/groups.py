"""
Matrix Lie groups acting on the fibres: GL+(n), SO(n) and their algebras.

Elements are square arrays. The exponential comes from scipy and projection
back onto the group uses the polar decomposition.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, polar

from .exceptions import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

GROUP_TOLERANCE = 1e-10
CLOSURE_TOLERANCE = 1e-10

ROTATION_GENERATOR = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class LieAlgebraBasis:
    """Basis A_1..A_k of a matrix Lie algebra with its structure constants"""

    matrices: np.ndarray
    _coordinate_map: np.ndarray = field(init=False, repr=False)
    _structure: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        matrices = np.array(self.matrices, dtype=float)
        object.__setattr__(self, 'matrices', matrices)
        flat = matrices.reshape(matrices.shape[0], -1)
        object.__setattr__(self, '_coordinate_map', np.linalg.pinv(flat.T))
        structure = np.zeros((self.dim, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                structure[i, j] = self.coordinates(self.bracket(matrices[i], matrices[j]))
        object.__setattr__(self, '_structure', structure)

    @property
    def dim(self):
        return self.matrices.shape[0]

    @property
    def size(self):
        return self.matrices.shape[1]

    @property
    def structure_constants(self):
        return self._structure

    @staticmethod
    def bracket(a, b):
        return a @ b - b @ a

    def coordinates(self, xi):
        """Coordinates of one element or of a stack of elements (..., n, n) -> (..., k)"""
        xi = np.asarray(xi, dtype=float)
        flat = xi.reshape(xi.shape[:-2] + (self.size * self.size,))
        return flat @ self._coordinate_map.T

    def element(self, coordinates):
        return np.einsum('...k,kab->...ab', np.asarray(coordinates, dtype=float), self.matrices)

    def closure_residual(self):
        """Largest distance of a bracket of basis elements from the span"""
        worst = 0.0
        for i in range(self.dim):
            for j in range(self.dim):
                bracket = self.bracket(self.matrices[i], self.matrices[j])
                worst = max(worst, float(np.max(np.abs(self.element(self.coordinates(bracket)) - bracket))))
        return worst

    def rotated(self, change):
        """Basis B_i = sum_j change[i, j] A_j"""
        return LieAlgebraBasis(np.einsum('ij,jab->iab', np.asarray(change, dtype=float), self.matrices))


class MatrixGroup:
    name = ''
    compact = True

    def __init__(self, n, basis, central=None):
        self.n = n
        self.basis = basis
        self.central = central

    @property
    def dim(self):
        return self.basis.dim

    def identity(self):
        return np.eye(self.n)

    def exp(self, xi):
        return expm(np.asarray(xi, dtype=float))

    def inverse(self, g):
        return np.linalg.inv(g)

    def project(self, g):
        return np.asarray(g, dtype=float)

    def residual(self, g):
        raise NotImplementedError

    def adjoint(self, g, xi):
        return g @ xi @ self.inverse(g)

    def adjoint_matrix(self, g):
        """Matrix of Ad(g) in the algebra basis"""
        images = np.array([self.adjoint(g, a) for a in self.basis.matrices])
        return self.basis.coordinates(images).T

    def random_element(self, rng, scale=0.5):
        return self.exp(scale * self.basis.element(rng.standard_normal(self.dim)))

    def __repr__(self):
        return f'<{self.__class__.__name__} {self.name}>'


class SpecialOrthogonalGroup(MatrixGroup):
    compact = True

    def __init__(self, n):
        generators = []
        for a in range(n):
            for b in range(a + 1, n):
                generator = np.zeros((n, n))
                generator[b, a] = 1.0
                generator[a, b] = -1.0
                generators.append(generator)
        central = ROTATION_GENERATOR if n == 2 else None
        super().__init__(n, LieAlgebraBasis(np.array(generators)), central)
        self.name = f'SO({n})'

    def inverse(self, g):
        return np.swapaxes(g, -1, -2)

    def project(self, g):
        """Nearest rotation by polar decomposition"""
        rotation, _ = polar(np.asarray(g, dtype=float))
        if np.linalg.det(rotation) <= 0.0:
            raise DomainError('matrix left the identity component of SO(n)')
        return rotation

    def residual(self, g):
        g = np.asarray(g, dtype=float)
        orthogonality = float(np.max(np.abs(g.T @ g - np.eye(self.n))))
        return orthogonality if np.linalg.det(g) > 0.0 else np.inf


class GeneralLinearGroup(MatrixGroup):
    """GL+(n), the identity component, acting on frames"""

    compact = False

    def __init__(self, n):
        generators = []
        for a in range(n):
            for b in range(n):
                generator = np.zeros((n, n))
                generator[a, b] = 1.0
                generators.append(generator)
        super().__init__(n, LieAlgebraBasis(np.array(generators)), np.eye(n))
        self.name = f'GL({n})'

    def residual(self, g):
        return 0.0 if np.linalg.det(np.asarray(g, dtype=float)) > 0.0 else np.inf


def matrix_group(name, n):
    if name == 'SO':
        return SpecialOrthogonalGroup(n)
    if name == 'GL':
        return GeneralLinearGroup(n)
    raise ConfigurationError(f'unknown matrix group {name}({n})')
