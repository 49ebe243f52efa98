"""
Embedded manifolds, tangent data, test fields and the finite-difference
engine used to apply first- and second-order operators.

Every manifold lives in an ambient Euclidean space and is described by a
constraint, a tangent projector and a retraction. All array-valued maps
broadcast over leading axes so point clouds can be processed in one call.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm, polar

from .exceptions import ConfigurationError, DomainError, RetractionError

logger = logging.getLogger(__name__)

FD_STEP = 1e-4
POINT_TOLERANCE = 1e-10
TANGENT_TOLERANCE = 1e-10
FRAME_CONDITION_LIMIT = 1e8
TWO_PI = 2.0 * np.pi


def as_array(value):
    """Coordinates of a point/vector type or the array itself"""
    for attribute in ('coords', 'vec', 'columns'):
        if hasattr(value, attribute):
            return getattr(value, attribute)
    return np.asarray(value, dtype=float)


def directional_derivative(func, manifold, x, v, step=FD_STEP):
    """Derivative of func at x along the retraction curve with velocity v.

    Central differences at steps h and h/2 combined by one Richardson level,
    so the truncation error is O(h^4). func may return scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)

    def central(h):
        forward = np.asarray(func(manifold.retraction(x + h * v)), dtype=float)
        backward = np.asarray(func(manifold.retraction(x - h * v)), dtype=float)
        return (forward - backward) / (2.0 * h)

    return (4.0 * central(0.5 * step) - central(step)) / 3.0


class ManifoldDescriptor:
    """Embedded manifold given by a constraint, a tangent projector and a retraction"""

    name = ''
    ambient_dim = 0
    intrinsic_dim = 0

    def constraint(self, x):
        raise NotImplementedError

    def tangent_projector(self, x):
        raise NotImplementedError

    def retraction(self, x):
        raise NotImplementedError

    def projector_derivative(self, x, v):
        """Derivative of the tangent projector at x along v"""
        return directional_derivative(self.tangent_projector, self, x, v)

    def difference(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def distance(self, x, y):
        return np.linalg.norm(self.difference(x, y), axis=-1)

    def chord_transport(self, x, y, vectors):
        """Move tangent vectors at x to y along the discrete step x -> y"""
        return self.tangent_projector(y) @ vectors

    def tangent_basis(self, x):
        """Orthonormal basis of T_xM as the columns of an N x n matrix"""
        values, vectors = np.linalg.eigh(self.tangent_projector(x))
        return vectors[:, values > 0.5]

    def random_point(self, rng):
        raise NotImplementedError

    def random_tangent(self, x, rng):
        return self.tangent_projector(x) @ rng.standard_normal(self.ambient_dim)

    def contains(self, x, tolerance=POINT_TOLERANCE):
        return float(np.max(np.abs(self.constraint(x)), initial=0.0)) <= tolerance

    def __repr__(self):
        return f'<{self.__class__.__name__} {self.name}>'


class Sphere(ManifoldDescriptor):
    def __init__(self, dim=2):
        self.intrinsic_dim = dim
        self.ambient_dim = dim + 1
        self.name = f'S{dim}'

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1, keepdims=True) - 1.0

    def tangent_projector(self, x):
        x = np.asarray(x, dtype=float)
        return np.eye(self.ambient_dim) - x[..., :, None] * x[..., None, :]

    def projector_derivative(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return -(v[..., :, None] * x[..., None, :] + x[..., :, None] * v[..., None, :])

    def retraction(self, x):
        x = np.asarray(x, dtype=float)
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        if not np.all(np.isfinite(x)) or np.any(norm < 1e-8):
            raise RetractionError(x)
        return x / norm

    def chord_transport(self, x, y, vectors):
        """Rotation in the plane of x and y taking x to y, i.e. transport along the geodesic chord"""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        cosine = float(np.dot(x, y))
        if cosine <= -1.0 + 1e-12:
            raise DomainError('antipodal step has no unique geodesic chord')
        generator = np.outer(y, x) - np.outer(x, y)
        rotation = np.eye(self.ambient_dim) + generator + generator @ generator / (1.0 + cosine)
        return rotation @ vectors

    def random_point(self, rng):
        return self.retraction(rng.standard_normal(self.ambient_dim))


class FlatTorus(ManifoldDescriptor):
    def __init__(self, dim=2):
        self.intrinsic_dim = dim
        self.ambient_dim = dim
        self.name = f'T{dim}'

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (0,))

    def tangent_projector(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.ambient_dim), x.shape[:-1] + (self.ambient_dim, self.ambient_dim)).copy()

    def projector_derivative(self, x, v):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.ambient_dim, self.ambient_dim))

    def retraction(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise RetractionError(x)
        return np.mod(x, TWO_PI)

    def difference(self, x, y):
        delta = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return np.mod(delta + np.pi, TWO_PI) - np.pi

    def chord_transport(self, x, y, vectors):
        return np.array(vectors, dtype=float)

    def random_point(self, rng):
        return rng.uniform(0.0, TWO_PI, self.ambient_dim)


class SpecialOrthogonal(ManifoldDescriptor):
    """SO(n) as a matrix manifold; points are row-major flattened n x n matrices"""

    def __init__(self, n=3):
        self.n = n
        self.ambient_dim = n * n
        self.intrinsic_dim = n * (n - 1) // 2
        self.name = f'SO{n}'

    def _matrix(self, x):
        return np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (self.n, self.n))

    def constraint(self, x):
        g = self._matrix(x)
        gram = np.swapaxes(g, -1, -2) @ g - np.eye(self.n)
        return gram.reshape(gram.shape[:-2] + (self.ambient_dim,))

    def tangent_projector(self, x):
        g = self._matrix(x)
        columns = []
        for k in range(self.ambient_dim):
            w = np.zeros(self.ambient_dim)
            w[k] = 1.0
            a = g.T @ w.reshape(self.n, self.n)
            columns.append((g @ (0.5 * (a - a.T))).ravel())
        return np.column_stack(columns)

    def retraction(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise RetractionError(x)
        rotation, _ = polar(self._matrix(x))
        if np.linalg.det(rotation) <= 0.0:
            raise RetractionError(x, 'retraction failure: polar factor outside SO(n)')
        return rotation.ravel()

    def random_point(self, rng):
        a = rng.standard_normal((self.n, self.n))
        return expm(0.5 * (a - a.T)).ravel()


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    coords: np.ndarray
    manifold: ManifoldDescriptor

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        coords.setflags(write=False)
        object.__setattr__(self, 'coords', coords)
        residual = float(np.max(np.abs(self.manifold.constraint(coords)), initial=0.0))
        if residual > POINT_TOLERANCE:
            raise DomainError(f'point is not on {self.manifold.name}', residual)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: ManifoldPoint
    vec: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vec, dtype=float)
        vec.setflags(write=False)
        object.__setattr__(self, 'vec', vec)
        projected = self.base.manifold.tangent_projector(self.base.coords) @ vec
        residual = float(np.linalg.norm(vec - projected))
        if residual > TANGENT_TOLERANCE * max(1.0, float(np.linalg.norm(vec))):
            raise DomainError('vector is not tangent at its base point', residual)


@dataclass(frozen=True, eq=False)
class Frame:
    """Linear isomorphism R^n -> T_xM stored as n tangent columns"""

    base: ManifoldPoint
    columns: np.ndarray

    def __post_init__(self):
        columns = np.array(self.columns, dtype=float)
        columns.setflags(write=False)
        object.__setattr__(self, 'columns', columns)
        manifold = self.base.manifold
        if columns.shape != (manifold.ambient_dim, manifold.intrinsic_dim):
            raise DomainError(f'frame must have shape {(manifold.ambient_dim, manifold.intrinsic_dim)}')
        projected = manifold.tangent_projector(self.base.coords) @ columns
        residual = float(np.max(np.abs(columns - projected)))
        if residual > TANGENT_TOLERANCE * max(1.0, float(np.max(np.abs(columns)))):
            raise DomainError('frame columns are not tangent', residual)
        if np.linalg.cond(self.gram) >= FRAME_CONDITION_LIMIT:
            raise DomainError('frame Gram matrix is singular', float(np.linalg.cond(self.gram)))

    @property
    def gram(self):
        return self.columns.T @ self.columns


@dataclass(frozen=True, eq=False)
class ScalarField:
    name: str
    value: Callable
    gradient: Optional[Callable] = None

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def derivative(self, manifold, x, v, step=FD_STEP):
        """df_x(v), analytic when a gradient is supplied"""
        if self.gradient is not None:
            return float(np.dot(self.gradient(np.asarray(x, dtype=float)), v))
        return float(directional_derivative(self.value, manifold, x, v, step))

    def times(self, other):
        if self.gradient is not None and other.gradient is not None:
            gradient = lambda x: self.value(x) * other.gradient(x) + other.value(x) * self.gradient(x)
        else:
            gradient = None
        return ScalarField(f'({self.name})*({other.name})', lambda x: self.value(x) * other.value(x), gradient)

    def pullback(self, projection, embed=None):
        """f o projection; embed maps a gradient back into the larger ambient space"""
        gradient = None
        if self.gradient is not None and embed is not None:
            gradient = lambda b: embed(self.gradient(projection(b)))
        return ScalarField(f'{self.name} o pi', lambda b: self.value(projection(b)), gradient)


def constant_field(value=1.0):
    return ScalarField('const', lambda x: value, lambda x: np.zeros(np.shape(x)[-1]))


@dataclass(frozen=True, eq=False)
class OneForm:
    """One-form represented by an ambient covector field"""

    name: str
    covector: Callable

    def __call__(self, x, v):
        return float(np.dot(self.covector(np.asarray(x, dtype=float)), v))

    def scaled(self, f):
        return OneForm(f'({f.name}){self.name}', lambda x: f.value(x) * self.covector(x))

    def times(self, c):
        return OneForm(f'{c}*{self.name}', lambda x: c * self.covector(x))

    @classmethod
    def exact(cls, f, manifold=None):
        if f.gradient is not None:
            return cls(f'd({f.name})', f.gradient)
        if manifold is None:
            raise ConfigurationError(f'd({f.name}) needs a manifold for the finite-difference gradient')

        def covector(x):
            basis = manifold.tangent_basis(x)
            return sum(f.derivative(manifold, x, basis[:, i]) * basis[:, i] for i in range(basis.shape[1]))

        return cls(f'd({f.name})', covector)

    def linearity_defect(self, manifold, x, rng):
        """Relative defect of phi(a v + c w) against a phi(v) + c phi(w)"""
        v = manifold.random_tangent(x, rng)
        w = manifold.random_tangent(x, rng)
        a, c = rng.standard_normal(2)
        combined = self(x, a * v + c * w)
        separate = a * self(x, v) + c * self(x, w)
        scale = abs(a * self(x, v)) + abs(c * self(x, w)) + 1e-300
        return abs(combined - separate) / scale


def retract(x_ambient, manifold):
    return ManifoldPoint(manifold.retraction(as_array(x_ambient)), manifold)


def tangent_project(x, w):
    point = x if isinstance(x, ManifoldPoint) else None
    if point is None:
        raise ConfigurationError('tangent_project needs a ManifoldPoint')
    return TangentVector(point, point.manifold.tangent_projector(point.coords) @ np.asarray(w, dtype=float))


def check_tangent_fields(manifold, x, vectors, tolerance=1e-8):
    """Raise ConfigurationError when any column of vectors leaves T_xM"""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float).T).T
    residual = vectors - manifold.tangent_projector(x) @ vectors
    worst = float(np.max(np.abs(residual), initial=0.0))
    if worst > tolerance * max(1.0, float(np.max(np.abs(vectors), initial=0.0))):
        raise ConfigurationError(f'non-tangent field at {np.round(x, 6)} (residual {worst:.3e})')


def apply_operator(system, f, x, step=FD_STEP):
    """(1/2 sum_j L_Xj L_Xj + L_A) f at x by nested directional derivatives"""
    x = as_array(x)
    manifold = system.manifold
    fields = system.field_matrix(x)
    drift = system.drift_vector(x)
    check_tangent_fields(manifold, x, np.column_stack([fields, drift]))

    total = 0.0
    for j in range(fields.shape[1]):
        if not np.any(fields[:, j]):
            continue
        inner = lambda y, j=j: f.derivative(manifold, y, system.field_matrix(y)[:, j], step)
        total += 0.5 * float(directional_derivative(inner, manifold, x, fields[:, j], step))
    if np.any(drift):
        total += f.derivative(manifold, x, drift, step)
    return total


def _unit(dim, index):
    e = np.zeros(dim)
    e[index] = 1.0
    return e


def _sphere_functions(dim):
    last = dim - 1

    def cubic_gradient(x):
        g = np.zeros(dim)
        g[0] += 2.0 * x[0] * x[last]
        g[last] += x[0] ** 2
        return g

    def product_gradient(x):
        g = np.zeros(dim)
        g[0] += x[1]
        g[1] += x[0]
        return g

    return [
        ScalarField('x1', lambda x: x[0], lambda x: _unit(dim, 0)),
        ScalarField('height', lambda x: x[last], lambda x: _unit(dim, last)),
        ScalarField('x1*x2', lambda x: x[0] * x[1], product_gradient),
        ScalarField('x1^2*height', lambda x: x[0] ** 2 * x[last], cubic_gradient),
        ScalarField(
            'sin(x1+2x2)',
            lambda x: np.sin(x[0] + 2.0 * x[1]),
            lambda x: np.cos(x[0] + 2.0 * x[1]) * (_unit(dim, 0) + 2.0 * _unit(dim, 1)),
        ),
    ]


def _torus_functions(dim):
    second = min(1, dim - 1)
    pair = _unit(dim, 0) + _unit(dim, second) if second else 2.0 * _unit(dim, 0)

    return [
        ScalarField('sin(t1)', lambda x: np.sin(x[0]), lambda x: np.cos(x[0]) * _unit(dim, 0)),
        ScalarField('cos(t1+t2)', lambda x: np.cos(pair @ x), lambda x: -np.sin(pair @ x) * pair),
        ScalarField(
            'sin(t1)cos(2t2)',
            lambda x: np.sin(x[0]) * np.cos(2.0 * x[second]),
            lambda x: np.cos(x[0]) * np.cos(2.0 * x[second]) * _unit(dim, 0)
            - 2.0 * np.sin(x[0]) * np.sin(2.0 * x[second]) * _unit(dim, second),
        ),
    ]


def ambient_function_library(dim):
    """Smooth functions of the ambient coordinates, used on bundles and matrix manifolds"""
    index = np.arange(dim, dtype=float)
    a = np.cos(index + 1.0)
    c = np.sin(2.0 * index + 1.0)

    return [
        ScalarField('sin(a.x)', lambda x: np.sin(a @ x), lambda x: np.cos(a @ x) * a),
        ScalarField('(a.x)(c.x)', lambda x: (a @ x) * (c @ x), lambda x: (c @ x) * a + (a @ x) * c),
        ScalarField(
            '(a.x)^2(c.x)',
            lambda x: (a @ x) ** 2 * (c @ x),
            lambda x: 2.0 * (a @ x) * (c @ x) * a + (a @ x) ** 2 * c,
        ),
    ]


def function_library(manifold):
    """Test functions closed under the derivatives the checks need"""
    if isinstance(manifold, Sphere):
        return _sphere_functions(manifold.ambient_dim)
    if isinstance(manifold, FlatTorus):
        return _torus_functions(manifold.ambient_dim)
    return ambient_function_library(manifold.ambient_dim)


def one_form_library(manifold):
    """Exact differentials of the test functions plus non-closed forms"""
    dim = manifold.ambient_dim
    forms = [OneForm.exact(f) for f in function_library(manifold)]
    if isinstance(manifold, Sphere):
        forms.append(OneForm('x1*dx2', lambda x: x[0] * _unit(dim, 1)))
        forms.append(OneForm('x2*dx1-x1*dx2', lambda x: x[1] * _unit(dim, 0) - x[0] * _unit(dim, 1)))
    elif isinstance(manifold, FlatTorus):
        second = min(1, dim - 1)
        forms.append(OneForm('sin(t2)*dt1', lambda x: np.sin(x[second]) * _unit(dim, 0)))
        forms.append(OneForm('cos(t1)*dt2', lambda x: np.cos(x[0]) * _unit(dim, second)))
    else:
        c = np.sin(2.0 * np.arange(dim, dtype=float) + 1.0)
        forms.append(OneForm('x1*c', lambda x: x[0] * c))
    return forms
