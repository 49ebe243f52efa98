"""Exceptions raised by the diffusions app, all derived from DiffusionError"""
import numpy as np


class DiffusionError(Exception):
    """Base class for errors raised by the diffusions app"""


class ConfigurationError(DiffusionError):
    """Invalid scenario, grid or run configuration"""


class RetractionError(DiffusionError):
    def __init__(self, point, message='retraction failure'):
        self.point = np.asarray(point, dtype=float)
        super().__init__(f'{message}: {np.array2string(self.point, precision=6)}')


class DomainError(DiffusionError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f'{message} (residual {residual:.3e})'
        super().__init__(message)


class ConstantRankError(DiffusionError):
    def __init__(self, rank, expected, point=None):
        self.rank = rank
        self.expected = expected
        self.point = point
        super().__init__(f'constant-rank violation: rank {rank}, expected {expected}')


class EquivarianceError(DiffusionError):
    def __init__(self, defect, tolerance):
        self.defect = defect
        super().__init__(f'generator is not equivariant: probe defect {defect:.3e} > {tolerance:.1e}')


class SplittingDegenerateError(DiffusionError):
    """Tangent vector cannot be split against a degenerate frame"""


class CurvatureInstabilityError(DiffusionError):
    def __init__(self, coarse, fine):
        self.coarse = coarse
        self.fine = fine
        super().__init__('curvature FD unstable between steps 1e-3 and 1e-4')


class IntegrationError(DiffusionError):
    def __init__(self, message, step=None, time=None):
        self.step = step
        self.time = time
        if step is not None:
            message = f'{message} at step {step}'
        if time is not None:
            message = f'{message} (t={time:.6g})'
        super().__init__(message)


class StepSizeError(IntegrationError):
    """Group exponential argument too large for the step"""


class FrameDegenerationError(IntegrationError):
    """Frame condition number exceeded the allowed bound"""


class OrderEstimateError(DiffusionError):
    """Refinement errors do not decrease monotonically"""


class InsufficientSamplesError(DiffusionError):
    """Monte Carlo standard error exceeds the signal"""


class InverseGridError(DiffusionError):
    """Tracked point cloud too sparse for inverse interpolation"""
