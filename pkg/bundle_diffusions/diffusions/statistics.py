"""
Monte Carlo summaries and refinement-order fits shared by the checks.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientSamplesError, OrderEstimateError

logger = logging.getLogger(__name__)

EXACT_ERROR = 1e-13


@dataclass(frozen=True)
class MeanEstimate:
    mean: np.ndarray
    standard_error: np.ndarray
    n_samples: int

    def z_score(self, expected):
        """|mean - expected| in units of the standard error, worst component"""
        gap = np.abs(np.asarray(self.mean) - np.asarray(expected))
        se = np.maximum(np.asarray(self.standard_error), np.finfo(float).tiny)
        return float(np.max(gap / se))


@dataclass(frozen=True)
class OrderEstimate:
    order: float
    constant: float
    dts: np.ndarray
    errors: np.ndarray

    @property
    def exact(self):
        return bool(np.isinf(self.order))

    def __str__(self):
        if self.exact:
            return 'exact at every level'
        return f'order {self.order:.3f} (C={self.constant:.3g})'


def mean_estimate(samples):
    """Sample mean with its standard error along the first axis"""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f'need at least 2 samples, got {n}')
    return MeanEstimate(samples.mean(axis=0), samples.std(axis=0, ddof=1) / np.sqrt(n), n)


def variance_z_score(samples, expected):
    """z-score of the empirical second moment of centred Gaussian samples against expected"""
    squares = np.asarray(samples, dtype=float) ** 2
    return mean_estimate(squares.ravel()).z_score(expected)


def max_cross_correlation(a, b):
    """Largest |Pearson correlation| between the columns of a and of b"""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    correlation = np.corrcoef(a.T, b.T)[:a.shape[1], a.shape[1]:]
    return float(np.max(np.abs(correlation)))


def moment_z_score(first, second):
    """Worst z-score between the first and second moments of two independent samples"""
    worst = 0.0
    for power in (1, 2):
        left = mean_estimate(np.asarray(first, dtype=float) ** power)
        right = mean_estimate(np.asarray(second, dtype=float) ** power)
        gap = np.abs(left.mean - right.mean)
        se = np.sqrt(left.standard_error ** 2 + right.standard_error ** 2)
        worst = max(worst, float(np.max(gap / np.maximum(se, np.finfo(float).tiny))))
    return worst


def fit_order(dts, errors, floor=EXACT_ERROR):
    """Least-squares slope of log(error) against log(dt); errors all below floor count as exact"""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.all(errors < floor):
        return OrderEstimate(np.inf, 0.0, dts, errors)
    order = np.argsort(dts)[::-1]
    dts, errors = dts[order], errors[order]
    if np.any(errors <= 0.0) or np.any(np.diff(errors) >= 0.0):
        raise OrderEstimateError(f'errors do not decrease with dt: {np.array2string(errors, precision=3)}')
    slope, intercept = np.polyfit(np.log(dts), np.log(errors), 1)
    logger.debug('fitted order %.3f over %d levels', slope, len(dts))
    return OrderEstimate(float(slope), float(np.exp(intercept)), dts, errors)


def fit_constant(dts, errors, order=1.0):
    """Smallest C with error <= C dt^order at every level"""
    dts = np.asarray(dts, dtype=float)
    return float(np.max(np.asarray(errors, dtype=float) / dts ** order))
