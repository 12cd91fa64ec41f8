"""Correlation and Student-t helpers used by the survey screening and OLS fit."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import betainc

from .errors import DomainError, UndefinedCorrelationError


def t_two_sided_p(t: float | np.ndarray, dof: float) -> float | np.ndarray:
    """Two-sided tail probability of Student's t with ``dof`` degrees of freedom.

    Uses P(|T| > t) = I_{dof/(dof+t^2)}(dof/2, 1/2).
    """
    if dof <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {dof}")
    t = np.asarray(t, dtype=float)
    p = betainc(0.5 * dof, 0.5, dof / (dof + t * t))
    return float(p) if p.ndim == 0 else p


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DomainError(f"vectors must be 1-d and equal length, got {x.shape} and {y.shape}")
    if len(x) < 3:
        raise DomainError(f"need at least 3 samples, got {len(x)}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance vector")
    r = float(np.dot(dx, dy)) / (math.sqrt(sxx) * math.sqrt(syy))
    return min(1.0, max(-1.0, r))


class CorrelationTest(NamedTuple):
    r: float
    t_stat: float
    p_value: float
    exact: bool  # True when |r| == 1 and p is exactly 0


def correlation_test(r: float, n_samples: int) -> CorrelationTest:
    """Two-sided t test of H0: rho = 0 for a sample correlation ``r``."""
    if n_samples < 3:
        raise DomainError(f"n_samples must be >= 3, got {n_samples}")
    if not -1.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [-1, 1], got {r}")
    dof = n_samples - 2
    if abs(r) == 1.0:
        return CorrelationTest(r, math.copysign(math.inf, r), 0.0, True)
    t = r * math.sqrt(dof / (1.0 - r * r))
    return CorrelationTest(r, t, t_two_sided_p(t, dof), False)


def correlation_p_value(r: float, n_samples: int) -> float:
    return correlation_test(r, n_samples).p_value
