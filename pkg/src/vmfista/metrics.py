"""Diagonal metrics: construction, norm algebra, scaled projections and
admissibility checks for the variable-metric solver.

A metric is a positive diagonal operator ``D`` together with certified
spectral bounds ``eta_inf <= min(D) <= max(D) <= eta_sup``.  All solver-side
quantities (scaled strong-convexity moduli, step-size admissibility, the
momentum bookkeeping) consume only the certified bounds, never the raw
weights, so any construction that keeps its certificate honest is admissible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError

_BOUND_SLACK = 1.0 + 1e-12


@dataclass(frozen=True)
class DiagonalMetric:
    """Positive diagonal operator with certified spectral bounds."""

    weights: np.ndarray
    eta_inf: float
    eta_sup: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("metric weights must be finite and positive")
        if not (0.0 < self.eta_inf <= self.eta_sup):
            raise ValueError("need 0 < eta_inf <= eta_sup")
        if w.min() * _BOUND_SLACK < self.eta_inf or w.max() > self.eta_sup * _BOUND_SLACK:
            raise ValueError("weights violate the certified spectral bounds")

    @classmethod
    def identity(cls, shape) -> "DiagonalMetric":
        return cls(np.ones(shape), 1.0, 1.0)

    @classmethod
    def from_weights(cls, weights) -> "DiagonalMetric":
        w = np.asarray(weights, dtype=float)
        return cls(w, float(w.min()), float(w.max()))

    @property
    def inv_max(self) -> float:
        """Largest eigenvalue of the inverse operator."""
        return 1.0 / float(self.weights.min())


def d_inner(x: np.ndarray, y: np.ndarray, metric: DiagonalMetric) -> float:
    """Weighted inner product ``<D x, y>``."""
    if x.shape != y.shape or x.shape != metric.weights.shape:
        raise ValueError("shape mismatch in d_inner")
    return float(np.sum(metric.weights * x * y))


def d_norm_sq(x: np.ndarray, metric: DiagonalMetric) -> float:
    """Squared weighted norm ``||x||_D^2``."""
    if x.shape != metric.weights.shape:
        raise ValueError("shape mismatch in d_norm_sq")
    return float(np.sum(metric.weights * x * x))


@dataclass(frozen=True)
class BoxSet:
    """Separable box constraint; ``None`` bounds mean unbounded."""

    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError("box lower bound exceeds upper bound")

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.lower is None and self.upper is None:
            return x
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        ok = True
        if self.lower is not None:
            ok = ok and bool(np.all(x >= self.lower))
        if self.upper is not None:
            ok = ok and bool(np.all(x <= self.upper))
        return ok


def scaled_project_box(x, lower, upper, metric: DiagonalMetric) -> np.ndarray:
    """Projection onto a box in the D-norm.

    For a positive diagonal metric the objective separates per coordinate, so
    the weighted projection coincides with the Euclidean clamp.
    """
    lo = -np.inf if lower is None else lower
    hi = np.inf if upper is None else upper
    if np.any(np.asarray(lo) > np.asarray(hi)):
        raise ValueError("box lower bound exceeds upper bound")
    return np.clip(x, lo, hi)


@dataclass(frozen=True)
class SqueezeSchedule:
    """Thresholding schedule gamma_k = sqrt(1 + s1/(k+1)^s2).

    The schedule shrinks the clamp window of the split-gradient metrics
    toward the identity; ``s2 > 1`` makes the induced admissibility
    increments summable.  The window [1/gamma_k, gamma_k] is equivalent to a
    squeeze around 1 with margins ``nu_inf_k = 1 - 1/gamma_k`` and
    ``nu_sup_k = gamma_k - 1``, both summable under the same condition.
    """

    s1: float = 0.0
    s2: float = 2.0

    def __post_init__(self):
        if self.s1 < 0:
            raise ConfigError("s1 must be nonnegative")
        if self.s1 > 0 and self.s2 <= 1:
            raise ConfigError("s2 must exceed 1 when s1 > 0")

    def gamma(self, k: int) -> float:
        return gamma_threshold(k, self)

    def nu_inf(self, k: int) -> float:
        return 1.0 - 1.0 / self.gamma(k)

    def nu_sup(self, k: int) -> float:
        return self.gamma(k) - 1.0

    def increment_tail_bound(self) -> float:
        """Upper bound on the full sum of gamma_{k-1}*gamma_k - 1 over k >= 1."""
        if self.s1 == 0:
            return 0.0
        # gamma_{k-1}*gamma_k - 1 <= gamma_{k-1}^2 - 1 = s1/k^s2
        return self.s1 * (1.0 + 1.0 / (self.s2 - 1.0))


def gamma_threshold(k: int, schedule: SqueezeSchedule) -> float:
    """Clamp threshold gamma_k = sqrt(1 + s1/(k+1)^s2), always >= 1."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return math.sqrt(1.0 + schedule.s1 / (k + 1) ** schedule.s2)


def split_gradient_metric(y: np.ndarray, v: np.ndarray, gamma: float) -> DiagonalMetric:
    """Inverse-ratio diagonal metric ``D = diag(clamp(y/v, 1/gamma, gamma))^-1``.

    ``v`` is the positive part of the gradient decomposition evaluated at the
    anchor point ``y``; the clamp certifies the spectral bounds
    ``[1/gamma, gamma]``.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("split-gradient denominator must be strictly positive")
    if gamma < 1.0:
        raise ValueError("gamma must be >= 1")
    ratio = np.clip(np.asarray(y, dtype=float) / v, 1.0 / gamma, gamma)
    return DiagonalMetric(1.0 / ratio, 1.0 / gamma, gamma)


def check_metric_chain(d_prev: DiagonalMetric, d_next: DiagonalMetric, gamma_next: float) -> bool:
    """Admissibility predicate for consecutive metrics.

    True iff ``D_next <= (1 + gamma_next) D_prev`` componentwise and the
    certified upper bounds grow by at most the same factor.
    """
    if d_prev.weights.shape != d_next.weights.shape:
        raise ValueError("shape mismatch in check_metric_chain")
    factor = (1.0 + gamma_next) * _BOUND_SLACK
    if not np.all(d_next.weights <= factor * d_prev.weights):
        return False
    return d_next.eta_sup <= factor * d_prev.eta_sup


class MetricStrategy:
    """Produces the per-iteration metric together with its admissibility data.

    ``metric(k, anchor)`` returns the operator used at outer iteration k
    (k = 0 is only queried for the initial spectral bound and the certificate
    norm).  ``gamma_assumption(k)`` returns the admissibility increment
    pairing ``metric(k-1)`` with ``metric(k)``.
    """

    def metric(self, k: int, anchor: np.ndarray) -> DiagonalMetric:
        raise NotImplementedError

    def gamma_assumption(self, k: int) -> float:
        raise NotImplementedError

    def eta_inf_bound(self) -> float:
        """Lower bound valid for every metric the strategy can produce."""
        raise NotImplementedError


class IdentityMetricStrategy(MetricStrategy):
    """Euclidean metric at every iteration."""

    def metric(self, k: int, anchor: np.ndarray) -> DiagonalMetric:
        return DiagonalMetric.identity(np.shape(anchor))

    def gamma_assumption(self, k: int) -> float:
        return 0.0

    def eta_inf_bound(self) -> float:
        return 1.0


class ConstantMetricStrategy(MetricStrategy):
    """A fixed metric at every iteration (admissibility increments vanish)."""

    def __init__(self, metric: DiagonalMetric):
        self._metric = metric

    def metric(self, k: int, anchor: np.ndarray) -> DiagonalMetric:
        return self._metric

    def gamma_assumption(self, k: int) -> float:
        return 0.0

    def eta_inf_bound(self) -> float:
        return self._metric.eta_inf


class SplitGradientStrategy(MetricStrategy):
    """Split-gradient metric with a shrinking clamp window.

    ``numerator_fn(anchor)`` supplies the positive intensity ratio numerator
    (e.g. the current iterate), ``denominator`` the positive gradient part.
    Consecutive weights live in nested clamp windows, so the increment
    gamma_{k-1} * gamma_k - 1 certifies the metric chain.
    """

    def __init__(self, numerator_fn: Callable[[np.ndarray], np.ndarray],
                 denominator: np.ndarray, schedule: SqueezeSchedule):
        self.numerator_fn = numerator_fn
        self.denominator = np.asarray(denominator, dtype=float)
        self.schedule = schedule

    def metric(self, k: int, anchor: np.ndarray) -> DiagonalMetric:
        gamma = gamma_threshold(k, self.schedule)
        return split_gradient_metric(self.numerator_fn(anchor), self.denominator, gamma)

    def gamma_assumption(self, k: int) -> float:
        if k < 1:
            return 0.0
        return gamma_threshold(k - 1, self.schedule) * gamma_threshold(k, self.schedule) - 1.0

    def eta_inf_bound(self) -> float:
        return 1.0 / gamma_threshold(0, self.schedule)
