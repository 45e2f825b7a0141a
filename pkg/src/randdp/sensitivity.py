"""Scalar release with a data-dependent, quantile-calibrated noise scale.

For statistics whose worst-case change under replacing one point is
``sup h(x, x') / n``, the noise scale is ``s_n(X) = d_delta(X) / n`` where
``d_delta`` is an upper empirical quantile of ``h`` over pairs of sample
points.  The release ``g_n(X) + Laplace(s_n(X) / alpha)`` is then claimed to be
(2 alpha, eta, gamma1 + gamma2)-RDP with ``eta = exp(-alpha / (2 beta))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats

from .core import PrivacyBudget, RandomSource
from .mechanisms import sample_laplace


class EstimatorKind(str, enum.Enum):
    SPLIT_PAIR = "split-pair"
    U_STATISTIC = "u-statistic"


def absdiff(a, b):
    """h(x, x') = |x - x'| for scalar observations."""
    return np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def euclidean(a, b):
    """h(x, x') = ||x - x'||_2 for row-vector observations."""
    return np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)


def mean(x):
    return float(np.mean(x))


def trimmed_mean(x, proportion: float = 0.1):
    return float(stats.trim_mean(x, proportion))


PAIRWISE = {"absdiff": absdiff, "euclidean": euclidean}
STATISTICS = {"mean": mean, "trimmed-mean": trimmed_mean}


@dataclass(frozen=True, eq=False)
class SensitivityProfile:
    """Sorted sample of pairwise h-values and its empirical CDF."""

    values: np.ndarray
    kind: EstimatorKind = EstimatorKind.SPLIT_PAIR

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64).reshape(-1))
        if v.size and (not np.isfinite(v).all() or v[0] < 0):
            raise ValueError("h-values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", EstimatorKind(self.kind))

    def __len__(self) -> int:
        return int(self.values.size)

    def cdf(self, t):
        """Fraction of h-values ``<= t``."""
        t = np.asarray(t, dtype=np.float64)
        out = np.searchsorted(self.values, t, side="right") / self.values.size
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuantileConfig:
    """Quantile tails and stability constant for the noise scale.

    ``gamma1`` is the failure probability asserted for the scale-stability
    condition ``s_n(X) <= exp(beta) s_n(X')``; it is not derived here.
    """

    delta: float
    delta_prime: float
    beta: float
    gamma1: float = 0.05

    def __post_init__(self):
        if not 0 < self.delta < self.delta_prime < 1:
            raise ValueError(
                f"need 0 < delta < delta_prime < 1, got {self.delta}, {self.delta_prime}"
            )
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0 <= self.gamma1 <= 1:
            raise ValueError(f"gamma1 must lie in [0, 1], got {self.gamma1}")


def _pairs(x, kind: EstimatorKind):
    x = np.asarray(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if kind is EstimatorKind.SPLIT_PAIR:
        m = n // 2
        return x[:m], x[m : 2 * m]
    i, j = np.triu_indices(n, 1)
    return x[i], x[j]


def empirical_cdf(x, h: Callable = absdiff, kind=EstimatorKind.SPLIT_PAIR) -> SensitivityProfile:
    """Profile of h over the sample ``x``.

    split-pair pairs ``x[i]`` with ``x[i + n//2]`` (an odd last point is
    dropped); u-statistic uses all ``n(n-1)/2`` pairs.
    """
    kind = EstimatorKind(kind)
    a, b = _pairs(x, kind)
    return SensitivityProfile(h(a, b), kind)


def quantile_d(profile: SensitivityProfile, delta: float) -> float:
    """Smallest sample value ``d`` with ``CDF(d) >= 1 - delta``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    m = len(profile)
    if m == 0:
        raise ValueError("empty sensitivity profile")
    # exact rational arithmetic so that e.g. delta=0.25, m=4 needs exactly 3 values
    need = math.ceil((1 - Fraction(delta)) * m)
    return float(profile.values[max(need, 1) - 1])


def dkw_bound(n: int, epsilon: float) -> float:
    """``2 exp(-n eps^2)``: tail of the sup-deviation of an n-sample empirical CDF."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return 2.0 * math.exp(-n * epsilon**2)


def quantile_coverage_bound(delta: float, delta_prime: float, pairs: int) -> float:
    """Bound on ``P(h(x, x') > d_delta(X))`` for a fresh independent pair."""
    if not 0 < delta < delta_prime < 1:
        raise ValueError("need 0 < delta < delta_prime < 1")
    return delta_prime + 2.0 * math.exp(-((delta_prime - delta) ** 2) * pairs)


def eta_of_beta(alpha: float, beta: float) -> float:
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    return math.exp(-alpha / (2.0 * beta))


def pair_count(n: int, kind=EstimatorKind.SPLIT_PAIR) -> int:
    kind = EstimatorKind(kind)
    return n // 2 if kind is EstimatorKind.SPLIT_PAIR else n * (n - 1) // 2


def calibrate(gamma2: float, n: int, c: float = 1.0, gamma1: float = 0.05,
              kind=EstimatorKind.SPLIT_PAIR) -> QuantileConfig:
    """Closed-form choice of (delta, delta', beta) for a target gamma2.

    Sets ``delta' = gamma2 / 4`` and ``delta = delta' - sqrt(ln(8 / gamma2) / pairs)``
    so both terms of the coverage bound are ``gamma2 / 4``; a union bound over
    X and X' then gives gamma2.  ``beta = c / sqrt(n)``.
    """
    if not 0 < gamma2 < 1:
        raise ValueError(f"gamma2 must lie in (0, 1), got {gamma2}")
    pairs = pair_count(n, kind)
    if pairs < 1:
        raise ValueError("n too small for requested gamma2")
    delta_prime = gamma2 / 4.0
    delta = delta_prime - math.sqrt(math.log(8.0 / gamma2) / pairs)
    if delta <= 0:
        raise ValueError(
            f"n too small for requested gamma2={gamma2}: {pairs} pairs give delta={delta:.4g} <= 0"
        )
    return QuantileConfig(delta=delta, delta_prime=delta_prime, beta=c / math.sqrt(n),
                          gamma1=gamma1)


def claimed_gamma2(cfg: QuantileConfig, pairs: int) -> float:
    """Union bound over X and X' of the quantile coverage failure."""
    return min(1.0, 2.0 * quantile_coverage_bound(cfg.delta, cfg.delta_prime, pairs))


def noise_scale(x, h: Callable, cfg: QuantileConfig, kind=EstimatorKind.SPLIT_PAIR) -> float:
    """``s_n(X) = d_delta(X) / n``."""
    profile = empirical_cdf(x, h, kind)
    return quantile_d(profile, cfg.delta) / np.asarray(x).shape[0]


@dataclass(frozen=True)
class ScalarRelease:
    value: float
    budget: PrivacyBudget
    scale: float
    degenerate: bool = False


def rdp_release_scalar(
    x,
    g: Callable,
    h: Callable,
    cfg: QuantileConfig,
    alpha: float,
    rng: RandomSource,
    kind=EstimatorKind.SPLIT_PAIR,
) -> ScalarRelease:
    """Release ``g(x)`` plus Laplace noise of scale ``s_n(x) / alpha``.

    When every h-value is zero the scale is zero; the exact statistic is
    returned with ``degenerate=True``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    kind = EstimatorKind(kind)
    n = np.asarray(x).shape[0]
    s = noise_scale(x, h, cfg, kind)
    center = float(g(x))
    budget = PrivacyBudget(
        alpha=2.0 * alpha,
        gamma=min(1.0, cfg.gamma1 + claimed_gamma2(cfg, pair_count(n, kind))),
        eta=eta_of_beta(alpha, cfg.beta),
    )
    if s == 0:
        return ScalarRelease(center, budget, 0.0, degenerate=True)
    return ScalarRelease(center + sample_laplace(rng, s / alpha), budget, s / alpha)
