"""Exact and Monte Carlo checks of the histogram mechanisms.

The density-ratio predicate is decided analytically.  Both mechanisms
output a product of per-cell laws: Laplace densities on noisy cells and point
masses on exactly released cells.  Two such outputs are within a factor
``exp(a)`` on every event iff the point-mass cells coincide, and then the
smallest such ``a`` is the Laplace shift ``sum |theta_j - theta'_j| / scale``
over the noisy cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .core import BinnedDataset, RandomSource, histogram_of, map_trials
from .mechanisms import noisy_rows, sparse_branch_active
from .sensitivity import EstimatorKind, QuantileConfig, empirical_cdf, quantile_d
from .synth import BinDistribution, draw_bins

MECHANISMS = ("dp", "rdp-sparse", "identity")


def _mech_code(mechanism: str) -> int:
    if mechanism == "dp":
        return _kernels.MECH_DP
    if mechanism == "rdp-sparse":
        return _kernels.MECH_SPARSE
    raise ValueError(f"unknown mechanism {mechanism!r}; expected 'dp' or 'rdp-sparse'")


@dataclass(frozen=True)
class RatioVerdict:
    bounded: bool
    max_log_ratio: float
    witness: str
    alpha: float

    def __post_init__(self):
        if self.bounded != (self.max_log_ratio <= self.alpha):
            raise ValueError("verdict inconsistent with its log ratio")


def _witness(cell: int, cx, cxp) -> str:
    if cx[cell] == 0:
        return f"cell {cell} exact-zero in X, noisy in X'"
    return f"cell {cell} noisy in X, exact-zero in X'"


def exact_ratio_bound(
    mechanism: str, X: BinnedDataset, Xp: BinnedDataset, alpha: float, gamma: float = 1.0
) -> RatioVerdict:
    """Decide whether the output laws on neighbors X, X' are within exp(alpha).

    Raises ValueError unless X and X' have the same n and k and differ in at
    most one element as multisets.
    """
    code = _mech_code(mechanism)
    if X.n != Xp.n or X.k != Xp.k:
        raise ValueError("neighbors must share n and k")
    cx = histogram_of(X).counts
    cxp = histogram_of(Xp).counts
    if np.abs(cx - cxp).sum() > 2:
        raise ValueError("X and X' differ in more than one element")
    active = code == _kernels.MECH_SPARSE and sparse_branch_active(X.k, X.n, gamma)
    logr, wit = _kernels.verdict_rows(cx, cxp, code, active, alpha)
    logr, cell = float(logr[0]), int(wit[0])
    if cell >= 0:
        return RatioVerdict(False, math.inf, _witness(cell, cx, cxp), alpha)
    bounded = logr <= alpha
    return RatioVerdict(bounded, logr, "" if bounded else "Laplace shift exceeds alpha", alpha)


@dataclass(frozen=True)
class GammaEstimate:
    gamma_hat: float
    ci_low: float
    ci_high: float
    failures: int
    trials: int

    @property
    def half_width(self) -> float:
        """Distance from the estimate to the upper confidence limit."""
        return self.ci_high - self.gamma_hat


def binomial_ci(failures: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    ci = stats.binomtest(failures, trials).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def _neighbor_draws(P: BinDistribution, n: int, trials: int, rng: RandomSource, threads: int):
    draws = map_trials(lambda t, s: draw_bins(P, n + 1, s.generator()), trials, rng, threads)
    return np.stack(draws)


def estimate_gamma(
    mechanism: str,
    P: BinDistribution,
    n: int,
    alpha: float,
    gamma_claimed: float,
    trials: int,
    rng: RandomSource,
    threads: int = 1,
) -> GammaEstimate:
    """Frequency with which the ratio bound fails for X ~ P^n, X' its neighbor.

    Each trial draws x_1..x_{n+1}; X keeps x_1..x_n and X' replaces x_n by
    x_{n+1}.
    """
    code = _mech_code(mechanism)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    draws = _neighbor_draws(P, n, trials, rng, threads)
    cx = _kernels.count_rows(draws[:, :n], P.k)
    cxp = cx.copy()
    rows = np.arange(trials)
    cxp[rows, draws[:, n - 1]] -= 1
    cxp[rows, draws[:, n]] += 1
    active = code == _kernels.MECH_SPARSE and sparse_branch_active(P.k, n, gamma_claimed)
    logr, _ = _kernels.verdict_rows(cx, cxp, code, active, alpha)
    failures = int(np.count_nonzero(~(logr <= alpha)))
    lo, hi = binomial_ci(failures, trials)
    return GammaEstimate(failures / trials, lo, hi, failures, trials)


def sparse_failure_bound(k: int, n: int) -> float:
    """Combinatorial bound 2k/(n+1) on the failure probability of the sparse release."""
    return 2.0 * k / (n + 1)


@dataclass(frozen=True)
class RiskEstimate:
    mean_l1: float
    per_coordinate: np.ndarray
    trials: int
    std_error: float


def release_rows(
    mechanism: str,
    data: BinnedDataset,
    alpha: float,
    gamma: float,
    trials: int,
    rng: RandomSource,
    project: bool = True,
    threads: int = 1,
) -> np.ndarray:
    """``trials`` independent outputs of a mechanism, one row per trial.

    Projected rows are normalized lattice points ``counts / n``.
    """
    counts = histogram_of(data).counts
    n = data.n
    if mechanism == "identity":
        return np.tile(counts / n, (trials, 1))
    code = _mech_code(mechanism)
    exact = code == _kernels.MECH_SPARSE and sparse_branch_active(data.k, n, gamma)

    def block(lo: int, hi: int):
        z = noisy_rows(counts, n, alpha, [rng.spawn(t) for t in range(lo, hi)], exact)
        return _kernels.project_rows(z, n) / n if project else z

    return _blocked(block, trials, threads)


def _blocked(block: Callable[[int, int], np.ndarray], trials: int, threads: int, size: int = 512):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spans = [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]
    if threads <= 1:
        parts = [block(lo, hi) for lo, hi in spans]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: block(*s), spans))
    return np.concatenate(parts, axis=0)


def l1_losses(
    mechanism: str,
    data: BinnedDataset,
    alpha: float,
    gamma: float,
    trials: int,
    rng: RandomSource,
    project: bool = True,
    threads: int = 1,
) -> np.ndarray:
    """Per-trial, per-cell absolute errors ``|output_j - theta_j|``."""
    theta = histogram_of(data).theta
    out = release_rows(mechanism, data, alpha, gamma, trials, rng, project, threads)
    return np.abs(out - theta)


def estimate_risk(
    mechanism: str,
    theta_source: BinnedDataset,
    alpha: float,
    gamma: float = 1.0,
    trials: int = 1000,
    rng: RandomSource | None = None,
    project: bool = True,
    threads: int = 1,
) -> RiskEstimate:
    """Monte Carlo L1 risk of a mechanism at the histogram of ``theta_source``."""
    rng = rng if rng is not None else RandomSource(0)
    err = l1_losses(mechanism, theta_source, alpha, gamma, trials, rng, project, threads)
    per_trial = err.sum(axis=1)
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    per_coord = err.mean(axis=0)
    return RiskEstimate(float(per_coord.sum()), per_coord, trials, se)


@dataclass(frozen=True)
class SweepRow:
    param: int
    mean_risk: float
    std_error: float


def risk_scaling_sweep(
    mechanism: str,
    grid: Sequence[int],
    axis: str,
    n: int,
    alpha: float,
    trials: int,
    rng: RandomSource,
    gamma: float = 1.0,
    k: int | None = None,
    r: int | None = None,
    project: bool = True,
    threads: int = 1,
) -> list[SweepRow]:
    """Risk over a grid of cell counts (``axis='k'``) or support sizes (``axis='r'``).

    Along ``k`` the data occupy ``r`` centered cells (all cells if ``r`` is None);
    along ``r`` the number of cells is fixed at ``k``.  Data are spread evenly
    over the occupied cells.
    """
    from .synth import balanced_dataset, centered_support

    if not grid:
        raise ValueError("grid must be nonempty")
    rows = []
    for i, v in enumerate(grid):
        if axis == "k":
            kk, rr = int(v), int(v if r is None else min(r, v))
        elif axis == "r":
            if k is None:
                raise ValueError("sweeping r needs a fixed k")
            kk, rr = int(k), int(v)
        else:
            raise ValueError(f"axis must be 'k' or 'r', got {axis!r}")
        data = balanced_dataset(kk, n, centered_support(kk, rr))
        est = estimate_risk(mechanism, data, alpha, gamma, trials, rng.spawn(i), project, threads)
        rows.append(SweepRow(int(v), est.mean_l1, est.std_error))
    return rows


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares (slope, intercept, R^2)."""
    res = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


def equalizer_probe(
    mechanism: str, n: int, alpha: float, trials: int, rng: RandomSource, threads: int = 1
) -> np.ndarray:
    """Risk at every two-cell histogram (a, n - a), a = 0..n."""
    out = np.empty(n + 1)
    for a in range(n + 1):
        data = BinnedDataset(np.repeat([0, 1], [a, n - a]), 2)
        out[a] = estimate_risk(mechanism, data, alpha, 1.0, trials, rng.spawn(a), True, threads).mean_l1
    return out


# -- empirical checks for the scalar release -------------------------------------


def dkw_tail_frequency(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    cdf: Callable[[np.ndarray], np.ndarray],
    m: int,
    epsilons: Sequence[float],
    reps: int,
    rng: RandomSource,
) -> np.ndarray:
    """Fraction of ``reps`` samples of size ``m`` whose empirical CDF deviates
    from ``cdf`` by at least each epsilon (in sup norm)."""
    sups = np.empty(reps)
    i = np.arange(1, m + 1)
    for t in range(reps):
        x = np.sort(sampler(rng.spawn(t).generator(), m))
        F = cdf(x)
        sups[t] = max(np.max(i / m - F), np.max(F - (i - 1) / m))
    return np.array([np.mean(sups >= e) for e in epsilons])


def _neighbor_samples(sampler, n, rng):
    gen = rng.generator()
    x = sampler(gen, n + 3)
    X = x[:n]
    Xp = np.concatenate([x[: n - 1], x[n : n + 1]])
    return X, Xp, x[n + 1], x[n + 2]


def estimate_coverage(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    h: Callable,
    cfg: QuantileConfig,
    n: int,
    trials: int,
    rng: RandomSource,
    kind=EstimatorKind.SPLIT_PAIR,
    threads: int = 1,
) -> float:
    """Frequency of ``h(x, x')/n <= min(s_n(X), s_n(X'))`` for a fresh pair."""

    def one(t, s):
        X, Xp, a, b = _neighbor_samples(sampler, n, s)
        dX = quantile_d(empirical_cdf(X, h, kind), cfg.delta)
        dXp = quantile_d(empirical_cdf(Xp, h, kind), cfg.delta)
        return bool(h(a, b) <= min(dX, dXp))

    return float(np.mean(map_trials(one, trials, rng, threads)))


def estimate_scale_stability(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    h: Callable,
    cfg: QuantileConfig,
    n: int,
    trials: int,
    rng: RandomSource,
    kind=EstimatorKind.SPLIT_PAIR,
    threads: int = 1,
) -> float:
    """Frequency of ``s_n(X) <= exp(beta) s_n(X')`` over neighbor pairs."""
    bound = math.exp(cfg.beta)

    def one(t, s):
        X, Xp, _, _ = _neighbor_samples(sampler, n, s)
        dX = quantile_d(empirical_cdf(X, h, kind), cfg.delta)
        dXp = quantile_d(empirical_cdf(Xp, h, kind), cfg.delta)
        return bool(dX <= bound * dXp)

    return float(np.mean(map_trials(one, trials, rng, threads)))
