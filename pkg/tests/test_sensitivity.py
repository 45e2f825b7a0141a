import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from randdp import RandomSource
from randdp.sensitivity import (
    EstimatorKind,
    QuantileConfig,
    SensitivityProfile,
    absdiff,
    calibrate,
    claimed_gamma2,
    dkw_bound,
    empirical_cdf,
    eta_of_beta,
    euclidean,
    mean,
    noise_scale,
    quantile_coverage_bound,
    quantile_d,
    rdp_release_scalar,
    trimmed_mean,
)


def test_split_pair_example():
    # pairs (x1, x3) and (x2, x4) have h-values 1 and 3
    p = empirical_cdf([0.0, 0.0, 1.0, 3.0])
    assert p.values.tolist() == [1.0, 3.0]
    assert (p.cdf(1), p.cdf(2), p.cdf(3)) == (0.5, 0.5, 1.0)


def test_u_statistic_three_points():
    p = empirical_cdf([0.0, 1.0, 3.0], kind="u-statistic")
    assert p.values.tolist() == [1.0, 2.0, 3.0]
    assert p.cdf([1.0, 2.0, 3.0]).tolist() == pytest.approx([1 / 3, 2 / 3, 1.0])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.floats(0, 1))
def test_split_pair_recount(x, t):
    n = len(x)
    m = n // 2
    expected = sum(abs(x[i] - x[i + m]) <= t for i in range(m)) / m
    assert empirical_cdf(x).cdf(t) == expected


@given(st.lists(st.floats(0, 1), min_size=2, max_size=12), st.floats(0, 1))
def test_u_statistic_recount(x, t):
    n = len(x)
    hits = sum(abs(x[i] - x[j]) <= t for i in range(n) for j in range(i))
    assert empirical_cdf(x, kind="u-statistic").cdf(t) == hits / (n * (n - 1) / 2)


def test_euclidean_pairs():
    x = np.array([[0, 0], [1, 1], [3, 4], [0, 0]], dtype=float)
    assert empirical_cdf(x, euclidean).values.tolist() == [5.0, math.sqrt(1 + 1)] or \
        empirical_cdf(x, euclidean).values.tolist() == sorted([5.0, math.sqrt(2)])


def test_too_few_points():
    with pytest.raises(ValueError):
        empirical_cdf([1.0])


def test_quantile_examples():
    p = SensitivityProfile([1.0, 3.0])
    assert quantile_d(p, 0.25) == 3.0
    assert quantile_d(p, 1 - 1e-9) == 1.0
    assert quantile_d(p, 1e-9) == 3.0
    with pytest.raises(ValueError):
        quantile_d(SensitivityProfile([]), 0.1)
    with pytest.raises(ValueError):
        quantile_d(p, 0.0)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0.001, 0.999),
       st.floats(0.001, 0.999))
def test_quantile_monotone_and_smallest(vals, d1, d2):
    p = SensitivityProfile(vals)
    lo, hi = sorted((d1, d2))
    assert quantile_d(p, lo) >= quantile_d(p, hi)
    d = quantile_d(p, lo)
    assert p.cdf(d) >= 1 - lo - 1e-12
    smaller = p.values[p.values < d]
    if smaller.size:
        assert p.cdf(smaller.max()) < 1 - lo


def test_dkw_formula():
    assert dkw_bound(100, 0.2) == pytest.approx(0.03663, abs=5e-6)
    assert dkw_bound(100, 0.0) == 2.0


def test_coverage_formula():
    assert quantile_coverage_bound(0.01, 0.05, 10**4) == 0.05 + 2 * math.exp(-16)
    assert quantile_coverage_bound(0.05 - 1e-12, 0.05, 10) == pytest.approx(2.05)


def test_eta_formula():
    assert eta_of_beta(1.0, 0.05) == pytest.approx(4.54e-5, rel=1e-3)
    assert eta_of_beta(1.0, 1e-4) == 0.0 or eta_of_beta(1.0, 1e-4) < 1e-300


def test_eta_negligible_in_n():
    # log(eta n^p) = p log n - sqrt(n) / 2, decreasing once sqrt(n) > 4p
    ns = np.logspace(3, 6, 13)
    for p in (1, 2, 4):
        logs = [math.log(n) * p - math.sqrt(n) / 2 for n in ns]
        assert all(a > b for a, b in zip(logs, logs[1:]))
        assert eta_of_beta(1.0, 1e6**-0.5) * 1e6**p < 1e-190


def test_coverage_monte_carlo():
    """P(h(x, x') > d_delta(X)) over fresh pairs stays under the bound."""
    g = np.random.default_rng(1)
    delta, delta_p, n = 0.05, 0.1, 2000
    bound = quantile_coverage_bound(delta, delta_p, n // 2)
    misses = []
    for _ in range(200):
        d = quantile_d(empirical_cdf(g.random(n)), delta)
        fresh = np.abs(g.random(500) - g.random(500))
        misses.append(np.mean(fresh > d))
    assert np.mean(misses) <= bound


def test_calibrate():
    cfg = calibrate(0.4, 1000)
    assert cfg.delta_prime == 0.1
    assert cfg.delta == pytest.approx(0.1 - math.sqrt(math.log(20) / 500))
    assert cfg.beta == pytest.approx(1000**-0.5)
    # each term of the coverage bound is gamma2 / 4
    assert quantile_coverage_bound(cfg.delta, cfg.delta_prime, 500) == pytest.approx(0.2)
    assert claimed_gamma2(cfg, 500) == pytest.approx(0.4)
    with pytest.raises(ValueError, match="n too small"):
        calibrate(0.2, 1000)


def test_quantile_config_validation():
    with pytest.raises(ValueError):
        QuantileConfig(0.1, 0.05, 0.1)
    with pytest.raises(ValueError):
        QuantileConfig(0.01, 0.05, 0.0)


def _cfg(beta=0.1):
    return QuantileConfig(delta=0.05, delta_prime=0.2, beta=beta, gamma1=0.03)


def test_scalar_scale_composition():
    x = np.repeat([0.0, 0.5], 50)  # every split pair has h = 0.5
    assert noise_scale(x, absdiff, _cfg()) == pytest.approx(0.005)
    rel = rdp_release_scalar(x, mean, absdiff, _cfg(), 2.0, RandomSource(1))
    assert rel.scale == pytest.approx(0.005 / 2.0)
    assert rel.budget.alpha == 4.0
    assert rel.budget.eta == pytest.approx(math.exp(-2.0 / 0.2))
    assert rel.budget.gamma == min(1.0, 0.03 + claimed_gamma2(_cfg(), 50))


def test_scalar_constant_statistic():
    x = np.random.default_rng(2).random(200)
    const = rdp_release_scalar(x, lambda v: 7.0, absdiff, _cfg(), 1.0, RandomSource(3))
    avg = rdp_release_scalar(x, mean, absdiff, _cfg(), 1.0, RandomSource(3))
    assert const.scale == avg.scale
    assert const.value - 7.0 == pytest.approx(avg.value - mean(x))


def test_scalar_degenerate():
    rel = rdp_release_scalar(np.full(10, 0.3), mean, absdiff, _cfg(), 1.0, RandomSource(4))
    assert rel.degenerate and rel.scale == 0.0 and rel.value == pytest.approx(0.3)


def test_scalar_release_is_laplace():
    x = np.random.default_rng(5).random(100)
    center = mean(x)
    draws = []
    for t in range(20000):
        rel = rdp_release_scalar(x, mean, absdiff, _cfg(), 1.0, RandomSource(6).spawn(t))
        draws.append((rel.value - center) / rel.scale)
    assert stats.kstest(draws, stats.laplace.cdf).pvalue > 1e-3


def test_trimmed_mean_builtin():
    assert trimmed_mean(np.array([0.0] + [1.0] * 8 + [100.0])) == 1.0


def test_estimator_kinds():
    x = np.arange(5.0)
    assert len(empirical_cdf(x, kind=EstimatorKind.SPLIT_PAIR)) == 2
    assert len(empirical_cdf(x, kind="u-statistic")) == 10
