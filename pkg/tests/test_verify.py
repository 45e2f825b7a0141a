import math

import numpy as np
import pytest

from randdp import BinDistribution, BinnedDataset, RandomSource
from randdp import _kernels
from randdp.verify import (
    binomial_ci,
    equalizer_probe,
    estimate_gamma,
    estimate_risk,
    exact_ratio_bound,
    linear_fit,
    release_rows,
    risk_scaling_sweep,
    sparse_failure_bound,
)


def ds(bins, k=4):
    return BinnedDataset(np.asarray(bins), k)


def test_dp_verdict_distinct_cells():
    v = exact_ratio_bound("dp", ds([0, 1, 1]), ds([0, 1, 2]), alpha=0.7)
    assert v.bounded and v.max_log_ratio == pytest.approx(0.7)


def test_dp_verdict_identical():
    v = exact_ratio_bound("dp", ds([0, 1]), ds([1, 0]), alpha=0.5)
    assert v.bounded and v.max_log_ratio == 0.0


def test_sparse_flip_unbounded():
    # k=4, n=8, gamma=1: 2k <= gamma n so empty cells are released exactly
    X = ds([0, 0, 0, 0, 1, 1, 1, 1])
    Xp = ds([0, 0, 0, 0, 1, 1, 1, 2])
    v = exact_ratio_bound("rdp-sparse", X, Xp, alpha=1.0, gamma=1.0)
    assert not v.bounded and math.isinf(v.max_log_ratio)
    assert v.witness == "cell 2 exact-zero in X, noisy in X'"
    back = exact_ratio_bound("rdp-sparse", Xp, X, alpha=1.0, gamma=1.0)
    assert not back.bounded and back.witness == "cell 2 noisy in X, exact-zero in X'"


def test_sparse_occupied_move_bounded():
    X = ds([0, 0, 0, 0, 1, 1, 1, 1])
    Xp = ds([0, 0, 0, 1, 1, 1, 1, 1])
    v = exact_ratio_bound("rdp-sparse", X, Xp, alpha=1.0, gamma=1.0)
    assert v.bounded and v.max_log_ratio == pytest.approx(1.0)


def test_sparse_inactive_behaves_like_dp():
    X = ds([0, 0, 0, 0, 1, 1, 1, 1])
    Xp = ds([0, 0, 0, 0, 1, 1, 1, 2])
    v = exact_ratio_bound("rdp-sparse", X, Xp, alpha=1.0, gamma=0.5)
    assert v.bounded and v.max_log_ratio == pytest.approx(1.0)


def test_non_neighbors_rejected():
    with pytest.raises(ValueError):
        exact_ratio_bound("dp", ds([0, 0]), ds([1, 1]), 1.0)
    with pytest.raises(ValueError):
        exact_ratio_bound("dp", ds([0, 0]), ds([0, 0, 1]), 1.0)
    with pytest.raises(ValueError):
        exact_ratio_bound("bogus", ds([0]), ds([0]), 1.0)


def test_verdict_symmetric_and_batched_agrees():
    g = np.random.default_rng(0)
    for _ in range(300):
        k = int(g.integers(2, 6))
        n = int(g.integers(1, 10))
        x = g.integers(0, k, n)
        xp = x.copy()
        xp[g.integers(n)] = g.integers(k)
        X, Xp = BinnedDataset(x, k), BinnedDataset(xp, k)
        for mech, code in (("dp", _kernels.MECH_DP), ("rdp-sparse", _kernels.MECH_SPARSE)):
            a = exact_ratio_bound(mech, X, Xp, 1.0, 1.0)
            b = exact_ratio_bound(mech, Xp, X, 1.0, 1.0)
            assert a.max_log_ratio == b.max_log_ratio
            cx = np.bincount(x, minlength=k)[None]
            cxp = np.bincount(xp, minlength=k)[None]
            active = code == _kernels.MECH_SPARSE and 2 * k <= n
            for flag in (True, False):
                logr, _ = _kernels.verdict_rows(cx, cxp, code, active, 1.0, use_numba=flag)
                assert logr[0] == a.max_log_ratio


def test_gamma_dp_zero(rng):
    P = BinDistribution.uniform_on(5, [0, 1, 2, 3, 4])
    est = estimate_gamma("dp", P, 50, 1.0, 1.0, 2000, rng)
    assert est.failures == 0 and est.ci_low == 0.0
    assert est.ci_high == pytest.approx(1 - 0.025 ** (1 / 2000))


def test_gamma_sparse_small_mass(rng):
    k, n = 10, 100
    p = np.full(k, 0.01 / 8)
    p[:2] = (1 - 0.01) / 2
    est = estimate_gamma("rdp-sparse", BinDistribution(p), n, 1.0, 0.2, 5000, rng)
    assert est.failures > 0
    assert est.ci_high <= sparse_failure_bound(k, n)


def test_gamma_threads_identical(rng):
    P = BinDistribution.uniform_on(6, [0, 1, 2, 3, 4, 5])
    a = estimate_gamma("rdp-sparse", P, 20, 1.0, 1.0, 700, rng, threads=1)
    b = estimate_gamma("rdp-sparse", P, 20, 1.0, 1.0, 700, rng, threads=4)
    assert a == b


def test_binomial_ci_bounds():
    lo, hi = binomial_ci(5, 100)
    assert lo < 0.05 < hi
    assert binomial_ci(0, 10)[0] == 0.0


def test_identity_risk_zero(sparse_data, rng):
    assert estimate_risk("identity", sparse_data, 1.0, trials=3, rng=rng).mean_l1 == 0.0


def test_dp_raw_risk(sparse_data, rng):
    est = estimate_risk("dp", sparse_data, 1.0, trials=4000, rng=rng, project=False)
    assert abs(est.mean_l1 - 2 * 25 / 500) <= 3 * est.std_error


def test_sparse_raw_risk(sparse_data, rng):
    est = estimate_risk("rdp-sparse", sparse_data, 1.0, 0.2, trials=4000, rng=rng, project=False)
    assert abs(est.mean_l1 - 2 * 2 / 500) <= 3 * est.std_error


def test_projected_risk_bounded_and_consistent(sparse_data, rng):
    est = estimate_risk("dp", sparse_data, 0.01, trials=200, rng=rng)
    assert est.mean_l1 <= 2.0
    assert est.per_coordinate.sum() == pytest.approx(est.mean_l1)
    rows = release_rows("dp", sparse_data, 0.01, 1.0, 50, rng)
    assert np.allclose(rows.sum(axis=1), 1.0)


def test_release_rows_threads(sparse_data, rng):
    a = release_rows("rdp-sparse", sparse_data, 1.0, 0.2, 1100, rng, threads=1)
    b = release_rows("rdp-sparse", sparse_data, 1.0, 0.2, 1100, rng, threads=3)
    assert np.array_equal(a, b)


def test_sweep_and_fit(rng):
    rows = risk_scaling_sweep("dp", [5, 10, 20], "k", 400, 1.0, 500, rng, project=False)
    slope, _, r2 = linear_fit([r.param for r in rows], [r.mean_risk for r in rows])
    assert slope == pytest.approx(2 / 400, rel=0.1) and r2 > 0.99
    with pytest.raises(ValueError):
        risk_scaling_sweep("dp", [5], "r", 400, 1.0, 10, rng)
    with pytest.raises(ValueError):
        risk_scaling_sweep("dp", [5], "z", 400, 1.0, 10, rng)


def test_linear_fit_exact():
    s, c, r2 = linear_fit([1, 2, 3], [3, 5, 7])
    assert (s, c, r2) == pytest.approx((2, 1, 1))


def test_equalizer_shape(rng):
    risk = equalizer_probe("dp", 10, 1.0, 200, rng)
    assert risk.shape == (11,) and (risk >= 0).all()
