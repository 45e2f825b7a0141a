"""Inner loops of the Monte Carlo paths.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy version
with identical floating point semantics.  The numba versions are used unless
numba is missing or ``RANDDP_DISABLE_NUMBA`` is set to a non-empty value other
than ``0``.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_flag = os.environ.get("RANDDP_DISABLE_NUMBA", "")
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0")

# Mechanism codes for the verdict kernels.
MECH_DP = 0
MECH_SPARSE = 1


# ---------------------------------------------------------------------------
# L1 projection onto the lattice simplex
#
# Start from the coordinatewise minimizer m_j = round(n * clip(z_j, 0, 1)) and
# move one unit at a time until sum(m) = n, always taking a cheapest step.
# With residual r_j = n z_j - m_j the marginal L1 costs (in units of 1/n) are
#   increment: clip(1 - 2 r, -1, 1)      decrement: clip(1 + 2 r, -1, 1)
# (decrements only where m_j > 0).  The costs are separable and convex, so the
# greedy walk ends at an exact minimizer.  Because of the clipping, equal costs
# are common rather than exceptional; among them the cell with the largest
# n z_j absorbs the step, then the lowest index.  Cells released as exact zeros
# therefore stay at zero whenever some other cell can take the mass.


def _project_rows_numpy(z, n):
    z = np.asarray(z, dtype=np.float64)
    rows = z.shape[0]
    nz = z * n
    m = np.floor(np.clip(z, 0.0, 1.0) * n + 0.5)
    total = m.sum(axis=1)
    idx = np.arange(rows)
    while True:
        short = idx[total < n]
        if short.size == 0:
            break
        cost = np.clip(1.0 - 2.0 * (nz[short] - m[short]), -1.0, 1.0)
        tied = cost == cost.min(axis=1)[:, None]
        pick = np.argmax(np.where(tied, nz[short], -np.inf), axis=1)
        m[short, pick] += 1.0
        total[short] += 1.0
    while True:
        over = idx[total > n]
        if over.size == 0:
            break
        cost = np.clip(1.0 + 2.0 * (nz[over] - m[over]), -1.0, 1.0)
        cost = np.where(m[over] > 0.0, cost, np.inf)
        tied = cost == cost.min(axis=1)[:, None]
        pick = np.argmax(np.where(tied, nz[over], -np.inf), axis=1)
        m[over, pick] -= 1.0
        total[over] -= 1.0
    return m.astype(np.int64)


def _project_rows_py(z, n):
    rows, k = z.shape
    out = np.empty((rows, k), dtype=np.int64)
    m = np.empty(k, dtype=np.float64)
    for i in range(rows):
        total = 0.0
        for j in range(k):
            c = z[i, j]
            if c < 0.0:
                c = 0.0
            elif c > 1.0:
                c = 1.0
            m[j] = np.floor(c * n + 0.5)
            total += m[j]
        while total < n:
            best = -1
            best_cost = 0.0
            best_nz = 0.0
            for j in range(k):
                nzj = z[i, j] * n
                cost = 1.0 - 2.0 * (nzj - m[j])
                cost = min(max(cost, -1.0), 1.0)
                if best < 0 or cost < best_cost or (cost == best_cost and nzj > best_nz):
                    best, best_cost, best_nz = j, cost, nzj
            m[best] += 1.0
            total += 1.0
        while total > n:
            best = -1
            best_cost = 0.0
            best_nz = 0.0
            for j in range(k):
                if m[j] <= 0.0:
                    continue
                nzj = z[i, j] * n
                cost = 1.0 + 2.0 * (nzj - m[j])
                cost = min(max(cost, -1.0), 1.0)
                if best < 0 or cost < best_cost or (cost == best_cost and nzj > best_nz):
                    best, best_cost, best_nz = j, cost, nzj
            m[best] -= 1.0
            total -= 1.0
        for j in range(k):
            out[i, j] = np.int64(m[j])
    return out


# ---------------------------------------------------------------------------
# Row-wise bin counts


def _count_rows_numpy(draws, k):
    draws = np.asarray(draws, dtype=np.int64)
    rows = draws.shape[0]
    offset = (np.arange(rows, dtype=np.int64) * k)[:, None]
    flat = np.bincount((draws + offset).ravel(), minlength=rows * k)
    return flat.reshape(rows, k)


def _count_rows_py(draws, k):
    rows, width = draws.shape
    out = np.zeros((rows, k), dtype=np.int64)
    for i in range(rows):
        for t in range(width):
            out[i, draws[i, t]] += 1
    return out


# ---------------------------------------------------------------------------
# Exact density-ratio verdicts for neighbor pairs given their counts.
# Returns (max log ratio, witness cell); witness is -1 unless unbounded.


def _verdict_rows_numpy(cx, cxp, mech, active, alpha):
    cx = np.asarray(cx, dtype=np.int64)
    cxp = np.asarray(cxp, dtype=np.int64)
    half = alpha / 2.0
    absdiff = np.abs(cx - cxp)
    rows = cx.shape[0]
    witness = np.full(rows, -1, dtype=np.int64)
    if mech == MECH_SPARSE and active:
        flip = (cx == 0) != (cxp == 0)
        bad = flip.any(axis=1)
        witness[bad] = np.argmax(flip[bad], axis=1)
        shift = np.where(cx > 0, absdiff, 0).sum(axis=1)
        logr = shift * half
        logr[bad] = np.inf
    else:
        logr = absdiff.sum(axis=1) * half
    return logr.astype(np.float64), witness


def _verdict_rows_py(cx, cxp, mech, active, alpha):
    rows, k = cx.shape
    half = alpha / 2.0
    logr = np.empty(rows, dtype=np.float64)
    witness = np.full(rows, -1, dtype=np.int64)
    sparse = mech == MECH_SPARSE and active
    for i in range(rows):
        shift = 0
        for j in range(k):
            a = cx[i, j]
            b = cxp[i, j]
            if sparse:
                if (a == 0) != (b == 0):
                    if witness[i] < 0:
                        witness[i] = j
                    continue
                if a == 0:
                    continue
            shift += abs(a - b)
        if witness[i] >= 0:
            logr[i] = np.inf
        else:
            logr[i] = shift * half
    return logr, witness


if HAVE_NUMBA:
    _project_rows_numba = njit(cache=True, nogil=True)(_project_rows_py)
    _count_rows_numba = njit(cache=True, nogil=True)(_count_rows_py)
    _verdict_rows_numba = njit(cache=True, nogil=True)(_verdict_rows_py)
else:  # pragma: no cover
    _project_rows_numba = _count_rows_numba = _verdict_rows_numba = None


def project_rows(z, n, use_numba=None):
    """Project each row of ``z`` onto the ``n``-lattice simplex; returns counts."""
    z = np.ascontiguousarray(np.atleast_2d(z), dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("projection input must be finite")
    if USE_NUMBA if use_numba is None else use_numba:
        return _project_rows_numba(z, int(n))
    return _project_rows_numpy(z, int(n))


def count_rows(draws, k, use_numba=None):
    """Bin counts of each row of integer ``draws``."""
    draws = np.ascontiguousarray(np.atleast_2d(draws), dtype=np.int64)
    if USE_NUMBA if use_numba is None else use_numba:
        return _count_rows_numba(draws, int(k))
    return _count_rows_numpy(draws, int(k))


def verdict_rows(cx, cxp, mech, active, alpha, use_numba=None):
    cx = np.ascontiguousarray(np.atleast_2d(cx), dtype=np.int64)
    cxp = np.ascontiguousarray(np.atleast_2d(cxp), dtype=np.int64)
    if USE_NUMBA if use_numba is None else use_numba:
        return _verdict_rows_numba(cx, cxp, int(mech), bool(active), float(alpha))
    return _verdict_rows_numpy(cx, cxp, int(mech), bool(active), float(alpha))
