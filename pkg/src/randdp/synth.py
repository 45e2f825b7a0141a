"""Synthetic data: bin distributions, dataset sampling, and resampling from
released histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinnedDataset, HistogramLattice, RandomSource


@dataclass(frozen=True, eq=False)
class BinDistribution:
    """A distribution over ``k`` cells."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=np.float64).reshape(-1)
        if p.size < 1:
            raise ValueError("distribution needs at least one cell")
        if not np.isfinite(p).all() or p.min() < 0:
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def k(self) -> int:
        return int(self.probabilities.size)

    def __eq__(self, other):
        if not isinstance(other, BinDistribution):
            return NotImplemented
        return np.array_equal(self.probabilities, other.probabilities)

    @classmethod
    def uniform_on(cls, k: int, cells) -> BinDistribution:
        cells = np.asarray(list(cells), dtype=np.int64)
        p = np.zeros(k)
        p[cells] = 1.0 / cells.size
        return cls(p)

    def _cdf(self) -> np.ndarray:
        c = np.cumsum(self.probabilities)
        c[-1] = 1.0
        return c


def draw_bins(P: BinDistribution, size: int, gen: np.random.Generator) -> np.ndarray:
    """Inverse-CDF categorical draws from an already-open generator."""
    u = gen.random(size)
    cells = np.searchsorted(P._cdf(), u, side="right")
    # cells with zero mass sit on flat stretches of the cdf and are never hit
    return np.minimum(cells, P.k - 1)


def sample_dataset(P: BinDistribution, n: int, rng: RandomSource) -> BinnedDataset:
    """``n`` iid draws from ``P``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return BinnedDataset(draw_bins(P, n, rng.generator()), P.k)


def sample_synthetic(hist: HistogramLattice, N: int, rng: RandomSource) -> BinnedDataset:
    """Draw ``N`` synthetic observations from a released histogram.

    Sampling is exact: a uniform integer in ``[0, n)`` is located among the
    cumulative integer counts, so no floating point normalization is involved.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    cum = np.cumsum(hist.counts)
    u = rng.generator().integers(0, hist.n, size=N)
    return BinnedDataset(np.searchsorted(cum, u, side="right"), hist.k)


def centered_support(k: int, r: int, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Indices of ``r`` occupied cells placed in the middle of the grid.

    With ``shape=(rows, cols)`` the cells form a near-square block in a
    row-major 2-D grid; otherwise a contiguous run of a 1-D grid.
    """
    if not 1 <= r <= k:
        raise ValueError(f"need 1 <= r <= k, got r={r}, k={k}")
    if shape is None:
        start = (k - r) // 2
        return np.arange(start, start + r)
    rows, cols = shape
    if rows * cols != k:
        raise ValueError(f"shape {shape} does not have {k} cells")
    h = int(np.floor(np.sqrt(r)))
    while r % h:
        h -= 1
    w = r // h
    if h > rows or w > cols:
        raise ValueError(f"cannot place {r} cells as a block in {shape}")
    r0, c0 = (rows - h) // 2, (cols - w) // 2
    rr, cc = np.meshgrid(np.arange(r0, r0 + h), np.arange(c0, c0 + w), indexing="ij")
    return np.sort((rr * cols + cc).ravel())


def balanced_dataset(k: int, n: int, cells) -> BinnedDataset:
    """Deterministic dataset spreading ``n`` points as evenly as possible
    over ``cells`` (earlier cells take the remainder)."""
    cells = np.asarray(list(cells), dtype=np.int64)
    if n < cells.size:
        raise ValueError("fewer points than occupied cells")
    per = np.full(cells.size, n // cells.size)
    per[: n % cells.size] += 1
    return BinnedDataset(np.repeat(cells, per), k)


def grid_index(row: int, col: int, cols: int) -> int:
    """Row-major flat index of a 2-D cell."""
    return row * cols + col
