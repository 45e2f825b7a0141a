"""Histogram release mechanisms.

``dp_histogram`` perturbs every cell with Laplace noise of scale ``2/(n alpha)``.
``rdp_sparse_histogram`` releases the empty cells exactly when ``2k <= gamma n``
and perturbs the rest; it is (alpha, gamma)-RDP rather than alpha-DP.
``l1_project`` maps a noisy vector back onto the lattice of n-point histograms.

Noisy outputs are plain float arrays of length k.  Every mechanism draws k
Laplace variates from its stream, so for a fixed ``RandomSource`` the sparse
and the plain mechanism perturb the occupied cells identically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BinnedDataset, HistogramLattice, PrivacyBudget, RandomSource, histogram_of


@dataclass(frozen=True)
class LaplaceScale:
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"Laplace scale must be positive and finite, got {self.scale}")


class Projection(str, enum.Enum):
    RAW = "raw"
    PROJECTED = "projected"


@dataclass(frozen=True)
class SparseReleaseConfig:
    alpha: float
    gamma: float
    projection: Projection = Projection.PROJECTED

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        object.__setattr__(self, "projection", Projection(self.projection))

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(alpha=self.alpha, gamma=self.gamma)


def noise_scale(n: int, alpha: float) -> LaplaceScale:
    """Per-cell scale of the histogram perturbation, ``2 / (n alpha)``."""
    return LaplaceScale(2.0 / (n * alpha))


def sparse_branch_active(k: int, n: int, gamma: float) -> bool:
    """Whether empty cells are released exactly (``2k <= gamma n``, inclusive)."""
    return 2 * k <= gamma * n


def sample_laplace(rng: RandomSource, scale: LaplaceScale | float, size=None):
    """Draw from Laplace(0, scale) on the stream ``rng``.

    Returns a float, or an array when ``size`` is given.
    """
    if not isinstance(scale, LaplaceScale):
        scale = LaplaceScale(float(scale))
    out = rng.generator().laplace(0.0, scale.scale, size=size)
    return float(out) if size is None else out


def _unit_laplace(rng: RandomSource, k: int) -> np.ndarray:
    return rng.generator().laplace(0.0, 1.0, size=k)


def dp_histogram(data: BinnedDataset, alpha: float, rng: RandomSource) -> np.ndarray:
    """alpha-DP perturbed histogram ``z = theta + 2 L / (n alpha)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    theta = histogram_of(data).theta
    return theta + noise_scale(data.n, alpha).scale * _unit_laplace(rng, data.k)


def l1_project(z, n: int) -> HistogramLattice:
    """Closest n-point histogram to ``z`` in L1 distance.

    Ties between equally close histograms are resolved deterministically;
    see ``randdp._kernels`` for the rule.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size < 1:
        raise ValueError("cannot project an empty vector")
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = _kernels.project_rows(z[None, :], n)[0]
    return HistogramLattice(counts, n)


def rdp_sparse_histogram(
    data: BinnedDataset, cfg: SparseReleaseConfig, rng: RandomSource
) -> tuple[np.ndarray, HistogramLattice | None]:
    """(alpha, gamma)-RDP release that leaves empty cells untouched.

    Returns the noisy vector and, unless ``cfg.projection`` is raw, its L1
    projection onto the lattice.
    """
    hist = histogram_of(data)
    theta = hist.theta
    noise = noise_scale(data.n, cfg.alpha).scale * _unit_laplace(rng, data.k)
    if sparse_branch_active(data.k, data.n, cfg.gamma):
        noise[hist.counts == 0] = 0.0
    z = theta + noise
    if cfg.projection is Projection.RAW:
        return z, None
    return z, l1_project(z, data.n)


def noisy_rows(
    counts: np.ndarray, n: int, alpha: float, sources, exact_empty: bool
) -> np.ndarray:
    """Batched release: one row per source, bit-identical to the single calls."""
    counts = np.asarray(counts, dtype=np.int64)
    k = counts.size
    theta = counts / n
    scale = noise_scale(n, alpha).scale
    lap = np.stack([_unit_laplace(s, k) for s in sources]) * scale
    if exact_empty:
        lap[:, counts == 0] = 0.0
    return theta + lap
