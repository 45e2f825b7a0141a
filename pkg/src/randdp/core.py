"""Domain types shared across the package.

Datasets are stored pre-binned: a :class:`BinnedDataset` is a multiset of
cell indices in ``0..k-1``.  All types are immutable values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_U64 = 2**64


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    """Observations x_1..x_n after partitioning into ``k`` cells."""

    bins: np.ndarray
    k: int

    def __post_init__(self):
        k = int(self.k)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        bins = np.array(self.bins, dtype=np.int64).reshape(-1)
        if bins.size < 1:
            raise ValueError("dataset must contain at least one observation")
        if bins.min() < 0 or bins.max() >= k:
            raise ValueError(f"bin indices must lie in [0, {k})")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "bins", _frozen(bins))

    @property
    def n(self) -> int:
        return int(self.bins.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if not isinstance(other, BinnedDataset):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.bins, other.bins)

    def __hash__(self):
        return hash((self.k, self.bins.tobytes()))


@dataclass(frozen=True, eq=False)
class HistogramLattice:
    """A histogram of ``n`` observations over ``k`` cells.

    The normalized view ``counts / n`` is a lattice point of the simplex.
    """

    counts: np.ndarray
    n: int | None = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64).reshape(-1)
        if counts.size < 1:
            raise ValueError("histogram needs at least one cell")
        if counts.min() < 0:
            raise ValueError("counts must be nonnegative")
        total = int(counts.sum())
        n = total if self.n is None else int(self.n)
        if n != total:
            raise ValueError(f"counts sum to {total}, expected n={n}")
        if n < 1:
            raise ValueError("histogram must hold at least one observation")
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "n", n)

    @property
    def k(self) -> int:
        return int(self.counts.size)

    @property
    def theta(self) -> np.ndarray:
        return self.counts / self.n

    def __eq__(self, other):
        if not isinstance(other, HistogramLattice):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash((self.n, self.counts.tobytes()))


@dataclass(frozen=True)
class PrivacyBudget:
    """An (alpha, eta, gamma) guarantee.

    Pure alpha-DP is ``gamma=0, eta=0``; (alpha, gamma)-RDP has ``eta=0``.
    Composition and splitting run on exact rational shadows of the fields, so
    splitting into m parts and composing them back returns the same floats.
    """

    alpha: float
    gamma: float = 0.0
    eta: float = 0.0
    _exact: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.eta >= 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self._exact is None:
            exact = (Fraction(self.alpha), Fraction(self.gamma), Fraction(self.eta))
            object.__setattr__(self, "_exact", exact)

    @classmethod
    def _of(cls, alpha: Fraction, gamma: Fraction, eta: Fraction) -> PrivacyBudget:
        return cls(float(alpha), float(gamma), float(eta), (alpha, gamma, eta))

    def __add__(self, other: PrivacyBudget) -> PrivacyBudget:
        if not isinstance(other, PrivacyBudget):
            return NotImplemented
        return compose(self, other)


def compose(b1: PrivacyBudget, b2: PrivacyBudget) -> PrivacyBudget:
    """Budget of releasing two independent mechanisms on the same data.

    alpha and eta add; gamma adds by the union bound and saturates at 1.
    """
    (a1, g1, e1), (a2, g2, e2) = b1._exact, b2._exact
    return PrivacyBudget._of(a1 + a2, min(g1 + g2, Fraction(1)), e1 + e2)


def compose_all(budgets: Sequence[PrivacyBudget]) -> PrivacyBudget:
    if not budgets:
        raise ValueError("nothing to compose")
    total = budgets[0]
    for b in budgets[1:]:
        total = compose(total, b)
    return total


def split_budget(b: PrivacyBudget, m: int) -> PrivacyBudget:
    """Per-release budget so that ``m`` composed releases use ``b``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    a, g, e = b._exact
    return PrivacyBudget._of(a / int(m), g / int(m), e / int(m))


def histogram_of(data: BinnedDataset) -> HistogramLattice:
    counts = np.bincount(data.bins, minlength=data.k)
    return HistogramLattice(counts, data.n)


def support_set(data: BinnedDataset) -> frozenset[int]:
    """Indices of the empty cells of ``data``."""
    counts = np.bincount(data.bins, minlength=data.k)
    return frozenset(int(j) for j in np.flatnonzero(counts == 0))


@dataclass(frozen=True)
class RandomSource:
    """Addressable random stream.

    ``(seed, stream)`` names a stream; :meth:`spawn` derives child streams
    (one per Monte Carlo trial) that are independent of evaluation order.
    Every call to :meth:`generator` restarts the stream from its beginning.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for name, v in (("seed", self.seed), ("stream", self.stream)):
            if not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def spawn(self, i: int) -> RandomSource:
        return RandomSource(self.seed, self.stream, self.path + (int(i),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + self.path)
        return np.random.Generator(np.random.Philox(ss))


def map_trials(
    fn: Callable[[int, RandomSource], T],
    trials: int,
    source: RandomSource,
    threads: int = 1,
    chunk: int = 256,
) -> list[T]:
    """Evaluate ``fn(t, source.spawn(t))`` for ``t < trials``, in trial order.

    Results do not depend on ``threads``: each trial owns its stream and the
    output list is assembled by index.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def run(lo: int) -> list[T]:
        return [fn(t, source.spawn(t)) for t in range(lo, min(lo + chunk, trials))]

    starts = range(0, trials, chunk)
    if threads <= 1:
        blocks = [run(lo) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, starts))
    return [r for block in blocks for r in block]
