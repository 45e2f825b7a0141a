"""Randomly differentially private histogram and scalar release."""

from .core import (
    BinnedDataset,
    HistogramLattice,
    PrivacyBudget,
    RandomSource,
    compose,
    compose_all,
    histogram_of,
    split_budget,
    support_set,
)
from .mechanisms import (
    LaplaceScale,
    Projection,
    SparseReleaseConfig,
    dp_histogram,
    l1_project,
    rdp_sparse_histogram,
    sample_laplace,
)
from .synth import BinDistribution, sample_dataset, sample_synthetic

__version__ = "0.1.0"

__all__ = [
    "BinDistribution",
    "BinnedDataset",
    "HistogramLattice",
    "LaplaceScale",
    "PrivacyBudget",
    "Projection",
    "RandomSource",
    "SparseReleaseConfig",
    "compose",
    "compose_all",
    "dp_histogram",
    "histogram_of",
    "l1_project",
    "rdp_sparse_histogram",
    "sample_dataset",
    "sample_laplace",
    "sample_synthetic",
    "split_budget",
    "support_set",
]
