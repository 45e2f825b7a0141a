import numpy as np
import pytest

from randdp import BinnedDataset, RandomSource


@pytest.fixture
def rng():
    return RandomSource(20240601)


@pytest.fixture
def sparse_data():
    """k=25, n=500, two occupied cells with 200 and 300 points."""
    return BinnedDataset(np.repeat([3, 17], [200, 300]), 25)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
