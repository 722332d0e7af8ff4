import numpy as np
import pytest

from assortmatch.market_data import CoupleSample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_sample(rng, n=50, o=3, names=None):
    return CoupleSample(rng.normal(size=(n, o)), rng.normal(size=(n, o)), names or tuple(f"x{k + 1}" for k in range(o)))


@pytest.fixture
def small_sample(rng):
    return make_sample(rng)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
