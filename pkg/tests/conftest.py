import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from latstretch import _accel
from latstretch.geometry import ConvexBody, DiagonalStretch

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracles():
    return json.loads((FIXTURES / "oracles.json").read_text())


@pytest.fixture(scope="session")
def disk():
    return ConvexBody.ball(2)


@pytest.fixture(scope="session")
def half_disk():
    """The balanced disk: radius 1/2, both axis sections of length 1."""
    return ConvexBody.ball(2, 0.5)


@pytest.fixture(scope="session")
def ball3():
    return ConvexBody.ball(3)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    previous = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(previous)


def euclidean_gauge(X):
    return np.sqrt(np.sum(np.asarray(X) ** 2, axis=-1))


def random_unimodular(rng, d, lo=1.0 / 3.0, hi=3.0):
    """Determinant-one diagonal stretch with entries in [lo, hi]."""
    while True:
        t = rng.uniform(math.log(lo), math.log(hi), d - 1)
        last = -t.sum()
        if math.log(lo) <= last <= math.log(hi):
            entries = list(np.exp(t))
            entries.append(1.0 / math.prod(entries))
            return DiagonalStretch(tuple(entries))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
