import numpy as np
import pytest

from angletl.core import Dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_problem(rng, n=40, p=15, noise=0.5):
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p) / np.sqrt(p)
    w = beta + 0.3 * rng.standard_normal(p) / np.sqrt(p)
    Y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(X, Y), w, beta


@pytest.fixture
def problem(rng):
    return make_problem(rng)


@pytest.fixture
def wide_problem(rng):
    return make_problem(rng, n=20, p=60)
