import numpy as np
import pytest

from hdbf.core import GroupedData


def random_grouped(rng, k=None, p=None, nmin=5, nmax=7, kmax=4, pmax=5):
    k = k or int(rng.integers(2, kmax + 1))
    p = p or int(rng.integers(1, pmax + 1))
    sizes = rng.integers(nmin, nmax + 1, size=k)
    groups = [rng.normal(loc=rng.normal(), scale=rng.uniform(0.5, 2), size=(n, p)) for n in sizes]
    return GroupedData(groups)


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hand_instance():
    # k=2, p=1: group1 = {1, 1}, group2 = {-1, -1}
    return GroupedData([[[1.0], [1.0]], [[-1.0], [-1.0]]])


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
