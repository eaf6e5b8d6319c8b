import numpy as np
import pytest

from mixdual.catalog import get_problem
from mixdual.dual import Partition
from mixdual.experiments import recovered_point
from mixdual.solver import SolverOptions


@pytest.fixture(scope="session")
def P1():
    return get_problem("P1")


@pytest.fixture(scope="session")
def S1():
    return get_problem("S1")


@pytest.fixture(scope="session")
def mixed2():
    """J0 = {1}, J1 = {2} on two constraints."""
    return Partition(2, ((1,), (2,)))


@pytest.fixture(scope="session")
def p1_recovered(P1, mixed2):
    """(solve result, recovery result) for P1 with weights (0.5, 0.5), N = 201."""
    return recovered_point(P1, mixed2, (0.5, 0.5), SolverOptions(N=201))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
