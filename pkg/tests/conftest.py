import functools

import numpy as np
import pytest

from qs3.catalog import resolve
from qs3.report import sample_points


@functools.lru_cache(maxsize=None)
def manifold(name):
    return resolve(name)


def points(M, n=4, seed=7):
    return sample_points(M, n, np.random.SeedSequence(seed))


@pytest.fixture(scope="session")
def sphere7():
    return manifold("sphere7")


@pytest.fixture(scope="session")
def flat7():
    return manifold("flat7")


@pytest.fixture(scope="session")
def csas4():
    return manifold("csasakian7:c=4")


@pytest.fixture(scope="session")
def product11():
    return manifold("product11")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
