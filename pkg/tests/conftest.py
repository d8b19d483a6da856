import numpy as np
import pytest

from widthlab.services.function_space import FunctionVector, GridDomain, MeasureKind, NormSpec


@pytest.fixture
def pair_domain():
    """Two points with Lebesgue weights (1, 1)."""
    return GridDomain.from_points([0.0, 1.0], [1.0, 1.0], MeasureKind.LEBESGUE)


@pytest.fixture
def half_domain():
    """Two points with probability weights (1/2, 1/2)."""
    return GridDomain.from_points([0.0, 1.0])


@pytest.fixture(scope="session")
def torus():
    return GridDomain.torus(4096)


@pytest.fixture
def vec():
    def make(values, domain):
        return FunctionVector(np.asarray(values, dtype=float), domain)
    return make


@pytest.fixture
def l2():
    def make(domain):
        return NormSpec(2, domain)
    return make
