import numpy as np
import pytest

from casimirkit.guiding_center import FieldModel, gc_system
from casimirkit.poisson import PoissonOperator, canonical_operator, so3_operator


def nc_matrix():
    """Six-dimensional guiding-centre matrix with the gyro block removed."""
    J = np.zeros((6, 6))
    for k in (1, 2):
        J[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = [[0, 1], [-1, 0]]
    return J


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def J_c():
    return canonical_operator(1)


@pytest.fixture
def J_nc():
    return PoissonOperator.from_matrix(nc_matrix())


@pytest.fixture
def so3():
    return so3_operator(lambda z: z)


@pytest.fixture
def gc():
    return gc_system(FieldModel())
