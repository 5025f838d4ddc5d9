import numpy as np
import pytest

from rlr_asymptotics.expectations import PriorSpec
from rlr_asymptotics.prox import RegularizerSpec
from rlr_asymptotics.scalar import gauss_hermite
from rlr_asymptotics.solver import ProblemSpec


@pytest.fixture(scope="session")
def rule():
    return gauss_hermite(80)


@pytest.fixture
def l2_spec():
    return ProblemSpec(1.0, 4.0, 0.5, RegularizerSpec("l2sq"))


@pytest.fixture
def sparse_l1_spec():
    return ProblemSpec(1.0, 4.0, 0.8, RegularizerSpec("l1"), PriorSpec("sparse", 1.0, 0.25))


def random_points(seed, count, low=0.1, high=3.0):
    from rlr_asymptotics.solver import FixedPoint

    rng = np.random.default_rng(seed)
    return [FixedPoint(*rng.uniform(low, high, 6)) for _ in range(count)]
