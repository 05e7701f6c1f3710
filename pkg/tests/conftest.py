import numpy as np
import pytest

from odece.cop_core import ConstraintSystem, Family


def random_knapsack(rng, n, m, tight=0.5):
    w = rng.uniform(1.0, 10.0, size=(m, n))
    cap = tight * w.sum(axis=1)
    q = -rng.uniform(1.0, 20.0, size=n)
    return ConstraintSystem(Family.KNAPSACK_WEIGHTS, n, m, cap), w.ravel(), q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
