import numpy as np
import pytest

from monosig.orders import PartialOrder
from monosig.systems import make_counterexample, make_kng, make_long, with_committed


@pytest.fixture
def long_sys():
    return make_long()


@pytest.fixture
def counter_sys():
    return make_counterexample()


@pytest.fixture
def committed_sys():
    return with_committed(make_long(), [("A", 1.0)])


@pytest.fixture
def long_chain():
    # B < AB < A in index terms (A=0, AB=1, B=2)
    return PartialOrder.from_edges(3, [(2, 1), (1, 0)])


def kng_chain(K):
    return PartialOrder.chain(K + 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
