import numpy as np
import pytest

from qdiana.utils.numerics import pairwise_mean, pairwise_sum, relative_difference, squared_norm


def test_pairwise_sum_association_order():
    rng = np.random.default_rng(0)
    a, b, c, d, e = (rng.standard_normal(6) for _ in range(5))

    np.testing.assert_array_equal(pairwise_sum([a, b, c]), a + (b + c))
    np.testing.assert_array_equal(pairwise_sum([a, b, c, d, e]), (a + b) + (c + (d + e)))
    np.testing.assert_array_equal(pairwise_mean([a, b, c, d]), ((a + b) + (c + d)) / 4)


def test_pairwise_sum_copies_single_vector():
    vector = np.ones(3)
    total = pairwise_sum([vector])
    total[0] = 5.0

    assert vector[0] == 1.0


def test_pairwise_sum_rejects_empty_input():
    with pytest.raises(ValueError):
        pairwise_sum([])


def test_small_helpers():
    assert squared_norm(np.array([3.0, 4.0])) == 25.0
    assert relative_difference(0.0, 0.0) == 0.0
    assert relative_difference(1.0, 2.0) == 0.5
