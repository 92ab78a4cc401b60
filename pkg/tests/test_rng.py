import numpy as np
from numpy.testing import assert_array_equal

from corrspec.rng import parallel_map, stream


def test_same_identity_same_draws():
    assert_array_equal(stream(7, "noise", 3, 1).standard_normal(5), stream(7, "noise", 3, 1).standard_normal(5))


def test_streams_are_distinct():
    draws = {
        key: stream(7, *key).standard_normal(4).tobytes()
        for key in [("noise", 0, 0), ("noise", 1, 0), ("noise", 0, 1), ("cluster", 0, 0)]
    }
    assert len(set(draws.values())) == 4
    assert stream(8, "noise").random() != stream(7, "noise").random()


def test_parallel_map_preserves_order():
    assert parallel_map(lambda x: x * x, range(20), workers=8) == [x * x for x in range(20)]
