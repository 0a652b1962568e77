import numpy as np
import pytest

from zenosim.rng import Rng, worker_stream


def test_same_seed_and_stream_repeat():
    a, b = Rng(42, 3), Rng(42, 3)
    assert np.array_equal(a.uniform(size=16), b.uniform(size=16))
    assert np.array_equal(a.integers(100, size=16), b.integers(100, size=16))


def test_streams_are_distinct():
    assert not np.array_equal(Rng(42, worker_stream(0)).uniform(size=8),
                              Rng(42, worker_stream(1)).uniform(size=8))


def test_draw_counter():
    r = Rng(1, 2)
    r.normal(size=3)
    r.integers(5)
    assert r.draws == 2


def test_pinned_first_draw():
    # guards against silent generator changes across numpy versions
    assert Rng(0, 0).integers(2**31) == 1722792823
    assert Rng(12345, 7).uniform() == 0.9830252332964733


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        Rng(-1)
