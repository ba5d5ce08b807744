"""
Tests for the sample streams feeding the learning loop.
"""

import numpy as np
import pytest

from gmdiffuse.core.errors import InsufficientSamplesError, InvalidParameterError
from gmdiffuse.worker.sources import ArraySampleSource, MixtureSampleSource


def test_mixture_source_records_draws(pair4):
    source = MixtureSampleSource(pair4, seed=0)
    first = source.draw(100)
    second = source.draw(50, purpose="refresh:3")
    assert first.shape == (100, 1) and second.shape == (50, 1)
    assert source.consumed == 150
    assert source.history == [("regression", 100), ("refresh:3", 50)]


def test_mixture_source_reproducible(triangle):
    a = MixtureSampleSource(triangle, seed=5).draw(20)
    b = MixtureSampleSource(triangle, seed=5).draw(20)
    np.testing.assert_array_equal(a, b)


def test_array_source_consumes_in_order():
    points = np.arange(10.0).reshape(5, 2)
    source = ArraySampleSource(points)
    assert source.n == 2
    np.testing.assert_array_equal(source.draw(2), points[:2])
    np.testing.assert_array_equal(source.draw(3), points[2:])
    assert source.remaining == 0


def test_array_source_exhausted():
    source = ArraySampleSource(np.zeros((4, 1)))
    source.draw(3)
    with pytest.raises(InsufficientSamplesError) as info:
        source.draw(2)
    assert info.value.context == {"requested": 2, "available": 1}
    assert source.consumed == 3


def test_negative_count_rejected(delta0):
    with pytest.raises(InvalidParameterError):
        MixtureSampleSource(delta0, seed=0).draw(-1)
