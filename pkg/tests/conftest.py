import numpy as np
import pytest

from evdn.core import Geometry, EventStream, LabeledEventStream


def random_stream(rng, geometry=Geometry(32, 32), duration=100_000, n=500,
                  labeled=False):
    t = np.sort(rng.integers(0, duration, size=n))
    x = rng.integers(0, geometry.width, size=n)
    y = rng.integers(0, geometry.height, size=n)
    p = rng.integers(0, 2, size=n)
    s = EventStream(geometry, t, x, y, p, duration, sort=True)
    if labeled:
        return LabeledEventStream(s, rng.integers(0, 2, size=n).astype(np.uint8))
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
