import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def vectors(n, lo=-10.0, hi=10.0):
    return arrays(np.float64, n, elements=st.floats(lo, hi, allow_nan=False, allow_infinity=False))


@st.composite
def unit_quaternions(draw):
    v = draw(vectors(4, -1.0, 1.0).filter(lambda a: np.linalg.norm(a) > 0.1))
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
