import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ncfa.algebra import element, matrix_algebra
from ncfa.rearrangement import StepFunction

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_matrix(rng, n, hermitian=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2 if hermitian else a


def random_element(alg, rng, hermitian=False):
    return element(alg, [random_matrix(rng, d, hermitian) for d in alg.dims], hermitian)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


seeds = st.integers(min_value=0, max_value=2**32 - 1)

step_pairs = st.lists(
    st.tuples(
        st.floats(min_value=0.01, max_value=10.0, allow_nan=False),
        st.floats(min_value=0.01, max_value=3.0, allow_nan=False),
    ),
    min_size=1,
    max_size=8,
)


@st.composite
def step_functions(draw):
    pairs = draw(step_pairs)
    return StepFunction.from_pairs([v for v, _ in pairs], [l for _, l in pairs])


@st.composite
def hermitian_elements(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    seed = draw(seeds)
    return random_element(matrix_algebra(n), np.random.default_rng(seed), hermitian=True)
