import hypothesis
import numpy as np
import pytest

from carleman_hydro.grad_dns import GradParams, kolmogorov_init
from carleman_hydro.linalg import Grid

hypothesis.settings.register_profile("default", deadline=None, max_examples=40)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=8)
hypothesis.settings.load_profile("default")


@pytest.fixture
def params():
    return GradParams()


@pytest.fixture
def small_flow(params):
    g = Grid(4, 4)
    return kolmogorov_init(g, 0.1, 0.1, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
