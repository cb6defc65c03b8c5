import numpy as np
import pytest

import performative as pf


@pytest.fixture
def bench():
    """The scalar location benchmark used throughout: a=0.5, b=1, lam=1, s=1."""
    return pf.ScalarQuadratic(a=0.5, b=1.0, lam=1.0, s=1.0)


@pytest.fixture
def bench_uniform():
    return pf.ScalarQuadratic(a=0.5, b=1.0, lam=1.0, s=1.0, noise="uniform")


@pytest.fixture
def box_space():
    return pf.ParamSpace.box([-10.0], [10.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
