import numpy as np
import pytest

from tsinterp.models import LinearSoftmaxModel, MlpModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def linear_scorer(rng):
    """Linear model on a (2, 5) input, 3 classes."""
    w = rng.normal(0, 1.0, size=(3, 10))
    b = rng.normal(0, 0.1, size=3)
    return LinearSoftmaxModel(w, b, (2, 5))


@pytest.fixture
def mlp_scorer(rng):
    """Random MLP on a (2, 5) input, 3 classes, 8 hidden units."""
    return MlpModel(
        rng.normal(0, 0.5, size=(8, 10)),
        rng.normal(0, 0.1, size=8),
        rng.normal(0, 0.5, size=(3, 8)),
        rng.normal(0, 0.1, size=3),
        (2, 5),
    )
