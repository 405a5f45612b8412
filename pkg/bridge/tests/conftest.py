from __future__ import annotations

import numpy as np
import pytest
import torch

from nnbridge.models import LinearProbe, SmallCnn


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def linear_model():
    torch.manual_seed(11)
    return LinearProbe((2, 16), 3).eval()


@pytest.fixture
def cnn_model():
    torch.manual_seed(12)
    return SmallCnn((2, 16), 3, channels=8, kernel=5).eval()
