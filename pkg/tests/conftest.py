import numpy as np
import pytest


@pytest.fixture
def grid64():
    return np.arange(64) * 2 * np.pi / 64
