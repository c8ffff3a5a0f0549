import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import textured_frame  # noqa: E402  (re-export for fixtures)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def textured():
    return textured_frame
