import json
from pathlib import Path

import numpy as np
import pytest

from invpress import Box, LinearSystem

DATA = Path(__file__).parent / "data"


def data_path(name):
    return str(DATA / name)


def load_doc(name):
    return json.loads((DATA / name).read_text())


@pytest.fixture
def scalar():
    return LinearSystem([[1.0]], [[1.0]], [(-1.0, 1.0)])


@pytest.fixture
def pendulum():
    return LinearSystem([[0.0, 1.0], [1.0, 0.0]], [[0.0], [1.0]], [(-1.0, 1.0)])


@pytest.fixture
def pendulum_T():
    return 0.5 * np.array([[-1.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def unit_box():
    return Box([-1.0], [1.0])
