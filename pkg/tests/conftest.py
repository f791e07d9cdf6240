import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sgl.games import Policy, rps, bach_stravinsky, blotto_4_3, fact5_game
from sgl.restrictions import ConvexHullGlobal


@pytest.fixture
def rps_game():
    return rps()


@pytest.fixture
def bos_game():
    return bach_stravinsky()


@pytest.fixture
def blotto_game():
    return blotto_4_3()


@pytest.fixture
def fact5():
    return fact5_game()


@pytest.fixture
def rps_column_hull():
    """Column forced to play the middle action exactly half the time."""
    return ConvexHullGlobal((Policy([[0.5, 0.5, 0.0]]), Policy([[0.0, 0.5, 0.5]])))


@pytest.fixture
def blotto_row_hull():
    return ConvexHullGlobal(
        (
            Policy([[0.25, 0.5, 0.25, 0.0, 0.0]]),
            Policy([[0.0, 0.25, 0.5, 0.25, 0.0]]),
            Policy([[0.0, 0.0, 0.25, 0.5, 0.25]]),
        )
    )
