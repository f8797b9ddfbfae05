import numpy as np
import pytest

from stagegame.game import fixture, random_game


@pytest.fixture(params=["FIX-CONST", "FIX-MP", "FIX-ABS"])
def fix_game(request):
    return fixture(request.param)


@pytest.fixture
def fixabs():
    return fixture("FIX-ABS")


@pytest.fixture
def rgame():
    return random_game(3, nstates=3, nactions=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
