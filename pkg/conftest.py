import os
import sys

import pytest

root_dir = os.path.dirname(os.path.abspath(__file__))
if root_dir not in sys.path:
    sys.path.insert(0, root_dir)

from IBNLSLab.core.grid import make_grid, make_weight
from IBNLSLab.core.groundstate import petviashvili_solve
from IBNLSLab.models.params import PhysParams


@pytest.fixture(scope="session")
def params_1d():
    return PhysParams(d=1, mu=0.0, b=0.25, alpha=8.0)


@pytest.fixture(scope="session")
def grid_1d():
    return make_grid(1, 1024, 32.0, shift=True)


@pytest.fixture(scope="session")
def weight_1d(grid_1d, params_1d):
    return make_weight(grid_1d, params_1d.b, 0.0)


@pytest.fixture(scope="session")
def ground_state_1d(params_1d, grid_1d, weight_1d):
    return petviashvili_solve(params_1d, grid_1d, weight=weight_1d)


@pytest.fixture(scope="session")
def params_classify():
    return PhysParams(d=1, mu=0.0, b=0.25, alpha=12.0)


@pytest.fixture(scope="session")
def ground_state_classify(params_classify, grid_1d):
    return petviashvili_solve(params_classify, grid_1d, weight=make_weight(grid_1d, params_classify.b, 0.0))
