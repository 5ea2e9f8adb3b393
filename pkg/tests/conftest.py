import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from iterchaos.dist_moments import BASELINE_FAMILIES, Model
from iterchaos.grid_basis import Grid, StepFn

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")

FAMILY_TAGS = [str(f) for f in BASELINE_FAMILIES]


@pytest.fixture(params=FAMILY_TAGS)
def model(request):
    return Model.parse(request.param)


def values(n, bound=3.0):
    return st.lists(
        st.floats(-bound, bound, allow_nan=False, allow_infinity=False), min_size=n, max_size=n
    ).map(np.array)


@st.composite
def step_pairs(draw, level=3, T=1.0):
    grid = Grid(T, level)
    return StepFn(grid, draw(values(grid.n_cells))), StepFn(grid, draw(values(grid.n_cells)))


def random_step(rng, grid):
    return StepFn(grid, rng.normal(size=grid.n_cells))
