import numpy as np
import pytest

from orliczlab.geometry import DomainMask, Grid, MatrixField
from orliczlab.solver import WeakProblem, assemble
from orliczlab.young import NormalizedMeasure


@pytest.fixture(scope="session")
def unit_square_grid():
    return Grid.square(1.0, 33)


@pytest.fixture(scope="session")
def unit_square_mask(unit_square_grid):
    return DomainMask.square(unit_square_grid)


@pytest.fixture(scope="session")
def square_operator(unit_square_grid, unit_square_mask):
    problem = WeakProblem(
        A=MatrixField.identity(),
        f=lambda x, y: np.zeros_like(x),
        grid=unit_square_grid,
        mask=unit_square_mask,
    )
    op, _ = assemble(problem)
    return op


@pytest.fixture(scope="session")
def square_measure(square_operator):
    return square_operator.measure


def smooth_field_bank(grid, count, seed=1234):
    """Deterministic random smooth fields (sums of gaussian bumps)."""
    X, Y = grid.mesh()
    rng = np.random.default_rng(seed)
    span = grid.xmax - grid.xmin
    fields = []
    for _ in range(count):
        f = np.zeros_like(X)
        for _ in range(rng.integers(2, 5)):
            cx = rng.uniform(grid.xmin, grid.xmax)
            cy = rng.uniform(grid.ymin, grid.ymax)
            s = rng.uniform(0.1, 0.4) * span
            amp = rng.uniform(-2.0, 2.0)
            f += amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s))
        f += rng.uniform(0.1, 0.5)
        fields.append(f)
    return fields


@pytest.fixture(scope="session")
def flat_measure():
    return NormalizedMeasure.uniform((16,))
