import math

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def combined_half_width(*reports):
    return math.sqrt(sum(r.half_width ** 2 for r in reports))


def b_grid_oracle(step=1e-4):
    """sup of b^2 / (1 + a^2) over z = (1, a, b) in the l1 cone a + b <= 1, 0 <= b <= a <= 1.

    Plain 2-D grid; the top-2 support is {0, 1} once coordinates are sorted."""
    grid = np.arange(0.0, 1.0 + step / 2, step)
    best = 0.0
    for chunk in np.array_split(grid, 20):
        a = chunk[:, None]
        b = grid[None, :]
        ok = (b <= a) & (a + b <= 1 + 1e-12)
        best = max(best, np.where(ok, b * b / (1 + a * a), 0.0).max())
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
