import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from windipp.planner import CostMatrix  # noqa: E402
from windipp.scenario import Region, make_wind  # noqa: E402


def random_cost_matrix(seed, n, m, asym=0.3):
    """Travel times between random points with a random per-direction factor."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, (n + m, 2))
    D = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    C = D * (1 + asym * rng.random(D.shape)) / 100.0
    np.fill_diagonal(C, np.nan)
    C[n:, n:] = np.nan
    return CostMatrix(n, m, C, D.copy())


def matrix_from_array(C, n, m):
    C = np.array(C, dtype=float)
    return CostMatrix(n, m, C, np.where(np.isnan(C), np.nan, 1.0))


# scenario objects are immutable, so sharing them across tests is safe
@pytest.fixture(scope="session")
def square():
    return Region((0.0, 0.0, 1000.0, 1000.0))


@pytest.fixture(scope="session")
def holed():
    hole = ((400.0, 300.0), (600.0, 300.0), (600.0, 700.0), (400.0, 700.0))
    return Region((0.0, 0.0, 1000.0, 1000.0), (hole,))


@pytest.fixture(scope="session")
def noisy_wind(square):
    return make_wind("seeded-smooth-noise",
                     {"mean_speed": 10.0, "from_deg": 45.0, "amplitude": 3.0, "length": 300.0, "seed": 5},
                     square, 50.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
