import json
from pathlib import Path

import pytest

from arctraj.grid import Grid, make_grid

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def sample_action() -> dict:
    """A real recorded SelectCell action, 18x18 grid, four objects."""
    return load_fixture("action_select_cell.json")


@pytest.fixture(scope="session")
def sample_grid(sample_action) -> Grid:
    return make_grid(sample_action["grid"])
