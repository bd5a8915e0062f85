"""
Fixtures partagées des suites pytest.
"""
import json
import logging
from pathlib import Path

import pytest

from core.counting import constant_shift_table, exact_zero_table
from core.selftest import reference_system

ROOT = Path(__file__).parent
CONFIG_DIR = ROOT / "config"


@pytest.fixture(autouse=True)
def quiet_logging():
    logging.getLogger().setLevel(logging.WARNING)
    yield


@pytest.fixture
def two_squares():
    """{z², z²} : E(n) = 4ⁿ + 2ⁿ."""
    return reference_system((2, 2))


@pytest.fixture
def square_cube():
    """{z², z³} : E(n) = 5ⁿ + 2ⁿ."""
    return reference_system((2, 3))


@pytest.fixture
def reference_table():
    return exact_zero_table((2, 2), 25, ("z^2", "z^2"), 4.0)


@pytest.fixture
def single_map_table():
    return constant_shift_table((2,), 0.3, 12, ("z^2",))


@pytest.fixture
def write_config(tmp_path):
    """Écrit une expérience JSON dans tmp_path et renvoie son chemin."""
    def _write(document, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write
