"""
Shared fixtures: toy instances, the two-pair counterexample, a bank-like CSV.
"""

import pytest

import core.config as config
from core.instance import Instance, ProportionBounds
from core.noise import NoiseParams
from oracles import BLUE, RED, write_bank_like_csv


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test starts from default settings."""
    for key in ("RFC_TOL", "RFC_DENSE_THRESHOLD", "RFC_SNAP_EPS", "RFC_TRACE_LIMIT",
                "RFC_ENUM_LIMIT", "RFC_MAX_PIVOTS", "RFC_LP_METHOD", "RFC_WORKERS", "RFC_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    config.settings = None
    yield
    config.settings = None


@pytest.fixture
def toy():
    """2 red + 2 blue: features (0,0),(3,4),(0,0),(3,4), labels r,b,r,b."""
    return Instance.from_arrays(
        [[0, 0], [3, 4], [0, 0], [3, 4]],
        [RED, BLUE, RED, BLUE],
        k=2,
        names=("r", "b"),
    )


@pytest.fixture
def two_pairs():
    """Two coincident red/blue pairs far apart; farthest-first picks points 0 and 2."""
    return Instance.from_arrays(
        [[0, 0], [0, 0], [10, 0], [10, 0]],
        [RED, BLUE, RED, BLUE],
        k=2,
        bounds=ProportionBounds.uniform(0.25, 0.75, 2),
    )


@pytest.fixture
def unit_caps():
    return NoiseParams.from_caps([1, 1], [1, 1], [2, 2])


@pytest.fixture
def bank_csv(tmp_path):
    path = tmp_path / "bank.csv"
    frame = write_bank_like_csv(path, 60)
    return path, frame
