import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config.settings import AnalysisSettings  # noqa: E402
from framework.settlement import validate_hashrate  # noqa: E402


@pytest.fixture
def lam():
    """λ = (0.5, 0.2, 0.3): half the hashrate is non-strategic"""
    return validate_hashrate(["0.5", "0.2", "0.3"])


@pytest.fixture
def even_lam():
    return validate_hashrate(["0", "0.5", "0.5"])


@pytest.fixture
def single_lam():
    """One strategic miner holding everything"""
    return validate_hashrate(["0", "1"])


@pytest.fixture
def config():
    return AnalysisSettings()


@pytest.fixture
def race_fees():
    return Fraction(1), Fraction(10)
