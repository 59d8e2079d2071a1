from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from model import builtin_hatano_nelson, builtin_nh_ssh  # noqa: E402


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: amoeba rasters and GBZ refinement (deselect with -m 'not slow')")


@pytest.fixture
def hn():
    return builtin_hatano_nelson(0.5, 1.0)


@pytest.fixture
def hn_hermitian():
    return builtin_hatano_nelson(1.0, 1.0)


@pytest.fixture
def ssh_topological():
    return builtin_nh_ssh(0.6, 1.0, 0.3)


@pytest.fixture
def models_dir() -> Path:
    return ROOT / "exp" / "models"
