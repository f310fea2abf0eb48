import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "src"))


@pytest.fixture(scope="session")
def repo_root():
    return REPO_ROOT


@pytest.fixture(scope="session")
def bundled_device_dir(repo_root):
    path = repo_root / "configs" / "devices" / "dtf_like"
    if not path.is_dir():
        pytest.skip("bundled device directory missing")
    return path


@pytest.fixture(scope="session")
def bundled_config(repo_root):
    path = repo_root / "configs" / "dtf_like.cfg"
    if not path.is_file():
        pytest.skip("bundled config missing")
    return path
