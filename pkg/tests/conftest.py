import numpy as np
import pytest

from normalizer import FileManager, Randomizer
from normalizer.series import Grading


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long reproduction runs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long reproduction run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def workspace(tmp_path):
    FileManager.working_dir = str(tmp_path)
    FileManager.saving_enabled = True
    FileManager.loading_enabled = False
    FileManager.manifest_hash = None
    Randomizer.rng = np.random.default_rng(42)
    Grading.k_norm = "l1"
    yield tmp_path
