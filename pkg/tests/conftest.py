import numpy as np
import pytest

from eegid.core.config import Settings
from eegid.services.synth_service import SynthConfig, synth_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance tests on the full dataset")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end acceptance runs on the full synthetic dataset")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


SMALL_TRIALS = [8, 8, 8, 6, 6]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synth_config():
    return SynthConfig(n_subjects=3, trials_per_session=SMALL_TRIALS, n_channels=10, seed=7)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, small_synth_config):
    """Three subjects, five sessions, ten channels; returns the manifest path"""
    root = tmp_path_factory.mktemp("small_dataset")
    synth_dataset(small_synth_config, root)
    return root / "manifest.json"


@pytest.fixture
def small_settings():
    return Settings(
        _env_file=None,
        SEED=7,
        N_SUBJECTS=3,
        N_CHANNELS=10,
        TRIALS_PER_SESSION=SMALL_TRIALS,
        TUNE_BUDGET=3,
        LOG_LEVEL="WARNING",
    )
