import pytest

from eegid.core.config import Settings
from eegid.graph.workflow import run_pipeline
from eegid.services.synth_service import synth_dataset

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def full_settings():
    return Settings(_env_file=None, LOG_LEVEL="WARNING")


@pytest.fixture(scope="module")
def full_dataset(tmp_path_factory, full_settings):
    root = tmp_path_factory.mktemp("full_dataset")
    synth_dataset(full_settings.synth_config(), root)
    return root / "manifest.json"


@pytest.fixture(scope="module")
def wavelet_report(full_dataset, full_settings, tmp_path_factory):
    return run_pipeline(full_dataset, full_settings, tmp_path_factory.mktemp("wavelet"), "wavelet", "svm")


def test_wavelet_svm_identifies_subjects(wavelet_report):
    assert wavelet_report.accuracy >= 0.90


def test_statistical_features_trail_wavelet(full_dataset, full_settings, wavelet_report, tmp_path):
    report = run_pipeline(full_dataset, full_settings, tmp_path, "statistical", "svm")
    assert report.accuracy >= 0.80
    assert report.accuracy < wavelet_report.accuracy
