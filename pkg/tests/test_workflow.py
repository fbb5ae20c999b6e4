import json
import shutil

import numpy as np
import pandas as pd
import pytest

from eegid.core.errors import PipelineError, SplitError
from eegid.core.models import Trial
from eegid.core.montage import builtin_montage
from eegid.core.state import create_initial_state
from eegid.graph.edges import should_tune
from eegid.graph.workflow import PipelineWorkflow, run_pipeline
from eegid.services.benchmark_service import BENCHMARK_COLUMNS, run_benchmark
from eegid.services.feature_service import extract_manifest_features
from eegid.services.session_io import load_manifest, read_session, write_session
from eegid.services.synth_service import SynthConfig, synth_dataset


@pytest.fixture(scope="module")
def cached_features(small_dataset):
    """One extraction shared by the runs that are not about feature extraction"""
    return extract_manifest_features(load_manifest(small_dataset), small_dataset.parent, "wavelet", builtin_montage())


def test_should_tune(small_settings, small_dataset, tmp_path):
    state = create_initial_state(small_settings, small_dataset, tmp_path)
    assert should_tune(state) == "tune"
    state["settings"] = small_settings.model_copy(update={"TUNE_BUDGET": 0})
    assert should_tune(state) == "train"


def test_initial_state_uses_settings(small_settings, small_dataset, tmp_path):
    state = create_initial_state(small_settings, small_dataset, tmp_path)
    assert (state["feature_set"], state["model_kind"]) == ("wavelet", "svm")
    assert state["split"].test_sessions == [5]
    assert state["stage_log"] == [] and state["artifacts"] == {}


def test_full_run_writes_every_artifact(small_settings, small_dataset, cached_features, tmp_path):
    state = PipelineWorkflow().run(
        create_initial_state(small_settings, small_dataset, tmp_path, features=cached_features))
    assert [entry["stage"] for entry in state["stage_log"]] == [
        "load", "features", "standardize", "tune", "train", "evaluate",
    ]
    for name in ("features.csv", "features.json", "params.json", "params.trace.csv", "model.json",
                 "report.json", "run_log.json"):
        assert (tmp_path / name).is_file(), name

    report = state["report"]
    assert report.split.test_sessions == [5]
    assert report.model_provenance["tuning"]["budget"] == 3
    assert 0.0 <= report.accuracy <= 1.0

    run_log = json.loads((tmp_path / "run_log.json").read_text(encoding="utf-8"))
    assert run_log["seeds"]["global"] == 7
    assert run_log["settings"]["TUNE_BUDGET"] == 3
    assert run_log["ledger"]["metric_averaging"] == "macro"
    assert run_log["stages"][-1]["stage"] == "evaluate"


def test_reruns_are_byte_identical(small_settings, small_dataset, tmp_path):
    run_pipeline(small_dataset, small_settings, tmp_path / "a")
    run_pipeline(small_dataset, small_settings, tmp_path / "b")
    for name in ("features.csv", "params.json", "model.json", "report.json", "run_log.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_test_session_cannot_reach_the_model(small_settings, small_dataset, tmp_path):
    poisoned = tmp_path / "poisoned"
    shutil.copytree(small_dataset.parent, poisoned)
    manifest = load_manifest(poisoned / "manifest.json")
    rng = np.random.default_rng(99)
    for subject in manifest.subjects:
        entry = subject.sessions[4]
        session = read_session(poisoned / entry.path, subject.id, entry.index)
        scrambled = [
            Trial(label_id=t.label_id, bad=t.bad,
                  samples=(5.0 * t.samples + rng.normal(scale=50.0, size=t.samples.shape)).astype(np.float32))
            for t in session.trials
        ]
        write_session(session.replace_trials(scrambled), poisoned / entry.path)

    run_pipeline(small_dataset, small_settings, tmp_path / "clean")
    run_pipeline(poisoned / "manifest.json", small_settings, tmp_path / "dirty")
    assert (tmp_path / "clean" / "model.json").read_bytes() == (tmp_path / "dirty" / "model.json").read_bytes()
    assert (tmp_path / "clean" / "params.json").read_bytes() == (tmp_path / "dirty" / "params.json").read_bytes()


def test_zero_budget_skips_tuning(small_settings, small_dataset, cached_features, tmp_path):
    settings = small_settings.model_copy(update={"TUNE_BUDGET": 0})
    state = PipelineWorkflow().run(create_initial_state(settings, small_dataset, tmp_path, features=cached_features))
    assert "tune" not in [entry["stage"] for entry in state["stage_log"]]
    assert not (tmp_path / "params.json").exists()
    assert state["model"].params == settings.svm_hyperparams().model_dump()
    assert state["report"].model_provenance["tuning"] is None


def test_fold_validation_trains_on_validation_too(small_settings, small_dataset, cached_features, tmp_path):
    settings = small_settings.model_copy(update={"FOLD_VALIDATION": True})
    state = PipelineWorkflow().run(create_initial_state(settings, small_dataset, tmp_path, features=cached_features))
    assert state["model"].training["sessions"] == [1, 2, 3, 4]
    assert state["report"].model_provenance["fold_validation"] is True


def test_gbt_run(small_settings, small_dataset, cached_features, tmp_path):
    settings = small_settings.model_copy(update={"TUNE_BUDGET": 1})
    report = run_pipeline(small_dataset, settings, tmp_path, model_kind="gbt", features=cached_features)
    assert report.model_provenance["kind"] == "gbt"
    assert set(report.labels) <= {0, 1, 2}


def test_missing_test_session(tmp_path, small_settings):
    config = SynthConfig(n_subjects=2, trials_per_session=[4, 4, 4, 4], n_channels=10, seed=3)
    synth_dataset(config, tmp_path / "four")
    with pytest.raises(PipelineError, match="test session absent") as info:
        run_pipeline(tmp_path / "four" / "manifest.json", small_settings, tmp_path / "out")
    assert info.value.stage == "load"
    assert isinstance(info.value.cause, SplitError)


def test_missing_manifest(tmp_path, small_settings):
    with pytest.raises(PipelineError) as info:
        run_pipeline(tmp_path / "nope.json", small_settings, tmp_path / "out")
    assert isinstance(info.value.cause, OSError)


def test_benchmark_table(small_settings, small_dataset, tmp_path):
    settings = small_settings.model_copy(update={"TUNE_BUDGET": 1})
    table = run_benchmark(small_dataset, settings, tmp_path, feature_sets=("statistical",))
    assert list(table.columns) == BENCHMARK_COLUMNS
    assert table[["feature_set", "model"]].values.tolist() == [["statistical", "svm"], ["statistical", "gbt"]]
    assert (tmp_path / "statistical-gbt" / "report.json").is_file()
    saved = pd.read_csv(tmp_path / "benchmark.csv")
    assert saved["n_test"].tolist() == table["n_test"].tolist()
