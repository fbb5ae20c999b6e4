import numpy as np
import pytest
from scipy.signal import periodogram

from eegid.core.errors import ChannelError, SynthesisError
from eegid.core.models import Trial
from eegid.services import synth_service
from eegid.services.session_io import load_manifest, read_session
from eegid.services.synth_service import (
    MAX_POLE_MAGNITUDE,
    SeparabilityReport,
    SynthConfig,
    inject_bad_channel,
    inject_line_noise,
    make_signature,
    separability_report,
    synth_dataset,
    synth_session,
)


def test_default_config_trial_budget():
    config = SynthConfig()
    assert config.total_trials == 4400
    assert config.n_subjects * len(config.trials_per_session) == 55


def test_same_seed_gives_identical_files(tmp_path, small_synth_config):
    synth_dataset(small_synth_config, tmp_path / "a")
    synth_dataset(small_synth_config, tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 3 * 5 + 1
    for relative in files:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()


def test_different_seed_changes_data(small_synth_config):
    a = synth_session(small_synth_config, 0, 1)
    b = synth_session(small_synth_config.model_copy(update={"seed": 8}), 0, 1)
    assert not np.array_equal(a.trials[0].samples[:, :100], b.trials[0].samples[:, :100])


def test_trial_lengths_follow_protocol(small_synth_config):
    session = synth_session(small_synth_config, 1, 2)
    assert session.n_trials == 8
    for trial in session.trials:
        assert 1000 <= trial.n_samples <= 1250
        assert 0 <= trial.label_id < 5


def test_session_alone_matches_dataset(small_dataset, small_synth_config):
    manifest = load_manifest(small_dataset)
    entry = manifest.subjects[2].sessions[3]
    stored = read_session(small_dataset.parent / entry.path, "Sub-03", 4)
    regenerated = synth_session(small_synth_config, 2, 4)
    assert stored.trials == regenerated.trials


def test_manifest_carries_participants(small_dataset):
    manifest = load_manifest(small_dataset)
    first = manifest.subjects[0]
    assert (first.id, first.gender, first.age) == ("Sub-01", "male", 23)
    assert [label.english_equivalent for label in manifest.labels] == ["Left", "Right", "Forward", "Backward", "Stop"]


def test_line_noise_zero_amplitude_is_identity(rng):
    trial = Trial(label_id=0, samples=rng.standard_normal((3, 500)))
    assert inject_line_noise(trial, 50.0, 0.0) is trial


def test_line_noise_raises_psd_at_line_frequency(rng):
    trial = Trial(label_id=0, samples=rng.standard_normal((2, 1000)))
    noisy = inject_line_noise(trial, 50.0, 10.0, fs=250.0)
    freqs, before = periodogram(trial.samples, fs=250.0, axis=-1)
    _, after = periodogram(noisy.samples, fs=250.0, axis=-1)
    k = int(np.argmin(np.abs(freqs - 50.0)))
    assert np.all(10.0 * np.log10(after[:, k] / before[:, k]) >= 20.0)


def test_line_noise_above_nyquist(rng):
    trial = Trial(label_id=0, samples=rng.standard_normal((2, 100)))
    with pytest.raises(SynthesisError):
        inject_line_noise(trial, 130.0, 10.0, fs=250.0)


def test_bad_channel_leaves_others_untouched(small_synth_config):
    session = synth_session(small_synth_config, 0, 1)
    broken = inject_bad_channel(session, 3, mode="white-noise", seed=1)
    for before, after in zip(session.trials, broken.trials):
        keep = [ch for ch in range(session.meta.n_channels) if ch != 3]
        np.testing.assert_array_equal(before.samples[keep], after.samples[keep])
        assert not np.array_equal(before.samples[3], after.samples[3])


def test_flatline_channel_has_zero_variance(small_synth_config):
    session = synth_session(small_synth_config, 0, 1)
    flat = inject_bad_channel(session, 0, mode="flatline")
    assert all(np.var(trial.samples[0]) == 0.0 for trial in flat.trials)


def test_bad_channel_index_out_of_range(small_synth_config):
    session = synth_session(small_synth_config, 0, 1)
    with pytest.raises(ChannelError):
        inject_bad_channel(session, 10)


def test_signatures_are_stable_processes(small_synth_config):
    for subject in range(small_synth_config.n_subjects):
        assert make_signature(small_synth_config, subject).max_pole_magnitude(250.0) < MAX_POLE_MAGNITUDE


def test_separability_report(small_synth_config):
    report = separability_report(small_synth_config)
    assert report.max_pole_magnitude < MAX_POLE_MAGNITUDE
    assert report.ratio >= 3.0
    assert report.passed


@pytest.mark.parametrize("seed", [42, 1, 2, 3])
def test_default_subjects_are_separable(seed):
    assert separability_report(SynthConfig(seed=seed)).passed


def test_inseparable_config_writes_nothing(small_synth_config, tmp_path, monkeypatch):
    failing = SeparabilityReport(min_pairwise_distance=1.0, max_within_spread=1.0, ratio=1.0, max_pole_magnitude=0.9)
    monkeypatch.setattr(synth_service, "separability_report", lambda config: failing)
    with pytest.raises(SynthesisError, match="not separable"):
        synth_dataset(small_synth_config, tmp_path / "out")
    assert not (tmp_path / "out").exists()
