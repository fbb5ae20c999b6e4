import numpy as np
import pytest
from scipy.signal import periodogram

from eegid.core.errors import EpochError, ManifestError
from eegid.core.models import DatasetManifest, SessionEntry, SubjectEntry, Trial
from eegid.core.montage import builtin_montage
from eegid.core.protocol import WORD_VOCABULARY
from eegid.services.channel_service import BadChannelConfig, find_bad_by_correlation
from eegid.services.preprocess_service import (
    PreprocessingConfig,
    epoch_trials,
    filter_session,
    preprocess_dataset,
    preprocess_session,
)
from eegid.services.session_io import load_manifest, read_provenance, read_session, write_session
from eegid.services.synth_service import SynthConfig, inject_bad_channel, synth_session
from tests.helpers import make_session


def test_filter_removes_line_noise(rng):
    session = make_session(n_channels=3, n_trials=2, n_samples=1000)
    t = np.arange(1000) / 250.0
    noisy = session.replace_trials([
        trial.with_samples(trial.samples + 10.0 * np.sin(2 * np.pi * 50.0 * t)) for trial in session.trials
    ])
    filtered, notch, _ = filter_session(noisy, PreprocessingConfig())
    assert notch.design["notch_frequencies_hz"] == [50.0, 100.0]
    freqs, before = periodogram(noisy.trials[0].samples, fs=250.0, axis=-1)
    _, after = periodogram(filtered.trials[0].samples, fs=250.0, axis=-1)
    k = int(np.argmin(np.abs(freqs - 50.0)))
    assert np.all(10.0 * np.log10(before[:, k] / after[:, k]) >= 30.0)


def test_clean_session_needs_no_interpolation(small_synth_config):
    session = synth_session(small_synth_config, 0, 1)
    clean = preprocess_session(session, builtin_montage())
    assert clean.provenance.interpolated_channels == []
    assert clean.provenance.reference == "average"
    assert clean.provenance.n_trials == session.n_trials


def test_injected_noise_channel_is_repaired():
    config = SynthConfig(n_subjects=4, trials_per_session=[8, 8, 8, 6, 6], n_channels=10, seed=11)
    montage = builtin_montage()
    detected = 0
    for subject in range(config.n_subjects):
        for index in range(1, 6):
            session = inject_bad_channel(synth_session(config, subject, index), 7, seed=subject * 10 + index)
            provenance = preprocess_session(session, montage).provenance
            assert provenance.bad_channels in ([], [session.meta.channel_names[7]])
            detected += provenance.bad_channels == [session.meta.channel_names[7]]
    assert detected == 20


def test_output_is_average_referenced(small_synth_config):
    clean = preprocess_session(synth_session(small_synth_config, 1, 4), builtin_montage())
    for trial in clean.trials:
        np.testing.assert_allclose(trial.samples.mean(axis=0), 0.0, atol=1e-9)


def test_epoch_shapes(small_synth_config):
    session = synth_session(small_synth_config, 0, 2)
    epochs = epoch_trials(session)
    assert len(epochs) == session.n_trials
    assert all(epoch.data.shape == (10, 500) for epoch in epochs)
    assert [epoch.trial_index for epoch in epochs] == list(range(session.n_trials))
    assert all(epoch.data.shape == (10, 250) for epoch in epoch_trials(session, window_s=1.0))


def test_epoch_starts_at_imagery_onset():
    session = make_session(n_channels=2, n_trials=1, n_samples=1000)
    epoch = epoch_trials(session, window_s=1.0, offset_s=0.5)[0]
    np.testing.assert_array_equal(epoch.data, session.trials[0].samples[:, 375:625])


def test_epoch_past_trial_end(small_synth_config):
    session = synth_session(small_synth_config, 0, 2)
    with pytest.raises(EpochError, match="trial too short"):
        epoch_trials(session, window_s=2.0, offset_s=1.5)


def test_epoch_window_must_be_positive():
    with pytest.raises(EpochError):
        epoch_trials(make_session(n_samples=1000), window_s=0.0)


def test_preprocess_dataset(small_dataset, tmp_path):
    source = load_manifest(small_dataset)
    processed = preprocess_dataset(source, small_dataset.parent, tmp_path, builtin_montage())
    assert processed.preprocessed
    assert load_manifest(tmp_path / "manifest.json").preprocessed

    entry = processed.subjects[1].sessions[0]
    original = read_session(small_dataset.parent / source.subjects[1].sessions[0].path)
    assert entry.n_trials == sum(not trial.bad for trial in original.trials)
    assert read_session(tmp_path / entry.path).n_trials == entry.n_trials
    assert read_provenance(tmp_path / entry.path).subject_id == "Sub-02"

    with pytest.raises(ManifestError, match="already preprocessed"):
        preprocess_dataset(processed, tmp_path, tmp_path / "again", builtin_montage())


def test_all_bad_session_becomes_empty(tmp_path):
    session = make_session(n_channels=4, n_trials=3, n_samples=1000)
    aborted = session.replace_trials([
        Trial(label_id=trial.label_id, bad=True, samples=trial.samples) for trial in session.trials
    ])
    write_session(aborted, tmp_path / "raw" / "Sub-01" / "s1.ceeg")
    manifest = DatasetManifest(
        subjects=[SubjectEntry(id="Sub-01", sessions=[SessionEntry(index=1, path="Sub-01/s1.ceeg", n_trials=3)])],
        labels=list(WORD_VOCABULARY),
        sampling_rate_hz=250.0,
    )
    processed = preprocess_dataset(manifest, tmp_path / "raw", tmp_path / "clean", builtin_montage())
    assert processed.subjects[0].sessions[0].n_trials == 0
    assert read_session(tmp_path / "clean" / "Sub-01" / "s1.ceeg").n_trials == 0
    provenance = read_provenance(tmp_path / "clean" / "Sub-01" / "s1.ceeg")
    assert provenance.n_trials == 0
    assert provenance.n_bad_trials_dropped == 3


def test_sidecar_counts_dropped_bad_trials(small_synth_config, tmp_path):
    session = synth_session(small_synth_config, 0, 1)
    marked = session.replace_trials([
        Trial(label_id=trial.label_id, bad=k in (1, 5), samples=trial.samples) for k, trial in enumerate(session.trials)
    ])
    write_session(marked, tmp_path / "raw" / "Sub-01" / "s1.ceeg")
    manifest = DatasetManifest(
        subjects=[SubjectEntry(id="Sub-01", sessions=[
            SessionEntry(index=1, path="Sub-01/s1.ceeg", n_trials=marked.n_trials)])],
        labels=list(WORD_VOCABULARY),
        sampling_rate_hz=250.0,
    )
    preprocess_dataset(manifest, tmp_path / "raw", tmp_path / "clean", builtin_montage())
    provenance = read_provenance(tmp_path / "clean" / "Sub-01" / "s1.ceeg")
    assert provenance.n_bad_trials_dropped == 2
    assert provenance.n_trials == marked.n_trials - 2


def test_noisy_channel_detection_over_seeded_sessions():
    config = SynthConfig(n_subjects=4, trials_per_session=[6, 6, 6, 6, 6], seed=42)
    hits = false_positives = 0
    for subject in range(config.n_subjects):
        for index in range(1, 6):
            channel = (subject * 5 + index) % config.n_channels
            session = inject_bad_channel(synth_session(config, subject, index), channel, seed=subject * 10 + index)
            filtered, _, _ = filter_session(session, PreprocessingConfig())
            found = find_bad_by_correlation(filtered, BadChannelConfig())
            hits += channel in found
            false_positives += len(found - {channel})
    assert (hits, false_positives) == (20, 0)
