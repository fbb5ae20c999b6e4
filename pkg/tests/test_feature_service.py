import numpy as np
import pytest

from eegid.core.errors import FeatureError
from eegid.core.montage import builtin_montage
from eegid.services.feature_service import (
    WaveletConfig,
    apply_standardizer,
    dwt,
    extract_manifest_features,
    feature_names,
    fit_standardizer,
    idwt,
    load_feature_matrix,
    save_feature_matrix,
    statistical_features,
    wavelet_energy_features,
)
from eegid.services.session_io import load_manifest, read_session
from tests.helpers import make_features


def test_statistical_moments():
    features = statistical_features(np.array([[1.0, 2.0, 3.0, 4.0]]))
    mean, var, skewness, excess = features
    assert mean == pytest.approx(2.5)
    assert var == pytest.approx(1.25)
    assert skewness == pytest.approx(0.0, abs=1e-12)
    assert excess == pytest.approx(2.5625 / 1.5625 - 3.0)


def test_symmetric_signal_has_no_skew():
    assert statistical_features(np.array([[-1.0, 0.0, 1.0]]))[2] == pytest.approx(0.0, abs=1e-12)


def test_constant_channel_has_zero_higher_moments():
    features = statistical_features(np.array([[7.0] * 10, [0.0, 1.0] * 5]))
    assert np.all(np.isfinite(features))
    np.testing.assert_array_equal(features[[2, 4, 6]], [0.0, 0.0, 0.0])
    assert features[0] == 7.0


def test_statistical_blocks_are_moment_major():
    data = np.array([[0.0, 2.0], [10.0, 10.0]])
    np.testing.assert_allclose(statistical_features(data)[:4], [1.0, 10.0, 1.0, 0.0])


def test_statistical_needs_two_samples():
    with pytest.raises(FeatureError):
        statistical_features(np.ones((2, 1)))


def test_haar_single_level():
    config = WaveletConfig(family="haar", levels=1)
    detail, approx = dwt(np.array([1.0, 2.0, 3.0, 4.0]), config)
    np.testing.assert_allclose(np.abs(detail), [1 / np.sqrt(2)] * 2)
    np.testing.assert_allclose(approx, [3 / np.sqrt(2), 7 / np.sqrt(2)])
    np.testing.assert_allclose(wavelet_energy_features(np.array([[1.0, 2.0, 3.0, 4.0]]), config), [1.0, 29.0])


def test_band_ordering():
    config = WaveletConfig()
    bands = dwt(np.zeros(512), config)
    assert [band.size for band in bands] == [256, 128, 64, 32, 16, 16]
    assert config.band_names == ["D1", "D2", "D3", "D4", "D5", "A5"]


def test_perfect_reconstruction_and_energy(rng):
    config = WaveletConfig()
    for _ in range(100):
        x = rng.standard_normal(512)
        bands = dwt(x, config)
        np.testing.assert_allclose(idwt(bands, config), x, rtol=0, atol=1e-8)
        energy = sum(float(np.dot(band, band)) for band in bands)
        assert energy == pytest.approx(float(np.dot(x, x)), rel=1e-6)


def test_energy_of_zero_and_scaled_signals(rng):
    x = rng.standard_normal((3, 500))
    np.testing.assert_array_equal(wavelet_energy_features(np.zeros((3, 500))), 0.0)
    np.testing.assert_allclose(wavelet_energy_features(2.0 * x), 4.0 * wavelet_energy_features(x), rtol=1e-12)


def test_padding_to_level_multiple(rng):
    config = WaveletConfig()
    assert config.pad_length(500) == 12
    assert config.pad_length(512) == 0
    x = rng.standard_normal((1, 500))
    padded = np.pad(x, ((0, 0), (0, 12)))
    np.testing.assert_allclose(wavelet_energy_features(x), wavelet_energy_features(padded))


def test_dwt_rejects_short_or_ragged_signals():
    with pytest.raises(FeatureError):
        dwt(np.ones(16), WaveletConfig())
    with pytest.raises(FeatureError):
        dwt(np.ones(100), WaveletConfig())


def test_unknown_wavelet_family():
    with pytest.raises(ValueError):
        WaveletConfig(family="nope")


def test_feature_names():
    assert feature_names(["Fz", "Cz"], "statistical") == [
        "mean_Fz", "mean_Cz", "var_Fz", "var_Cz", "skew_Fz", "skew_Cz", "kurt_Fz", "kurt_Cz",
    ]
    assert len(feature_names(["Fz", "Cz"], "wavelet")) == 12
    assert feature_names(["Fz"], "wavelet")[0] == "energy_Fz_D1"
    assert len(feature_names(["Fz", "Cz"], "both")) == 20
    with pytest.raises(FeatureError):
        feature_names(["Fz"], "spectral")


def test_standardizer():
    train = make_features([[1.0, 5.0], [3.0, 5.0]], [0, 1], [1, 1])
    standardizer = fit_standardizer(train)
    assert standardizer.dropped_indices == [1]
    assert standardizer.output_names == ["x0"]
    scaled = apply_standardizer(standardizer, train)
    np.testing.assert_allclose(scaled.values, [[-1.0], [1.0]])
    assert scaled.feature_names == ["x0"]


def test_standardizer_rejects_bad_input():
    with pytest.raises(FeatureError):
        fit_standardizer(make_features([[1.0, 2.0]], [0], [1]))
    with pytest.raises(FeatureError, match="zero variance"):
        fit_standardizer(make_features([[1.0], [1.0]], [0, 1], [1, 1]))
    standardizer = fit_standardizer(make_features([[1.0, 2.0], [3.0, 1.0]], [0, 1], [1, 1]))
    with pytest.raises(FeatureError):
        apply_standardizer(standardizer, make_features([[1.0]], [0], [1]))


def test_feature_csv_keeps_values(tmp_path, rng):
    matrix = make_features(rng.standard_normal((6, 3)), [0, 0, 1, 1, 2, 2], [1, 2, 1, 2, 1, 2])
    path = save_feature_matrix(matrix, tmp_path / "features.csv", fit_standardizer(matrix))
    loaded = load_feature_matrix(path)
    np.testing.assert_array_equal(loaded.values, matrix.values)
    np.testing.assert_array_equal(loaded.subject_labels, matrix.subject_labels)
    np.testing.assert_array_equal(loaded.session_indices, matrix.session_indices)
    assert loaded.feature_names == matrix.feature_names
    assert loaded.subject_ids == ["Sub-01", "Sub-02", "Sub-03"]


def test_feature_csv_without_sidecar(tmp_path):
    matrix = make_features([[1.0], [2.0]], [0, 1], [1, 1])
    path = save_feature_matrix(matrix, tmp_path / "features.csv")
    path.with_suffix(".json").unlink()
    loaded = load_feature_matrix(path)
    assert loaded.feature_names == ["f_0"]
    assert loaded.subject_ids == ["class-0", "class-1"]


def test_extract_manifest_features(small_dataset):
    manifest = load_manifest(small_dataset)
    matrix = extract_manifest_features(manifest, small_dataset.parent, "both", builtin_montage())
    expected_rows = 0
    for subject in manifest.subjects:
        for entry in subject.sessions:
            expected_rows += sum(not t.bad for t in read_session(small_dataset.parent / entry.path).trials)
    assert matrix.n_rows == expected_rows
    assert matrix.n_features == 10 * 4 + 10 * 6
    assert matrix.subject_ids == ["Sub-01", "Sub-02", "Sub-03"]
    assert set(matrix.session_indices.tolist()) == {1, 2, 3, 4, 5}
    assert matrix.provenance["wavelet_pad_samples"] == 12


def test_features_follow_channel_order(rng):
    data = rng.standard_normal((6, 500))
    order = rng.permutation(6)
    statistical = statistical_features(data).reshape(4, 6)
    np.testing.assert_allclose(statistical_features(data[order]).reshape(4, 6), statistical[:, order], atol=1e-12)
    energies = wavelet_energy_features(data).reshape(6, -1)
    np.testing.assert_allclose(wavelet_energy_features(data[order]).reshape(6, -1), energies[order], rtol=1e-12)


def test_normal_draw_has_gaussian_shape(rng):
    _, var, skewness, excess = statistical_features(rng.standard_normal((1, 100_000)))
    assert var == pytest.approx(1.0, abs=0.02)
    assert skewness == pytest.approx(0.0, abs=0.05)
    assert excess == pytest.approx(0.0, abs=0.05)
