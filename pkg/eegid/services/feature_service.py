# ============================================================================
# FILE: eegid/services/feature_service.py
# ============================================================================
"""
Hand-crafted features: per-channel moments and wavelet band energies.
"""

import json
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import pywt
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.stats import kurtosis, skew

from eegid.core.errors import FeatureError
from eegid.core.models import DatasetManifest, Epoch, FeatureMatrix, Montage
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
FEATURE_SETS = ("statistical", "wavelet", "both")
META_COLUMNS = ["subject", "session", "trial", "label"]


class WaveletConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str = "db4"
    levels: int = Field(5, ge=1)
    extension: str = "periodization"

    @field_validator("family")
    @classmethod
    def _known_family(cls, value: str) -> str:
        if value not in pywt.wavelist(kind="discrete"):
            raise ValueError(f"unknown discrete wavelet {value!r}")
        return value

    @property
    def band_names(self) -> List[str]:
        return [f"D{level}" for level in range(1, self.levels + 1)] + [f"A{self.levels}"]

    def pad_length(self, n_samples: int) -> int:
        """Zeros appended so the length divides 2**levels"""
        return (-n_samples) % (2 ** self.levels)


def _zero_variance(variance: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return variance <= (1e-12 * np.maximum(np.abs(mean), 1.0)) ** 2


def statistical_features(epoch: Union[Epoch, np.ndarray]) -> np.ndarray:
    """Means, population variances, skewnesses and excess kurtoses, each block in channel order"""
    data = np.asarray(epoch.data if isinstance(epoch, Epoch) else epoch, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise FeatureError("empty epoch")
    if data.shape[1] < 2:
        raise FeatureError(f"statistical features need at least 2 samples per channel, got {data.shape[1]}")

    mean = data.mean(axis=1)
    variance = data.var(axis=1)
    flat = _zero_variance(variance, mean)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        skewness = skew(data, axis=1, bias=True)
        excess = kurtosis(data, axis=1, fisher=True, bias=True)
    skewness = np.where(flat, 0.0, skewness)
    excess = np.where(flat, 0.0, excess)
    variance = np.where(flat, 0.0, variance)
    return np.concatenate([mean, variance, skewness, excess])


def dwt(signal: np.ndarray, config: WaveletConfig) -> List[np.ndarray]:
    """Orthonormal periodized pyramid ordered D1..D_L, A_L"""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise FeatureError("dwt expects a 1-D signal")
    block = 2 ** config.levels
    if x.size < block:
        raise FeatureError(f"signal of {x.size} samples is too short for {config.levels} levels")
    if x.size % block:
        raise FeatureError(f"signal length {x.size} is not a multiple of 2**{config.levels}")
    with warnings.catch_warnings():
        # Deep levels on short signals only trigger pywt's boundary-effect warning
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(x, config.family, mode=config.extension, level=config.levels)
    return list(reversed(coeffs[1:])) + [coeffs[0]]


def idwt(coefficients: Sequence[np.ndarray], config: WaveletConfig) -> np.ndarray:
    """Inverse of dwt for the same configuration"""
    if len(coefficients) != config.levels + 1:
        raise FeatureError(f"expected {config.levels + 1} coefficient bands, got {len(coefficients)}")
    details = list(coefficients[:-1])
    ordered = [np.asarray(coefficients[-1])] + [np.asarray(d) for d in reversed(details)]
    return pywt.waverec(ordered, config.family, mode=config.extension)


def wavelet_energy_features(epoch: Union[Epoch, np.ndarray], config: WaveletConfig = WaveletConfig()) -> np.ndarray:
    """Sum of squared coefficients per band, channel-major then D1..D_L, A_L"""
    data = np.asarray(epoch.data if isinstance(epoch, Epoch) else epoch, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise FeatureError("empty epoch")
    pad = config.pad_length(data.shape[1])
    if pad:
        data = np.pad(data, ((0, 0), (0, pad)))

    energies = np.empty((data.shape[0], config.levels + 1))
    for ch in range(data.shape[0]):
        bands = dwt(data[ch], config)
        energies[ch] = [float(np.dot(band, band)) for band in bands]
    return energies.reshape(-1)


def feature_names(channel_names: Sequence[str], feature_set: str, config: WaveletConfig = WaveletConfig()) -> List[str]:
    _check_feature_set(feature_set)
    names: List[str] = []
    if feature_set in ("statistical", "both"):
        for moment in ("mean", "var", "skew", "kurt"):
            names.extend(f"{moment}_{ch}" for ch in channel_names)
    if feature_set in ("wavelet", "both"):
        for ch in channel_names:
            names.extend(f"energy_{ch}_{band}" for band in config.band_names)
    return names


def _check_feature_set(feature_set: str) -> None:
    if feature_set not in FEATURE_SETS:
        raise FeatureError(f"unknown feature set {feature_set!r}; expected one of {', '.join(FEATURE_SETS)}")


def epoch_features(epoch: Epoch, feature_set: str, config: WaveletConfig = WaveletConfig()) -> np.ndarray:
    _check_feature_set(feature_set)
    parts = []
    if feature_set in ("statistical", "both"):
        parts.append(statistical_features(epoch))
    if feature_set in ("wavelet", "both"):
        parts.append(wavelet_energy_features(epoch, config))
    row = np.concatenate(parts)
    if not np.all(np.isfinite(row)):
        raise FeatureError(f"non-finite feature in {epoch.subject_id} session {epoch.session_index} trial {epoch.trial_index}")
    return row


class FeatureTableBuilder:
    """Accumulates feature rows session by session; subject classes follow registration order"""

    def __init__(self, feature_set: str, config: WaveletConfig = WaveletConfig()):
        _check_feature_set(feature_set)
        self.feature_set = feature_set
        self.config = config
        self.subject_ids: List[str] = []
        self.channel_names: Optional[List[str]] = None
        self._rows: List[np.ndarray] = []
        self._meta: List[List[int]] = []

    def register_subject(self, subject_id: str) -> int:
        if subject_id not in self.subject_ids:
            self.subject_ids.append(subject_id)
        return self.subject_ids.index(subject_id)

    def add_epochs(self, epochs: Sequence[Epoch], channel_names: Sequence[str]) -> None:
        if self.channel_names is None:
            self.channel_names = list(channel_names)
        elif list(channel_names) != self.channel_names:
            raise FeatureError("all sessions must share the same channel list")
        for epoch in epochs:
            class_id = self.register_subject(epoch.subject_id)
            self._rows.append(epoch_features(epoch, self.feature_set, self.config))
            self._meta.append([class_id, epoch.session_index, epoch.trial_index, epoch.label_id])

    def build(self, provenance: Optional[Dict[str, Any]] = None) -> FeatureMatrix:
        if not self._rows:
            raise FeatureError("no epochs to build a feature matrix from")
        meta = np.asarray(self._meta, dtype=np.int64)
        return FeatureMatrix(
            values=np.vstack(self._rows),
            subject_labels=meta[:, 0],
            session_indices=meta[:, 1],
            trial_indices=meta[:, 2],
            word_labels=meta[:, 3],
            feature_names=feature_names(self.channel_names or [], self.feature_set, self.config),
            subject_ids=list(self.subject_ids),
            feature_set=self.feature_set,
            provenance=dict(provenance or {}),
        )


def extract_manifest_features(
    manifest: DatasetManifest,
    base_dir: PathLike,
    feature_set: str,
    montage: Montage,
    preprocessing=None,
    wavelet: WaveletConfig = WaveletConfig(),
    window_s: float = 2.0,
    offset_s: float = 0.0,
) -> FeatureMatrix:
    """
    Stream every session of a dataset through bad-trial removal, preprocessing
    (skipped for already preprocessed manifests), epoching and feature extraction.
    """
    from eegid.services.preprocess_service import epoch_trials, preprocess_session
    from eegid.services.session_io import drop_bad_trials, iter_sessions

    builder = FeatureTableBuilder(feature_set, wavelet)
    for subject in manifest.subject_ids():
        builder.register_subject(subject)

    dropped: Dict[str, int] = {}
    interpolated: Dict[str, List[str]] = {}
    for session in iter_sessions(manifest, base_dir):
        key = f"{session.subject_id}/ses-{session.session_index}"
        clean = drop_bad_trials(session)
        dropped[key] = session.n_trials - clean.n_trials
        if not clean.trials:
            logger.warning(f"{key}: every trial is marked bad, session skipped")
            continue
        if not manifest.preprocessed:
            clean = preprocess_session(clean, montage, preprocessing)
            interpolated[key] = list(clean.provenance.interpolated_channels)
        builder.add_epochs(epoch_trials(clean, window_s, offset_s), clean.meta.channel_names)
        logger.debug(f"{key}: {clean.n_trials} epochs")

    provenance = {
        "feature_set": feature_set,
        "wavelet": wavelet.model_dump(),
        "wavelet_pad_samples": wavelet.pad_length(int(round(window_s * manifest.sampling_rate_hz))),
        "epoch": {"window_s": window_s, "offset_s": offset_s},
        "preprocessed_input": manifest.preprocessed,
        "dropped_bad_trials": dropped,
        "interpolated_channels": {k: v for k, v in interpolated.items() if v},
    }
    matrix = builder.build(provenance)
    logger.info(f"Extracted {feature_set} features: {matrix.n_rows} rows x {matrix.n_features} columns "
                f"({sum(dropped.values())} bad trials dropped)")
    return matrix


class Standardizer(BaseModel):
    """Per-column z-score fitted on training rows; zero-variance columns are dropped"""
    model_config = ConfigDict(frozen=True)

    mean: List[float]
    std: List[float]
    keep_mask: List[bool] = Field(..., description="Columns of the input that survive")
    feature_names: List[str] = Field(default_factory=list, description="Input column names")

    @property
    def dropped_indices(self) -> List[int]:
        return [i for i, keep in enumerate(self.keep_mask) if not keep]

    @property
    def output_names(self) -> List[str]:
        return [name for name, keep in zip(self.feature_names, self.keep_mask) if keep]


def fit_standardizer(train: FeatureMatrix) -> Standardizer:
    if train.n_rows < 2:
        raise FeatureError(f"standardizer needs at least 2 training rows, got {train.n_rows}")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    keep = std > 1e-12 * np.maximum(np.abs(mean), 1.0)
    if not np.any(keep):
        raise FeatureError("degenerate training matrix: every feature has zero variance")
    if not np.all(keep):
        logger.debug(f"Standardizer drops {int(np.sum(~keep))} zero-variance columns")
    return Standardizer(
        mean=mean[keep].tolist(),
        std=std[keep].tolist(),
        keep_mask=keep.tolist(),
        feature_names=list(train.feature_names),
    )


def apply_standardizer(standardizer: Standardizer, matrix: FeatureMatrix) -> FeatureMatrix:
    if matrix.n_features != len(standardizer.keep_mask):
        raise FeatureError(
            f"feature matrix has {matrix.n_features} columns, standardizer expects {len(standardizer.keep_mask)}"
        )
    keep = np.asarray(standardizer.keep_mask, dtype=bool)
    values = (matrix.values[:, keep] - np.asarray(standardizer.mean)) / np.asarray(standardizer.std)
    names = [name for name, k in zip(matrix.feature_names, keep) if k]
    return matrix.model_copy_with(values=values.reshape(matrix.n_rows, int(keep.sum())), feature_names=names)


def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_feature_matrix(matrix: FeatureMatrix, path: PathLike, standardizer: Optional[Standardizer] = None) -> Path:
    """CSV (subject,session,trial,label,f_0..) plus a JSON sidecar with names and provenance"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    columns = [f"f_{i}" for i in range(matrix.n_features)]
    frame = pd.DataFrame(matrix.values, columns=columns)
    frame.insert(0, "label", matrix.word_labels)
    frame.insert(0, "trial", matrix.trial_indices)
    frame.insert(0, "session", matrix.session_indices)
    frame.insert(0, "subject", matrix.subject_labels)
    frame.to_csv(target, index=False, float_format="%.17g", lineterminator="\n")

    sidecar = {
        "feature_names": matrix.feature_names,
        "subject_ids": matrix.subject_ids,
        "feature_set": matrix.feature_set,
        "provenance": matrix.provenance,
        "standardizer": standardizer.model_dump() if standardizer is not None else None,
    }
    sidecar_path(target).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_feature_matrix(path: PathLike) -> FeatureMatrix:
    source = Path(path)
    frame = pd.read_csv(source, float_precision="round_trip")
    missing = [c for c in META_COLUMNS if c not in frame.columns]
    if missing:
        raise FeatureError(f"feature CSV {source} lacks columns {missing}")

    meta: Dict[str, Any] = {}
    if sidecar_path(source).is_file():
        meta = json.loads(sidecar_path(source).read_text(encoding="utf-8"))
    value_columns = [c for c in frame.columns if c not in META_COLUMNS]
    names = meta.get("feature_names") or value_columns
    if len(names) != len(value_columns):
        raise FeatureError(f"sidecar lists {len(names)} feature names, CSV has {len(value_columns)} columns")

    n_subjects = int(frame["subject"].max()) + 1 if len(frame) else 0
    return FeatureMatrix(
        values=frame[value_columns].to_numpy(dtype=np.float64).reshape(len(frame), len(value_columns)),
        subject_labels=frame["subject"].to_numpy(dtype=np.int64),
        session_indices=frame["session"].to_numpy(dtype=np.int64),
        trial_indices=frame["trial"].to_numpy(dtype=np.int64),
        word_labels=frame["label"].to_numpy(dtype=np.int64),
        feature_names=list(names),
        subject_ids=meta.get("subject_ids") or [f"class-{i}" for i in range(n_subjects)],
        feature_set=meta.get("feature_set", "wavelet"),
        provenance=meta.get("provenance") or {},
    )
