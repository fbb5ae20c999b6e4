from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from eegid.core.errors import ChannelError, InvariantViolationError


N_LABELS = 5
MAX_SESSIONS = 5


def _frozen_array(value: Any, ndim: int, dtype=np.float64) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {array.shape}")
    array.setflags(write=False)
    return array


class RecordingMeta(BaseModel):
    """Acquisition parameters shared by every trial of a session"""
    model_config = ConfigDict(frozen=True)

    sampling_rate_hz: float = Field(..., gt=0, description="Sampling rate in Hz")
    channel_names: List[str] = Field(..., description="Ordered channel labels")
    n_channels: int = Field(..., gt=0, description="Number of channels")

    @model_validator(mode="before")
    @classmethod
    def _fill_channel_count(cls, data: Any) -> Any:
        if isinstance(data, dict) and "n_channels" not in data and "channel_names" in data:
            data = {**data, "n_channels": len(data["channel_names"])}
        return data

    @model_validator(mode="after")
    def _check_names(self) -> "RecordingMeta":
        if self.n_channels != len(self.channel_names):
            raise ValueError("n_channels must equal the number of channel names")
        if any(not name for name in self.channel_names):
            raise ValueError("channel names must be non-empty")
        if len(set(self.channel_names)) != len(self.channel_names):
            raise ValueError("channel names must be unique")
        return self


class Trial(BaseModel):
    """One imagery trial: label, abort flag and a channels x samples matrix in microvolts"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    label_id: int = Field(..., ge=0, lt=N_LABELS, description="Index into the word vocabulary")
    bad: bool = Field(False, description="Subject pressed the abort key")
    samples: np.ndarray = Field(..., description="n_channels x n_samples amplitudes (uV)")

    @field_validator("samples", mode="before")
    @classmethod
    def _coerce_samples(cls, value: Any) -> np.ndarray:
        array = _frozen_array(value, ndim=2)
        if array.shape[1] < 1:
            raise ValueError("a trial needs at least one sample")
        if not np.all(np.isfinite(array)):
            raise ValueError("trial amplitudes must be finite")
        return array

    @property
    def n_channels(self) -> int:
        return int(self.samples.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])

    def with_samples(self, samples: np.ndarray) -> "Trial":
        return Trial(label_id=self.label_id, bad=self.bad, samples=samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trial):
            return NotImplemented
        return (
            self.label_id == other.label_id
            and self.bad == other.bad
            and self.samples.shape == other.samples.shape
            and bool(np.array_equal(self.samples, other.samples))
        )


class PreprocessingProvenance(BaseModel):
    """What the preprocessing chain did to one session (sidecar JSON)"""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    session_index: int
    notch_frequencies_hz: List[float] = Field(default_factory=list)
    notch_taps: int = 0
    bandpass_taps: int = 0
    bad_channels: List[str] = Field(default_factory=list, description="Channels flagged by correlation")
    interpolated_channels: List[str] = Field(default_factory=list)
    reference: str = "average"
    n_trials: int = 0
    n_bad_trials_dropped: int = 0


class Session(BaseModel):
    """All trials recorded for one subject in one sitting"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_id: str = Field(..., min_length=1)
    session_index: int = Field(..., ge=1, le=MAX_SESSIONS)
    meta: RecordingMeta
    trials: List[Trial] = Field(default_factory=list)
    provenance: Optional[PreprocessingProvenance] = Field(None, description="Not stored in CEEG files")

    @model_validator(mode="after")
    def _check_trials(self) -> "Session":
        for idx, trial in enumerate(self.trials):
            if trial.n_channels != self.meta.n_channels:
                raise ValueError(
                    f"trial {idx} has {trial.n_channels} channels, meta declares {self.meta.n_channels}"
                )
        return self

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    def replace_trials(self, trials: Sequence[Trial], provenance: Optional[PreprocessingProvenance] = None) -> "Session":
        return Session(
            subject_id=self.subject_id,
            session_index=self.session_index,
            meta=self.meta,
            trials=list(trials),
            provenance=provenance if provenance is not None else self.provenance,
        )


def validate_session_invariants(session: Session) -> None:
    """Re-check invariants on a session that may have bypassed model validation"""
    meta = session.meta
    if meta.n_channels < 1 or meta.n_channels != len(meta.channel_names):
        raise InvariantViolationError("invariant violation: channel count must be positive and match names")
    if len(set(meta.channel_names)) != len(meta.channel_names) or any(not n for n in meta.channel_names):
        raise InvariantViolationError("invariant violation: channel names must be unique and non-empty")
    if not np.isfinite(meta.sampling_rate_hz) or meta.sampling_rate_hz <= 0:
        raise InvariantViolationError("invariant violation: sampling rate must be positive")
    if not 1 <= session.session_index <= MAX_SESSIONS:
        raise InvariantViolationError(f"invariant violation: session index {session.session_index} outside 1..{MAX_SESSIONS}")
    for idx, trial in enumerate(session.trials):
        samples = np.asarray(trial.samples)
        if samples.ndim != 2 or samples.shape[0] != meta.n_channels or samples.shape[1] < 1:
            raise InvariantViolationError(f"invariant violation: trial {idx} has shape {samples.shape}")
        if not 0 <= trial.label_id < N_LABELS:
            raise InvariantViolationError(f"invariant violation: trial {idx} label {trial.label_id}")
        if not np.all(np.isfinite(samples)):
            raise InvariantViolationError(f"invariant violation: trial {idx} has non-finite amplitudes")


class SessionEntry(BaseModel):
    index: int = Field(..., ge=1, le=MAX_SESSIONS)
    path: str = Field(..., min_length=1)
    n_trials: int = Field(..., ge=0)


class SubjectEntry(BaseModel):
    id: str = Field(..., min_length=1)
    gender: Optional[str] = None
    age: Optional[int] = None
    sessions: List[SessionEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_session_indices(self) -> "SubjectEntry":
        indices = [entry.index for entry in self.sessions]
        if len(set(indices)) != len(indices):
            raise ValueError(f"duplicate session index for subject {self.id}")
        if sorted(indices) != list(range(1, len(indices) + 1)):
            raise ValueError(f"session indices of subject {self.id} must be a prefix of 1..{MAX_SESSIONS}")
        return self


class LabelEntry(BaseModel):
    id: int = Field(..., ge=0, lt=N_LABELS)
    word: str
    english_equivalent: str


class DatasetManifest(BaseModel):
    """Index of every session file in a dataset"""

    subjects: List[SubjectEntry]
    labels: List[LabelEntry]
    sampling_rate_hz: float = Field(..., gt=0)
    preprocessed: bool = Field(False, description="Sessions already went through preprocess_session")

    @model_validator(mode="after")
    def _check_vocabulary(self) -> "DatasetManifest":
        if len(self.labels) != N_LABELS:
            raise ValueError(f"label vocabulary must have {N_LABELS} entries")
        if sorted(label.id for label in self.labels) != list(range(N_LABELS)):
            raise ValueError("label ids must be 0..4")
        ids = [subject.id for subject in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subject id")
        return self

    @property
    def n_sessions(self) -> int:
        return sum(len(subject.sessions) for subject in self.subjects)

    def subject_ids(self) -> List[str]:
        return [subject.id for subject in self.subjects]


class Montage(BaseModel):
    """Unit-sphere electrode positions keyed by channel name"""
    model_config = ConfigDict(frozen=True)

    positions: Dict[str, Tuple[float, float, float]]

    @model_validator(mode="after")
    def _check_unit_norm(self) -> "Montage":
        for name, xyz in self.positions.items():
            norm = float(np.linalg.norm(xyz))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"position of {name} is not on the unit sphere (norm {norm})")
        return self

    @property
    def channel_names(self) -> List[str]:
        return list(self.positions)

    def coordinates(self, names: Sequence[str]) -> np.ndarray:
        missing = [name for name in names if name not in self.positions]
        if missing:
            raise ChannelError(f"channels missing from montage: {', '.join(missing)}")
        return np.array([self.positions[name] for name in names], dtype=np.float64)


class Epoch(BaseModel):
    """Fixed-length imagery window of one trial"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_id: str
    session_index: int
    trial_index: int
    label_id: int
    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, ndim=2)


class FeatureMatrix(BaseModel):
    """Trials x features table with subject labels and session provenance"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    subject_labels: np.ndarray
    session_indices: np.ndarray
    trial_indices: np.ndarray
    word_labels: np.ndarray
    feature_names: List[str]
    subject_ids: List[str] = Field(default_factory=list, description="Class id -> subject id")
    feature_set: str = "wavelet"
    provenance: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64, copy=True)
        if array.ndim == 1:
            array = array.reshape(0, 0) if array.size == 0 else array.reshape(1, -1)
        if array.ndim != 2:
            raise ValueError("feature values must be a 2-D matrix")
        array.setflags(write=False)
        return array

    @field_validator("subject_labels", "session_indices", "trial_indices", "word_labels", mode="before")
    @classmethod
    def _coerce_ints(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, ndim=1, dtype=np.int64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "FeatureMatrix":
        n_rows = self.values.shape[0]
        for name in ("subject_labels", "session_indices", "trial_indices", "word_labels"):
            if getattr(self, name).shape[0] != n_rows:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, values has {n_rows}")
        if n_rows and self.values.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must equal the number of feature columns")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")
        return self

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def select_rows(self, mask: np.ndarray) -> "FeatureMatrix":
        return self.model_copy_with(
            values=self.values[mask],
            subject_labels=self.subject_labels[mask],
            session_indices=self.session_indices[mask],
            trial_indices=self.trial_indices[mask],
            word_labels=self.word_labels[mask],
        )

    def model_copy_with(self, **changes: Any) -> "FeatureMatrix":
        fields = {
            "values": self.values,
            "subject_labels": self.subject_labels,
            "session_indices": self.session_indices,
            "trial_indices": self.trial_indices,
            "word_labels": self.word_labels,
            "feature_names": self.feature_names,
            "subject_ids": self.subject_ids,
            "feature_set": self.feature_set,
            "provenance": self.provenance,
        }
        fields.update(changes)
        return FeatureMatrix(**fields)


class SplitSpec(BaseModel):
    """Session-based hold-out partition"""
    model_config = ConfigDict(frozen=True)

    train_sessions: List[int] = Field(default_factory=lambda: [1, 2, 3])
    val_sessions: List[int] = Field(default_factory=lambda: [4])
    test_sessions: List[int] = Field(default_factory=lambda: [5])

    @model_validator(mode="after")
    def _check_disjoint(self) -> "SplitSpec":
        train, val, test = set(self.train_sessions), set(self.val_sessions), set(self.test_sessions)
        if not train or not val or not test:
            raise ValueError("train, validation and test session sets must be non-empty")
        if train & val or train & test or val & test:
            raise ValueError("train, validation and test session sets must be pairwise disjoint")
        return self


class EvalReport(BaseModel):
    """Confusion matrix plus accuracy, macro precision and macro recall for one test split"""

    labels: List[int] = Field(..., description="Class ids indexing the confusion rows/columns")
    class_names: List[str] = Field(default_factory=list)
    confusion: List[List[int]]
    accuracy: float
    macro_precision: float
    macro_recall: float
    per_class_precision: List[float]
    per_class_recall: List[float]
    n_test: int
    split: SplitSpec
    model_provenance: Dict[str, Any] = Field(default_factory=dict)
    feature_provenance: Dict[str, Any] = Field(default_factory=dict)
    unseen_classes: List[int] = Field(default_factory=list, description="Test classes the model never saw")
    warnings: List[str] = Field(default_factory=list)
    seed: int = 0
