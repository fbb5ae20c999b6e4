# ============================================================================
# FILE: eegid/services/session_io.py
# ============================================================================
"""
CEEG v1 session files, dataset manifests and provenance sidecars.

CEEG v1 layout, all integers little-endian:

    bytes 0-3   ASCII "CEEG"
    byte  4     u8 version (1)
    byte  5     u8 reserved (0)
    u16         n_channels
    f64         sampling_rate_hz
    n_channels x (u8 name length + UTF-8 name bytes)
    u32         n_trials
    per trial:  u16 label_id, u8 bad_flag, u32 n_samples,
                n_channels x n_samples f32 amplitudes, channel-major
"""

import json
import struct
from pathlib import Path
from typing import Iterator, List, Tuple, Union

import numpy as np
from pydantic import ValidationError

from eegid.core.errors import (
    BadMagicError,
    CorruptHeaderError,
    InvariantViolationError,
    ManifestError,
    NonFiniteAmplitudeError,
    SessionFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from eegid.core.models import (
    DatasetManifest,
    PreprocessingProvenance,
    RecordingMeta,
    Session,
    SessionEntry,
    Trial,
    validate_session_invariants,
)
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

MAGIC = b"CEEG"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sBBHd")
_TRIAL_HEADER = struct.Struct("<HBI")
_COUNT = struct.Struct("<I")
_AMPLITUDE = np.dtype("<f4")


def encode_session(session: Session) -> bytes:
    """Serialize a session to CEEG v1 bytes"""
    validate_session_invariants(session)
    meta = session.meta
    if meta.n_channels > 0xFFFF:
        raise InvariantViolationError("invariant violation: more than 65535 channels")

    parts: List[bytes] = [_PREAMBLE.pack(MAGIC, FORMAT_VERSION, 0, meta.n_channels, float(meta.sampling_rate_hz))]
    for name in meta.channel_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFF:
            raise InvariantViolationError(f"invariant violation: channel name too long: {name!r}")
        parts.append(bytes([len(encoded)]) + encoded)

    parts.append(_COUNT.pack(len(session.trials)))
    for trial in session.trials:
        samples = np.asarray(trial.samples)
        if samples.shape[1] > 0xFFFFFFFF:
            raise InvariantViolationError("invariant violation: trial too long for a u32 sample count")
        parts.append(_TRIAL_HEADER.pack(trial.label_id, 1 if trial.bad else 0, samples.shape[1]))
        parts.append(np.ascontiguousarray(samples, dtype=_AMPLITUDE).tobytes(order="C"))
    return b"".join(parts)


def write_session(session: Session, path: PathLike) -> None:
    """Write a session as a CEEG v1 file; invariants are checked before anything touches disk"""
    payload = encode_session(session)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(payload)
    logger.debug(f"Wrote {session.subject_id} session {session.session_index}: {len(payload)} bytes -> {target}")


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise TruncatedPayloadError(
                f"truncated payload: needed {n} bytes for {what} at offset {self.offset}, file has {len(self.data)}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, layout: struct.Struct, what: str) -> Tuple:
        return layout.unpack(self.take(layout.size, what))


def decode_session(data: bytes, subject_id: str, session_index: int) -> Session:
    """Parse CEEG v1 bytes; subject and session identity come from the manifest"""
    if data[:4] != MAGIC:
        if len(data) < 4 and MAGIC.startswith(data):
            raise TruncatedPayloadError("truncated payload: file ends inside the magic")
        raise BadMagicError(f"bad magic: expected {MAGIC!r}, found {data[:4]!r}")
    if len(data) > 4 and data[4] != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported version {data[4]}")
    if len(data) > 5 and data[5] != 0:
        raise CorruptHeaderError(f"reserved header byte must be 0, found {data[5]}")

    cursor = _Cursor(data)
    _, _, _, n_channels, sampling_rate = cursor.unpack(_PREAMBLE, "header")
    if n_channels == 0:
        raise CorruptHeaderError("header declares zero channels")
    if not np.isfinite(sampling_rate) or sampling_rate <= 0:
        raise CorruptHeaderError(f"header declares sampling rate {sampling_rate}")

    names = []
    for idx in range(n_channels):
        (length,) = cursor.take(1, f"length of channel name {idx}")
        raw = cursor.take(length, f"channel name {idx}")
        try:
            names.append(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise SessionFormatError(f"channel name {idx} is not valid UTF-8") from e

    (n_trials,) = cursor.unpack(_COUNT, "trial count")
    trials = []
    for idx in range(n_trials):
        label_id, bad_flag, n_samples = cursor.unpack(_TRIAL_HEADER, f"header of trial {idx}")
        if bad_flag not in (0, 1):
            raise SessionFormatError(f"trial {idx} has bad flag {bad_flag}")
        raw = cursor.take(n_channels * n_samples * _AMPLITUDE.itemsize, f"samples of trial {idx}")
        samples = np.frombuffer(raw, dtype=_AMPLITUDE).reshape(n_channels, n_samples).astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise NonFiniteAmplitudeError(f"trial {idx} contains NaN or infinite amplitudes")
        try:
            trials.append(Trial(label_id=label_id, bad=bool(bad_flag), samples=samples))
        except ValidationError as e:
            raise SessionFormatError(f"trial {idx} violates trial invariants: {e.errors()[0]['msg']}") from e

    if cursor.offset != len(data):
        raise SessionFormatError(f"{len(data) - cursor.offset} trailing bytes after the last trial")

    try:
        meta = RecordingMeta(sampling_rate_hz=sampling_rate, channel_names=names)
        return Session(subject_id=subject_id, session_index=session_index, meta=meta, trials=trials)
    except ValidationError as e:
        raise SessionFormatError(f"decoded session violates invariants: {e.errors()[0]['msg']}") from e


def read_session(path: PathLike, subject_id: str = "unknown", session_index: int = 1) -> Session:
    """Read a CEEG v1 file"""
    data = Path(path).read_bytes()
    session = decode_session(data, subject_id=subject_id, session_index=session_index)
    logger.debug(f"Read {path}: {session.n_trials} trials x {session.meta.n_channels} channels")
    return session


def drop_bad_trials(session: Session) -> Session:
    """Keep only trials the subject did not abort, in their original order"""
    kept = [trial for trial in session.trials if not trial.bad]
    if len(kept) != session.n_trials:
        logger.debug(f"{session.subject_id} session {session.session_index}: dropped {session.n_trials - len(kept)} bad trials")
    return session.replace_trials(kept)


def save_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_manifest(path: PathLike, check_paths: bool = True) -> DatasetManifest:
    """Load and validate a manifest; session paths are resolved relative to the manifest"""
    source = Path(path)
    try:
        document = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e}") from e

    try:
        manifest = DatasetManifest.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ManifestError(f"{first['msg']}" + (f" (at {location})" if location else "")) from e

    if check_paths:
        for subject, entry in iter_session_entries(manifest):
            resolved = resolve_session_path(source.parent, entry)
            if not resolved.is_file():
                raise ManifestError(f"unresolvable path for {subject} session {entry.index}: {entry.path}")
    return manifest


def resolve_session_path(base_dir: PathLike, entry: SessionEntry) -> Path:
    candidate = Path(entry.path)
    return candidate if candidate.is_absolute() else Path(base_dir) / candidate


def iter_session_entries(manifest: DatasetManifest) -> Iterator[Tuple[str, SessionEntry]]:
    for subject in manifest.subjects:
        for entry in sorted(subject.sessions, key=lambda e: e.index):
            yield subject.id, entry


def iter_sessions(manifest: DatasetManifest, base_dir: PathLike) -> Iterator[Session]:
    """Load every session of a manifest, subject by subject"""
    for subject, entry in iter_session_entries(manifest):
        yield read_session(resolve_session_path(base_dir, entry), subject_id=subject, session_index=entry.index)


def provenance_path(session_path: PathLike) -> Path:
    return Path(session_path).with_suffix(".provenance.json")


def write_provenance(provenance: PreprocessingProvenance, session_path: PathLike) -> Path:
    target = provenance_path(session_path)
    target.write_text(provenance.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return target


def read_provenance(session_path: PathLike) -> PreprocessingProvenance:
    return PreprocessingProvenance.model_validate_json(provenance_path(session_path).read_text(encoding="utf-8"))
