# ============================================================================
# FILE: eegid/services/import_service.py
# ============================================================================
"""
Plain-text importer for recordings exported as one CSV matrix per trial.

Expected layout:

    DIR/participants.csv                  optional, columns id,gender,age
    DIR/<subject>/session-<k>/trials.csv  columns trial,label,bad
    DIR/<subject>/session-<k>/trial-<nnn>.csv
                                          header = channel names, one row per sample (uV)

Each trial must end with the imagery and end-fixation phases so the imagery
onset can be recovered from the trial length.
"""

import re
import shutil
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from eegid.core.errors import ManifestError, SessionFormatError
from eegid.core.models import DatasetManifest, RecordingMeta, Session, SessionEntry, SubjectEntry, Trial
from eegid.core.protocol import WORD_VOCABULARY
from eegid.services.session_io import save_manifest, write_session
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
_SESSION_DIR = re.compile(r"^session-(\d+)$")


def _read_participants(root: Path) -> Dict[str, Dict[str, Optional[object]]]:
    table = root / "participants.csv"
    if not table.is_file():
        return {}
    frame = pd.read_csv(table, dtype={"id": str, "gender": str})
    rows = {}
    for record in frame.to_dict(orient="records"):
        age = record.get("age")
        gender = record.get("gender")
        rows[str(record["id"])] = {
            "gender": None if pd.isna(gender) else str(gender),
            "age": None if pd.isna(age) else int(age),
        }
    return rows


def read_csv_session(session_dir: PathLike, subject_id: str, session_index: int, fs: float) -> Session:
    """One session directory -> Session"""
    directory = Path(session_dir)
    index_file = directory / "trials.csv"
    if not index_file.is_file():
        raise SessionFormatError(f"{directory} has no trials.csv")
    index = pd.read_csv(index_file)
    missing = {"trial", "label", "bad"} - set(index.columns)
    if missing:
        raise SessionFormatError(f"{index_file} lacks columns {sorted(missing)}")

    channel_names: Optional[List[str]] = None
    trials = []
    for row in index.itertuples(index=False):
        trial_file = directory / f"trial-{int(row.trial):03d}.csv"
        frame = pd.read_csv(trial_file, float_precision="round_trip")
        names = [str(c) for c in frame.columns]
        if channel_names is None:
            channel_names = names
        elif names != channel_names:
            raise SessionFormatError(f"{trial_file} channel header differs from the first trial")
        try:
            trials.append(Trial(
                label_id=int(row.label),
                bad=bool(int(row.bad)),
                samples=frame.to_numpy(dtype=np.float64).T,
            ))
        except ValidationError as e:
            raise SessionFormatError(f"{trial_file}: {e.errors()[0]['msg']}") from e

    if channel_names is None:
        raise SessionFormatError(f"{index_file} lists no trials")
    meta = RecordingMeta(sampling_rate_hz=fs, channel_names=channel_names)
    return Session(subject_id=subject_id, session_index=session_index, meta=meta, trials=trials)


def _import_tree(root: Path, target: Path, participants: Dict[str, Dict[str, Optional[object]]], fs: float) -> DatasetManifest:
    subjects = []
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        sessions = sorted(
            (int(match.group(1)), path)
            for path in subject_dir.iterdir()
            if path.is_dir() and (match := _SESSION_DIR.match(path.name))
        )
        if not sessions:
            continue
        entries = []
        for session_index, session_dir in sessions:
            session = read_csv_session(session_dir, subject_dir.name, session_index, fs)
            relative = Path(subject_dir.name) / f"{subject_dir.name}_ses-{session_index}.ceeg"
            write_session(session, target / relative)
            entries.append(SessionEntry(index=session_index, path=relative.as_posix(), n_trials=session.n_trials))
            logger.debug(f"Imported {subject_dir.name} session {session_index}: {session.n_trials} trials")
        info = participants.get(subject_dir.name, {})
        try:
            subjects.append(SubjectEntry(id=subject_dir.name, gender=info.get("gender"), age=info.get("age"),
                                         sessions=entries))
        except ValidationError as e:
            raise ManifestError(f"{subject_dir.name}: {e.errors()[0]['msg']}") from e

    if not subjects:
        raise ManifestError(f"no subject/session-<k> directories under {root}")
    try:
        manifest = DatasetManifest(subjects=subjects, labels=list(WORD_VOCABULARY), sampling_rate_hz=fs)
    except ValidationError as e:
        raise ManifestError(f"imported manifest is invalid: {e.errors()[0]['msg']}") from e
    save_manifest(manifest, target / "manifest.json")
    return manifest


def _publish(staging: Path, target: Path) -> None:
    target.mkdir(parents=True, exist_ok=True)
    for item in staging.iterdir():
        destination = target / item.name
        if item.is_dir() and destination.is_dir():
            shutil.copytree(item, destination, dirs_exist_ok=True)
        else:
            shutil.move(str(item), str(destination))


def import_csv_dataset(csv_dir: PathLike, out_dir: PathLike, fs: float = 250.0) -> DatasetManifest:
    """
    Convert a CSV tree into CEEG files plus manifest.json. Files are staged next
    to out_dir and only moved into place once the whole manifest validates.
    """
    root = Path(csv_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"CSV directory not found: {root}")
    target = Path(out_dir)
    participants = _read_participants(root)

    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}-import-", dir=target.parent))
    try:
        manifest = _import_tree(root, staging, participants, fs)
        _publish(staging, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    logger.info(f"Imported {len(manifest.subjects)} subjects, {manifest.n_sessions} sessions -> {target}")
    return manifest
