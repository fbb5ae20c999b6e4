# ============================================================================
# FILE: eegid/services/preprocess_service.py
# ============================================================================

from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from eegid.core.errors import EpochError, ManifestError
from eegid.core.models import DatasetManifest, Epoch, Montage, PreprocessingProvenance, Session, SessionEntry
from eegid.core.protocol import imagery_onset
from eegid.services.channel_service import (
    BadChannelConfig,
    SplineConfig,
    common_average_reference,
    find_bad_by_correlation,
    interpolate_bads,
)
from eegid.services.filter_service import (
    BandpassSpec,
    FirKernel,
    NotchSpec,
    design_bandpass,
    design_notch,
    overlap_add_filter,
)
from eegid.services.session_io import (
    drop_bad_trials,
    read_session,
    resolve_session_path,
    save_manifest,
    write_provenance,
    write_session,
)
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class PreprocessingConfig(BaseModel):
    """Settings for the four preprocessing stages, in application order"""
    model_config = ConfigDict(frozen=True)

    notch: NotchSpec = Field(default_factory=NotchSpec)
    bandpass: BandpassSpec = Field(default_factory=BandpassSpec)
    bad_channels: BadChannelConfig = Field(default_factory=BadChannelConfig)
    spline: SplineConfig = Field(default_factory=SplineConfig)

    def for_rate(self, fs: float) -> "PreprocessingConfig":
        """Same settings with both filter specs bound to the session's sampling rate"""
        if self.notch.fs == fs and self.bandpass.fs == fs:
            return self
        return self.model_copy(update={
            "notch": self.notch.model_copy(update={"fs": fs}),
            "bandpass": self.bandpass.model_copy(update={"fs": fs}),
        })


@lru_cache(maxsize=16)
def _kernels(notch: NotchSpec, bandpass: BandpassSpec) -> Tuple[FirKernel, FirKernel]:
    return design_notch(notch), design_bandpass(bandpass)


def filter_session(session: Session, config: PreprocessingConfig) -> Tuple[Session, FirKernel, FirKernel]:
    """Notch then bandpass every trial"""
    notch, bandpass = _kernels(config.notch, config.bandpass)
    trials = [
        trial.with_samples(overlap_add_filter(overlap_add_filter(trial.samples, notch), bandpass))
        for trial in session.trials
    ]
    return session.replace_trials(trials), notch, bandpass


def preprocess_session(session: Session, montage: Montage,
                       config: Optional[PreprocessingConfig] = None) -> Session:
    """
    Notch, bandpass, bad-channel detection with spline interpolation, then
    common average reference. The returned session carries a provenance note.
    """
    config = (config or PreprocessingConfig()).for_rate(session.meta.sampling_rate_hz)
    logger.debug(f"Preprocessing {session.subject_id} session {session.session_index} ({session.n_trials} trials)")

    filtered, notch, bandpass = filter_session(session, config)
    bads = find_bad_by_correlation(filtered, config.bad_channels)
    repaired = interpolate_bads(filtered, montage, bads, config.spline)
    referenced = [common_average_reference(trial) for trial in repaired.trials]

    names = session.meta.channel_names
    interpolated = [names[ch] for ch in sorted(bads)]
    provenance = PreprocessingProvenance(
        subject_id=session.subject_id,
        session_index=session.session_index,
        notch_frequencies_hz=list(notch.design["notch_frequencies_hz"]),
        notch_taps=notch.n_taps,
        bandpass_taps=bandpass.n_taps,
        bad_channels=interpolated,
        interpolated_channels=interpolated,
        reference="average",
        n_trials=len(referenced),
    )
    return repaired.replace_trials(referenced, provenance=provenance)


def epoch_trials(session: Session, window_s: float = 2.0, offset_s: float = 0.0) -> List[Epoch]:
    """Cut the imagery window out of every trial, measured from imagery onset"""
    if window_s <= 0:
        raise EpochError(f"epoch window must be positive, got {window_s} s")
    fs = session.meta.sampling_rate_hz
    length = int(round(window_s * fs))
    shift = int(round(offset_s * fs))

    epochs = []
    for idx, trial in enumerate(session.trials):
        start = imagery_onset(trial.n_samples, fs) + shift
        stop = start + length
        if start < 0 or stop > trial.n_samples:
            raise EpochError(
                f"trial too short: trial {idx} of {session.subject_id} session {session.session_index} "
                f"has {trial.n_samples} samples, epoch needs [{start}, {stop})"
            )
        epochs.append(Epoch(
            subject_id=session.subject_id,
            session_index=session.session_index,
            trial_index=idx,
            label_id=trial.label_id,
            data=trial.samples[:, start:stop],
        ))
    return epochs


def preprocess_dataset(manifest: DatasetManifest, base_dir: Union[str, Path], out_dir: Union[str, Path],
                       montage: Montage, config: Optional[PreprocessingConfig] = None) -> DatasetManifest:
    """
    Drop bad trials and preprocess every session, writing CEEG files with
    provenance sidecars and a manifest flagged as preprocessed.
    """
    if manifest.preprocessed:
        raise ManifestError("manifest is already preprocessed")
    target = Path(out_dir)
    subjects = []
    for subject in manifest.subjects:
        entries = []
        for entry in sorted(subject.sessions, key=lambda e: e.index):
            session = read_session(resolve_session_path(base_dir, entry), subject.id, entry.index)
            clean = drop_bad_trials(session)
            n_dropped = session.n_trials - clean.n_trials
            if clean.trials:
                clean = preprocess_session(clean, montage, config)
                provenance = clean.provenance.model_copy(update={"n_bad_trials_dropped": n_dropped})
                clean = clean.replace_trials(clean.trials, provenance=provenance)
            else:
                logger.warning(f"{subject.id} session {entry.index}: every trial is marked bad")
                clean = clean.replace_trials([], provenance=PreprocessingProvenance(
                    subject_id=subject.id, session_index=entry.index, n_trials=0, n_bad_trials_dropped=n_dropped))
            relative = Path(entry.path)
            if relative.is_absolute():
                relative = Path(subject.id) / relative.name
            path = target / relative
            write_session(clean, path)
            write_provenance(clean.provenance, path)
            entries.append(SessionEntry(index=entry.index, path=relative.as_posix(), n_trials=clean.n_trials))
            logger.debug(f"{subject.id} session {entry.index}: {n_dropped} bad trials "
                         f"dropped, interpolated {clean.provenance.interpolated_channels}")
        subjects.append(subject.model_copy(update={"sessions": entries}))

    processed = manifest.model_copy(update={"subjects": subjects, "preprocessed": True})
    save_manifest(processed, target / "manifest.json")
    logger.info(f"Preprocessed {processed.n_sessions} sessions -> {target}")
    return processed
