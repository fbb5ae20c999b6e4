"""
Deterministic synthetic dataset following the recording protocol.

Every subject owns a signature: three band-limited AR(2) sources (theta, alpha,
beta) mixed onto the scalp through smooth subject-specific maps, plus a weak
per-channel AR(1) background. Sessions add a channel-gain drift, 50 Hz line
noise and white sensor noise.

Random streams are numpy PCG64 generators seeded from SeedSequence entropy
lists: [seed, 0, subject] for signatures and [seed, 1, subject, session] for
session content, so any (subject, session) pair can be generated alone.
"""

import itertools
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.signal import lfilter, welch

from eegid.core.errors import ChannelError, SynthesisError
from eegid.core.models import (
    DatasetManifest,
    RecordingMeta,
    Session,
    SessionEntry,
    SubjectEntry,
    Trial,
)
from eegid.core.montage import builtin_montage, canonical_channel_names
from eegid.core.protocol import (
    END_FIXATION_S,
    IMAGERY_S,
    PRE_FIXATION_RANGE_S,
    WORD_VOCABULARY,
    participant_info,
    subject_id,
)
from eegid.services.session_io import save_manifest, write_session
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

BANDS: Dict[str, Tuple[float, float]] = {
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}
MAX_POLE_MAGNITUDE = 0.98
_BURN_IN = 250


class TrialTiming(BaseModel):
    """Phase durations of one trial in seconds"""
    model_config = ConfigDict(frozen=True)

    pre_fixation_s: float = Field(..., ge=PRE_FIXATION_RANGE_S[0], le=PRE_FIXATION_RANGE_S[1])
    imagery_s: Literal[2.0] = IMAGERY_S
    end_fixation_s: Literal[1.0] = END_FIXATION_S

    @property
    def total_s(self) -> float:
        return self.pre_fixation_s + self.imagery_s + self.end_fixation_s

    def n_samples(self, fs: float) -> int:
        return int(round(self.total_s * fs))


class SynthConfig(BaseModel):
    """Generator parameters; defaults mirror the recording protocol"""
    model_config = ConfigDict(frozen=True)

    n_subjects: int = Field(11, gt=0)
    trials_per_session: List[int] = Field(default_factory=lambda: [100, 100, 100, 50, 50])
    fs: float = Field(250.0, gt=0)
    n_channels: int = Field(30, gt=1)
    bad_trial_probability: float = Field(0.01, ge=0.0, le=1.0)
    line_noise_hz: float = Field(50.0, gt=0)
    line_noise_amplitude_uv: float = Field(10.0, ge=0)
    sensor_noise_uv: float = Field(1.0, ge=0)
    signal_rms_uv: float = Field(20.0, gt=0)
    session_gain_drift: float = Field(0.05, ge=0, lt=1)
    background_fraction: float = Field(0.15, ge=0, lt=1, description="Share of power in per-channel AR(1) background")
    power_spread: float = Field(0.2, ge=0, description="Log-sd of subject-specific total channel power")
    seed: int = 42

    @field_validator("trials_per_session")
    @classmethod
    def _check_counts(cls, value: List[int]) -> List[int]:
        if not 1 <= len(value) <= 5:
            raise ValueError("between 1 and 5 sessions per subject")
        if any(count <= 0 for count in value):
            raise ValueError("trial counts must be positive")
        return value

    @field_validator("n_channels")
    @classmethod
    def _check_channels(cls, value: int) -> int:
        available = len(canonical_channel_names())
        if value > available:
            raise ValueError(f"the montage provides {available} channels")
        return value

    @property
    def total_trials(self) -> int:
        return self.n_subjects * sum(self.trials_per_session)


class SubjectSignature(BaseModel):
    """Seeded spectral and spatial fingerprint of one synthetic subject"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_index: int
    band_frequencies_hz: Tuple[float, float, float]
    pole_radii: Tuple[float, float, float]
    band_power: Tuple[float, float, float]
    mixing: np.ndarray = Field(..., description="n_channels x 3 source-to-channel gains")
    channel_ar: np.ndarray = Field(..., description="Per-channel AR(1) coefficient of the background")

    def ar_coefficients(self, fs: float) -> List[Tuple[float, float]]:
        """(a1, a2) of x[t] = a1 x[t-1] + a2 x[t-2] + e[t] for each band source"""
        return [
            (2.0 * r * np.cos(2.0 * np.pi * f / fs), -r * r)
            for f, r in zip(self.band_frequencies_hz, self.pole_radii)
        ]

    def max_pole_magnitude(self, fs: float) -> float:
        magnitudes = [float(np.max(np.abs(np.roots([1.0, -a1, -a2])))) for a1, a2 in self.ar_coefficients(fs)]
        magnitudes.extend(np.abs(self.channel_ar).tolist())
        return max(magnitudes)


def _ar2_variance(a1: float, a2: float) -> float:
    return (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) ** 2 - a1 ** 2))


def signature_rng(seed: int, subject_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, subject_index])


def session_rng(seed: int, subject_index: int, session_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1, subject_index, session_index])


def make_signature(config: SynthConfig, subject_index: int) -> SubjectSignature:
    rng = signature_rng(config.seed, subject_index)
    positions = builtin_montage().coordinates(canonical_channel_names()[: config.n_channels])

    frequencies = []
    for low, high in BANDS.values():
        margin = 0.1 * (high - low)
        frequencies.append(float(rng.uniform(low + margin, high - margin)))
    radii = [float(r) for r in rng.uniform(0.90, 0.97, size=3)]
    band_power = [float(p) for p in rng.dirichlet([2.0, 2.0, 2.0])]

    mixing = np.empty((config.n_channels, 3))
    for band in range(3):
        spatial = np.full(config.n_channels, 0.25)
        for _ in range(2):
            center = rng.normal(size=3)
            center[2] = abs(center[2]) + 0.3
            center /= np.linalg.norm(center)
            angle = np.arccos(np.clip(positions @ center, -1.0, 1.0))
            spatial += rng.uniform(0.5, 1.5) * np.exp(-(angle ** 2) / (2.0 * 0.6 ** 2))
        mixing[:, band] = np.sqrt(band_power[band]) * spatial

    # Total source power per channel is pinned to a subject-specific log-normal level
    total = np.sum(mixing ** 2, axis=1)
    target = np.exp(rng.normal(0.0, config.power_spread, size=config.n_channels))
    mixing *= np.sqrt(target / total)[:, None]

    channel_ar = rng.uniform(0.3, 0.9, size=config.n_channels)
    return SubjectSignature(
        subject_index=subject_index,
        band_frequencies_hz=tuple(frequencies),
        pole_radii=tuple(radii),
        band_power=tuple(band_power),
        mixing=mixing,
        channel_ar=channel_ar,
    )


def _band_sources(signature: SubjectSignature, n_samples: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    sources = np.empty((3, n_samples))
    for band, (a1, a2) in enumerate(signature.ar_coefficients(fs)):
        drive = rng.standard_normal(n_samples + _BURN_IN)
        sources[band] = lfilter([1.0], [1.0, -a1, -a2], drive)[_BURN_IN:] / np.sqrt(_ar2_variance(a1, a2))
    return sources


def _background(signature: SubjectSignature, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    drive = rng.standard_normal((signature.channel_ar.shape[0], n_samples + _BURN_IN))
    out = np.empty((signature.channel_ar.shape[0], n_samples))
    for ch, phi in enumerate(signature.channel_ar):
        out[ch] = lfilter([1.0], [1.0, -phi], drive[ch])[_BURN_IN:] * np.sqrt(1.0 - phi ** 2)
    return out


def _line_noise(n_channels: int, n_samples: int, fs: float, freq_hz: float, amplitude_uv: float, phases: np.ndarray) -> np.ndarray:
    t = np.arange(n_samples) / fs
    return amplitude_uv * np.sin(2.0 * np.pi * freq_hz * t[None, :] + phases[:, None])


def synth_trial_signal(
    signature: SubjectSignature,
    config: SynthConfig,
    n_samples: int,
    gains: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Clean subject signal (no line or sensor noise) for one trial, in microvolts"""
    sources = _band_sources(signature, n_samples, config.fs, rng)
    background = _background(signature, n_samples, rng)
    signal = np.sqrt(1.0 - config.background_fraction) * (signature.mixing @ sources)
    signal += np.sqrt(config.background_fraction) * background
    return config.signal_rms_uv * gains[:, None] * signal


def synth_session(config: SynthConfig, subject_index: int, session_index: int,
                  signature: Optional[SubjectSignature] = None) -> Session:
    """Generate one (subject, session) pair from its own random stream"""
    if signature is None:
        signature = make_signature(config, subject_index)
    rng = session_rng(config.seed, subject_index, session_index)
    n_trials = config.trials_per_session[session_index - 1]
    gains = 1.0 + rng.uniform(-config.session_gain_drift, config.session_gain_drift, size=config.n_channels)

    trials = []
    for _ in range(n_trials):
        timing = TrialTiming(pre_fixation_s=float(rng.uniform(*PRE_FIXATION_RANGE_S)))
        n_samples = timing.n_samples(config.fs)
        label = int(rng.integers(0, len(WORD_VOCABULARY)))
        bad = bool(rng.random() < config.bad_trial_probability)
        samples = synth_trial_signal(signature, config, n_samples, gains, rng)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=config.n_channels)
        samples += _line_noise(config.n_channels, n_samples, config.fs, config.line_noise_hz,
                               config.line_noise_amplitude_uv, phases)
        samples += config.sensor_noise_uv * rng.standard_normal(samples.shape)
        # Quantize to the stored f32 precision so files round-trip exactly
        trials.append(Trial(label_id=label, bad=bad, samples=samples.astype(np.float32)))

    meta = RecordingMeta(sampling_rate_hz=config.fs, channel_names=canonical_channel_names()[: config.n_channels])
    return Session(subject_id=subject_id(subject_index), session_index=session_index, meta=meta, trials=trials)


def synth_dataset(config: SynthConfig, out_dir: Union[str, Path]) -> DatasetManifest:
    """Write one CEEG file per (subject, session) plus manifest.json under out_dir"""
    if config.line_noise_hz >= config.fs / 2.0:
        raise SynthesisError(f"line noise at {config.line_noise_hz} Hz is above Nyquist for fs={config.fs}")
    check = separability_report(config)
    if not check.passed:
        raise SynthesisError(
            f"subjects are not separable: distance ratio {check.ratio:.2f} (need 3), "
            f"max pole magnitude {check.max_pole_magnitude:.3f}"
        )
    logger.debug(f"Separability ratio {check.ratio:.2f}, max pole {check.max_pole_magnitude:.3f}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    logger.info(
        f"Synthesizing {config.n_subjects} subjects x {len(config.trials_per_session)} sessions "
        f"({config.total_trials} trials, seed {config.seed}) -> {root}"
    )

    subjects = []
    for subject_index in range(config.n_subjects):
        signature = make_signature(config, subject_index)
        info = participant_info(subject_index)
        entries = []
        for session_index in range(1, len(config.trials_per_session) + 1):
            session = synth_session(config, subject_index, session_index, signature)
            relative = Path(session.subject_id) / f"{session.subject_id}_ses-{session_index}.ceeg"
            write_session(session, root / relative)
            entries.append(SessionEntry(index=session_index, path=relative.as_posix(), n_trials=session.n_trials))
        subjects.append(SubjectEntry(id=str(info["id"]), gender=info["gender"], age=info["age"], sessions=entries))
        logger.debug(f"  {info['id']}: {sum(e.n_trials for e in entries)} trials written")

    manifest = DatasetManifest(subjects=subjects, labels=list(WORD_VOCABULARY), sampling_rate_hz=config.fs)
    save_manifest(manifest, root / "manifest.json")
    logger.info(f"Synthetic dataset ready: {manifest.n_sessions} sessions")
    return manifest


def inject_line_noise(trial: Trial, freq_hz: float, amplitude_uv: float, fs: float = 250.0,
                      phases: Optional[Sequence[float]] = None, seed: int = 0) -> Trial:
    """Add amplitude * sin(2 pi f t + phase_ch) to every channel"""
    if freq_hz >= fs / 2.0:
        raise SynthesisError(f"line frequency {freq_hz} Hz is not below Nyquist ({fs / 2.0} Hz)")
    if amplitude_uv == 0:
        return trial
    if phases is None:
        phases = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, size=trial.n_channels)
    noise = _line_noise(trial.n_channels, trial.n_samples, fs, freq_hz, amplitude_uv, np.asarray(phases, dtype=float))
    return trial.with_samples(trial.samples + noise)


def inject_bad_channel(session: Session, channel_index: int,
                       mode: Literal["white-noise", "flatline"] = "white-noise",
                       seed: int = 0, amplitude_uv: Optional[float] = None,
                       flat_value_uv: float = 0.0) -> Session:
    """Replace one channel in every trial by independent white noise or a constant"""
    if not 0 <= channel_index < session.meta.n_channels:
        raise ChannelError(f"channel index {channel_index} out of range for {session.meta.n_channels} channels")
    if mode not in ("white-noise", "flatline"):
        raise SynthesisError(f"unknown bad-channel mode {mode!r}")

    rng = np.random.default_rng([seed, channel_index])
    trials = []
    for trial in session.trials:
        samples = np.array(trial.samples)
        if mode == "flatline":
            samples[channel_index] = flat_value_uv
        else:
            scale = amplitude_uv if amplitude_uv is not None else float(np.std(samples[channel_index])) or 1.0
            samples[channel_index] = scale * rng.standard_normal(trial.n_samples)
        trials.append(trial.with_samples(samples))
    return session.replace_trials(trials)


class SeparabilityReport(BaseModel):
    min_pairwise_distance: float
    max_within_spread: float
    ratio: float
    max_pole_magnitude: float

    @property
    def passed(self) -> bool:
        return self.ratio >= 3.0 and self.max_pole_magnitude < MAX_POLE_MAGNITUDE


def band_power_vector(samples: np.ndarray, fs: float) -> np.ndarray:
    """Log band power per channel for theta/alpha/beta, flattened band-major"""
    freqs, psd = welch(samples, fs=fs, nperseg=int(fs), axis=-1)
    powers = []
    for low, high in BANDS.values():
        mask = (freqs >= low) & (freqs < high)
        powers.append(np.log(np.mean(psd[:, mask], axis=1)))
    return np.concatenate(powers)


def separability_report(config: SynthConfig, trials_per_subject: int = 20) -> SeparabilityReport:
    """Subject mean band-power vectors must sit well apart relative to within-subject spread"""
    means, spreads, poles = [], [], []
    for subject_index in range(config.n_subjects):
        signature = make_signature(config, subject_index)
        poles.append(signature.max_pole_magnitude(config.fs))
        rng = session_rng(config.seed, subject_index, 0)
        gains = np.ones(config.n_channels)
        n_samples = int(round((IMAGERY_S + END_FIXATION_S + 1.5) * config.fs))
        vectors = np.array([
            band_power_vector(synth_trial_signal(signature, config, n_samples, gains, rng), config.fs)
            for _ in range(trials_per_subject)
        ])
        means.append(vectors.mean(axis=0))
        spreads.append(float(np.sqrt(np.mean(vectors.var(axis=0)))))

    distances = [float(np.linalg.norm(means[a] - means[b])) for a, b in itertools.combinations(range(len(means)), 2)]
    min_distance = min(distances) if distances else float("inf")
    spread = max(spreads)
    return SeparabilityReport(
        min_pairwise_distance=min_distance,
        max_within_spread=spread,
        ratio=min_distance / spread if spread > 0 else float("inf"),
        max_pole_magnitude=max(poles),
    )
