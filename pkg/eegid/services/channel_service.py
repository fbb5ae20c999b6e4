# ============================================================================
# FILE: eegid/services/channel_service.py
# ============================================================================

from typing import Iterable, List, Set

import numpy as np
from numpy.polynomial.legendre import legval
from pydantic import BaseModel, ConfigDict, Field

from eegid.core.errors import ChannelError
from eegid.core.models import Montage, Session, Trial
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class BadChannelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    window_s: float = Field(1.0, gt=0)
    correlation_threshold: float = Field(0.4, gt=0, lt=1)
    bad_fraction_threshold: float = Field(0.02, gt=0, lt=1)


class SplineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    stiffness_m: int = Field(4, ge=2)
    n_legendre_terms: int = Field(50, ge=7)
    regularization: float = Field(1e-5, ge=0)


def window_max_correlation(data: np.ndarray, window: int) -> np.ndarray:
    """
    Max absolute Pearson correlation of each channel with any other channel,
    per non-overlapping window. Returns n_windows x n_channels.

    A channel with zero variance in a window gets correlation 0 there.
    """
    n_channels, n_samples = data.shape
    n_windows = n_samples // window
    if n_windows == 0:
        return np.zeros((0, n_channels))

    blocks = data[:, : n_windows * window].reshape(n_channels, n_windows, window).transpose(1, 0, 2)
    blocks = blocks - blocks.mean(axis=2, keepdims=True)
    norms = np.sqrt(np.einsum("wcs,wcs->wc", blocks, blocks))
    # Flat relative to the session's amplitude scale, so filter round-off counts as zero
    scale = max(float(np.max(np.abs(data))), 1e-300)
    flat = norms <= 1e-10 * scale * np.sqrt(window)
    safe = np.where(flat, 1.0, norms)

    corr = np.einsum("wcs,wds->wcd", blocks, blocks) / (safe[:, :, None] * safe[:, None, :])
    corr[np.broadcast_to(flat[:, :, None], corr.shape)] = 0.0
    corr[np.broadcast_to(flat[:, None, :], corr.shape)] = 0.0
    idx = np.arange(n_channels)
    corr[:, idx, idx] = 0.0
    return np.max(np.abs(corr), axis=2)


def find_bad_by_correlation(session: Session, config: BadChannelConfig) -> Set[int]:
    """Channels whose fraction of poorly correlated 1 s windows exceeds the threshold"""
    n_channels = session.meta.n_channels
    if n_channels < 2:
        raise ChannelError("bad-channel detection needs at least 2 channels")
    if not session.trials:
        raise ChannelError(f"{session.subject_id} session {session.session_index} has no trials")

    fs = session.meta.sampling_rate_hz
    window = int(round(config.window_s * fs))
    if window < 2 or abs(window - config.window_s * fs) > 1e-6:
        raise ChannelError(f"window of {config.window_s} s is not a whole number of samples at {fs} Hz")
    short = [i for i, trial in enumerate(session.trials) if trial.n_samples < window]
    if short:
        raise ChannelError(f"trials {short[:5]} are shorter than one {config.window_s} s window")

    data = np.concatenate([trial.samples for trial in session.trials], axis=1)
    max_corr = window_max_correlation(data, window)
    bad_windows = max_corr < config.correlation_threshold
    fraction = bad_windows.mean(axis=0)

    bads = {int(ch) for ch in np.flatnonzero(fraction > config.bad_fraction_threshold)}
    logger.debug(
        f"{session.subject_id} session {session.session_index}: {max_corr.shape[0]} windows, "
        f"worst bad-window fraction {float(fraction.max()):.3f}"
    )
    if bads:
        names = [session.meta.channel_names[ch] for ch in sorted(bads)]
        logger.warning(f"{session.subject_id} session {session.session_index}: bad channels {names}")
    return bads


def legendre_g(cos_angle: np.ndarray, config: SplineConfig) -> np.ndarray:
    """g(x) = 1/(4 pi) * sum_n (2n+1) / (n(n+1))^m * P_n(x)"""
    n = np.arange(1, config.n_legendre_terms + 1, dtype=np.float64)
    coefficients = np.concatenate([[0.0], (2.0 * n + 1.0) / (n * (n + 1.0)) ** config.stiffness_m])
    return legval(np.clip(cos_angle, -1.0, 1.0), coefficients) / (4.0 * np.pi)


def spline_interpolation_matrix(good_xyz: np.ndarray, bad_xyz: np.ndarray, config: SplineConfig) -> np.ndarray:
    """
    Linear map from good-channel values to spline estimates at the bad positions.

    Solves [[0, 1^T], [1, G + lambda I]] [c0; c] = [0; v] for the good values v and
    evaluates c0 + G_bad c; the result is n_bad x n_good.
    """
    n_good = good_xyz.shape[0]
    g_good = legendre_g(good_xyz @ good_xyz.T, config) + config.regularization * np.eye(n_good)
    system = np.zeros((n_good + 1, n_good + 1))
    system[0, 1:] = 1.0
    system[1:, 0] = 1.0
    system[1:, 1:] = g_good

    evaluation = np.hstack([np.ones((bad_xyz.shape[0], 1)), legendre_g(bad_xyz @ good_xyz.T, config)])
    try:
        weights = np.linalg.solve(system.T, evaluation.T).T
    except np.linalg.LinAlgError as e:
        raise ChannelError(f"spline system is singular: {e}") from e
    return weights[:, 1:]


def interpolate_bads(session: Session, montage: Montage, bads: Iterable[int],
                     config: SplineConfig = SplineConfig()) -> Session:
    """Replace bad channels by spherical-spline estimates from the good ones"""
    bad_list: List[int] = sorted({int(ch) for ch in bads})
    if not bad_list:
        return session
    n_channels = session.meta.n_channels
    if any(ch < 0 or ch >= n_channels for ch in bad_list):
        raise ChannelError(f"bad channel indices {bad_list} out of range for {n_channels} channels")
    good_list = [ch for ch in range(n_channels) if ch not in bad_list]
    if len(good_list) < 4:
        raise ChannelError(f"too few good channels for spline interpolation: {len(good_list)} (need 4)")

    names = session.meta.channel_names
    xyz = montage.coordinates(names)
    weights = spline_interpolation_matrix(xyz[good_list], xyz[bad_list], config)

    trials = []
    for trial in session.trials:
        samples = np.array(trial.samples)
        samples[bad_list] = weights @ samples[good_list]
        trials.append(trial.with_samples(samples))

    logger.info(
        f"{session.subject_id} session {session.session_index}: interpolated "
        f"{[names[ch] for ch in bad_list]} from {len(good_list)} channels"
    )
    return session.replace_trials(trials)


def common_average_reference(trial: Trial) -> Trial:
    """Subtract the across-channel mean at every sample"""
    if trial.n_channels < 2:
        raise ChannelError("common average reference needs at least 2 channels")
    samples = trial.samples - trial.samples.mean(axis=0, keepdims=True)
    return trial.with_samples(samples)
