# ============================================================================
# FILE: eegid/services/filter_service.py
# ============================================================================
"""
Linear-phase FIR design (Hamming windowed sinc) and zero-phase overlap-add filtering.
"""

import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import fft as sp_fft
from scipy.signal import firwin, freqz

from eegid.core.errors import FilterDesignError
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

# Hamming-window rule of thumb: taps ~ 3.3 * fs / transition width
HAMMING_LENGTH_FACTOR = 3.3


class FirKernel(BaseModel):
    """Symmetric odd-length FIR taps plus the band edges they were designed for"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    taps: np.ndarray
    fs: float = Field(..., gt=0)
    design: Dict[str, Any] = Field(default_factory=dict, description="Pass/stop band edges in Hz")

    @field_validator("taps", mode="before")
    @classmethod
    def _check_taps(cls, value: Any) -> np.ndarray:
        taps = np.array(value, dtype=np.float64, copy=True)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ValueError("FIR kernels need an odd number of taps")
        if not np.allclose(taps, taps[::-1], rtol=0.0, atol=1e-15):
            raise ValueError("FIR kernel taps must be symmetric")
        taps.setflags(write=False)
        return taps

    @property
    def n_taps(self) -> int:
        return int(self.taps.size)

    @property
    def group_delay_samples(self) -> int:
        return (self.n_taps - 1) // 2


class BandpassSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    low_hz: float = 3.0
    high_hz: float = 45.0
    transition_hz: float = 2.0
    window: str = "hamming"
    fs: float = Field(250.0, gt=0)


class NotchSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_hz: float = Field(50.0, gt=0)
    notch_width_hz: float = Field(1.0, gt=0)
    transition_hz: float = 1.0
    window: str = "hamming"
    fs: float = Field(250.0, gt=0)

    @property
    def frequencies(self) -> List[float]:
        """Base frequency and every harmonic strictly below Nyquist"""
        nyquist = self.fs / 2.0
        count = math.ceil(nyquist / self.base_hz) - 1
        return [self.base_hz * k for k in range(1, count + 1) if self.base_hz * k < nyquist]


def hamming_length(fs: float, transition_hz: float) -> int:
    """Smallest odd tap count satisfying the windowed-sinc rule of thumb"""
    n = int(math.ceil(HAMMING_LENGTH_FACTOR * fs / transition_hz))
    return n if n % 2 == 1 else n + 1


def design_bandpass(spec: BandpassSpec) -> FirKernel:
    """Cutoffs sit half a transition outside the passband edges"""
    if spec.transition_hz <= 0:
        raise FilterDesignError(f"infeasible bandpass: transition {spec.transition_hz} Hz must be positive")
    nyquist = spec.fs / 2.0
    if not 0 < spec.low_hz - spec.transition_hz:
        raise FilterDesignError(f"infeasible bandpass: low edge {spec.low_hz} Hz leaves no room for the transition")
    if not spec.high_hz + spec.transition_hz < nyquist:
        raise FilterDesignError(f"infeasible bandpass: {spec.high_hz} + {spec.transition_hz} Hz reaches Nyquist {nyquist} Hz")
    if spec.low_hz >= spec.high_hz:
        raise FilterDesignError("infeasible bandpass: low edge must be below high edge")

    n_taps = hamming_length(spec.fs, spec.transition_hz)
    cutoffs = [spec.low_hz - spec.transition_hz / 2.0, spec.high_hz + spec.transition_hz / 2.0]
    try:
        taps = firwin(n_taps, cutoffs, window=spec.window, pass_zero=False, fs=spec.fs)
    except ValueError as e:
        raise FilterDesignError(f"bandpass design failed: {e}") from e

    logger.debug(f"Bandpass {spec.low_hz}-{spec.high_hz} Hz: {n_taps} taps, cutoffs {cutoffs}")
    return FirKernel(
        taps=_symmetrize(taps),
        fs=spec.fs,
        design={
            "type": "bandpass",
            "passband_hz": [spec.low_hz, spec.high_hz],
            "cutoffs_hz": cutoffs,
            "transition_hz": spec.transition_hz,
            "window": spec.window,
        },
    )


def design_notch(spec: NotchSpec) -> FirKernel:
    """Band-stop around the base line frequency and each harmonic below Nyquist"""
    if spec.transition_hz <= 0:
        raise FilterDesignError(f"infeasible notch: transition {spec.transition_hz} Hz must be positive")
    frequencies = spec.frequencies
    if not frequencies:
        raise FilterDesignError(f"no valid notch below Nyquist for base {spec.base_hz} Hz at fs={spec.fs}")

    nyquist = spec.fs / 2.0
    half = spec.notch_width_hz / 2.0 + spec.transition_hz / 2.0
    cutoffs: List[float] = []
    for freq in frequencies:
        low, high = freq - half, freq + half
        if low <= 0 or (cutoffs and low <= cutoffs[-1]):
            raise FilterDesignError(f"infeasible notch: stop bands around {freq} Hz overlap")
        cutoffs.append(low)
        # A stop band reaching Nyquist stays open-ended
        if high < nyquist:
            cutoffs.append(high)

    n_taps = hamming_length(spec.fs, spec.transition_hz)
    try:
        taps = firwin(n_taps, cutoffs, window=spec.window, pass_zero=True, fs=spec.fs)
    except ValueError as e:
        raise FilterDesignError(f"notch design failed: {e}") from e

    logger.debug(f"Notch at {frequencies} Hz: {n_taps} taps")
    return FirKernel(
        taps=_symmetrize(taps),
        fs=spec.fs,
        design={
            "type": "notch",
            "notch_frequencies_hz": frequencies,
            "notch_width_hz": spec.notch_width_hz,
            "cutoffs_hz": cutoffs,
            "transition_hz": spec.transition_hz,
            "window": spec.window,
        },
    )


def _symmetrize(taps: np.ndarray) -> np.ndarray:
    # firwin is symmetric up to rounding; average with the mirror to make it exact
    taps = np.asarray(taps, dtype=np.float64)
    return 0.5 * (taps + taps[::-1])


def frequency_response(kernel: FirKernel, freqs_hz: Sequence[float]) -> np.ndarray:
    """Magnitude response in dB at the requested frequencies"""
    _, response = freqz(kernel.taps, worN=np.asarray(freqs_hz, dtype=np.float64), fs=kernel.fs)
    return 20.0 * np.log10(np.maximum(np.abs(response), 1e-300))


def _default_fft_size(n_taps: int, n_padded: int) -> int:
    # Power-of-two block at least four kernel lengths, capped at one block for short signals
    single = n_padded + n_taps - 1
    target = 1 << int(math.ceil(math.log2(4 * n_taps)))
    return min(target, 1 << int(math.ceil(math.log2(single))))


def overlap_add_filter(signal: np.ndarray, kernel: FirKernel, block_size: Optional[int] = None) -> np.ndarray:
    """
    Zero-phase FIR filtering by FFT overlap-add along the last axis.

    The input is reflection-padded by the group delay on both sides; the output is
    the linear convolution trimmed back to the input length so that a passband
    sinusoid comes out without phase shift.

    Args:
        signal: 1-D samples or a channels x samples matrix
        kernel: symmetric odd-length FIR kernel
        block_size: input samples per FFT block; defaults to an efficient size
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] < 1:
        raise FilterDesignError("cannot filter an empty signal")
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)

    n = x.shape[-1]
    taps = kernel.taps
    n_taps = taps.size
    delay = kernel.group_delay_samples
    padded = np.pad(x, ((0, 0), (delay, delay)), mode="reflect")
    m = padded.shape[-1]
    full_length = m + n_taps - 1

    if block_size is None:
        nfft = _default_fft_size(n_taps, m)
        block = max(1, nfft - n_taps + 1)
    else:
        if block_size < 1:
            raise FilterDesignError(f"block size must be positive, got {block_size}")
        block = min(int(block_size), m)
        nfft = sp_fft.next_fast_len(block + n_taps - 1, real=True)
    block = min(block, m)

    spectrum = sp_fft.rfft(taps, nfft)
    out = np.zeros((x.shape[0], full_length + nfft))
    for start in range(0, m, block):
        chunk = padded[:, start:start + block]
        piece = sp_fft.irfft(sp_fft.rfft(chunk, nfft, axis=-1) * spectrum, nfft, axis=-1)
        out[:, start:start + nfft] += piece

    result = out[:, 2 * delay:2 * delay + n]
    return result[0] if squeeze else result


def apply_kernel(samples: np.ndarray, kernel: FirKernel) -> np.ndarray:
    """Filter every channel of a channels x samples matrix"""
    return overlap_add_filter(np.asarray(samples, dtype=np.float64), kernel)
