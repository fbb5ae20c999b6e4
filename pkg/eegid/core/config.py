# ============================================================================
# FILE: eegid/core/config.py
# ============================================================================

from pathlib import Path
from typing import Annotated, Any, List, Optional, Union

from dotenv import dotenv_values
from pydantic import field_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from eegid.core.errors import ConfigurationError


def _split_ints(value: Any) -> Any:
    if isinstance(value, str):
        return [int(part) for part in value.replace(" ", "").split(",") if part]
    if isinstance(value, int):
        return [value]
    return value


class Settings(BaseSettings):
    """System configuration, one flat KEY=value namespace"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Reproducibility
    SEED: int = 42

    # Synthetic acquisition protocol
    N_SUBJECTS: int = 11
    N_CHANNELS: int = 30
    TRIALS_PER_SESSION: Annotated[List[int], NoDecode] = [100, 100, 100, 50, 50]
    SAMPLING_RATE_HZ: float = 250.0
    BAD_TRIAL_PROBABILITY: float = 0.01
    LINE_NOISE_HZ: float = 50.0
    LINE_NOISE_AMPLITUDE_UV: float = 10.0
    SENSOR_NOISE_UV: float = 1.0
    SIGNAL_RMS_UV: float = 20.0
    SESSION_GAIN_DRIFT: float = 0.05

    # Filtering
    NOTCH_BASE_HZ: float = 50.0
    NOTCH_WIDTH_HZ: float = 1.0
    NOTCH_TRANSITION_HZ: float = 1.0
    BANDPASS_LOW_HZ: float = 3.0
    BANDPASS_HIGH_HZ: float = 45.0
    BANDPASS_TRANSITION_HZ: float = 2.0
    FIR_WINDOW: str = "hamming"

    # Bad channels and interpolation
    BAD_WINDOW_S: float = 1.0
    BAD_CORRELATION_THRESHOLD: float = 0.4
    BAD_FRACTION_THRESHOLD: float = 0.02
    SPLINE_STIFFNESS: int = 4
    SPLINE_LEGENDRE_TERMS: int = 50
    SPLINE_REGULARIZATION: float = 1e-5

    # Epochs and features
    EPOCH_WINDOW_S: float = 2.0
    EPOCH_OFFSET_S: float = 0.0
    WAVELET_FAMILY: str = "db4"
    WAVELET_LEVELS: int = 5
    WAVELET_MODE: str = "periodization"
    FEATURE_SET: str = "wavelet"

    # Evaluation protocol
    MODEL: str = "svm"
    TRAIN_SESSIONS: Annotated[List[int], NoDecode] = [1, 2, 3]
    VAL_SESSIONS: Annotated[List[int], NoDecode] = [4]
    TEST_SESSIONS: Annotated[List[int], NoDecode] = [5]
    FOLD_VALIDATION: bool = False
    TUNE_BUDGET: int = 50

    # SVM
    SVM_C: float = 1.0
    SVM_SIGMA: float = 10.0
    SVM_TOL: float = 1e-3
    SVM_MAX_PASSES: int = 50

    # Gradient boosting
    GBT_ROUNDS: int = 100
    GBT_LEARNING_RATE: float = 0.1
    GBT_MAX_DEPTH: int = 3
    GBT_MIN_CHILD_WEIGHT: float = 1.0
    GBT_LAMBDA: float = 1.0
    GBT_GAMMA: float = 0.0

    LOG_LEVEL: str = "INFO"

    @field_validator("TRIALS_PER_SESSION", "TRAIN_SESSIONS", "VAL_SESSIONS", "TEST_SESSIONS", mode="before")
    @classmethod
    def _parse_int_lists(cls, value: Any) -> Any:
        return _split_ints(value)

    def synth_config(self):
        from eegid.services.synth_service import SynthConfig

        return SynthConfig(
            n_subjects=self.N_SUBJECTS,
            trials_per_session=self.TRIALS_PER_SESSION,
            fs=self.SAMPLING_RATE_HZ,
            n_channels=self.N_CHANNELS,
            bad_trial_probability=self.BAD_TRIAL_PROBABILITY,
            line_noise_hz=self.LINE_NOISE_HZ,
            line_noise_amplitude_uv=self.LINE_NOISE_AMPLITUDE_UV,
            sensor_noise_uv=self.SENSOR_NOISE_UV,
            signal_rms_uv=self.SIGNAL_RMS_UV,
            session_gain_drift=self.SESSION_GAIN_DRIFT,
            seed=self.SEED,
        )

    def preprocessing_config(self, fs: Optional[float] = None):
        from eegid.services.channel_service import BadChannelConfig, SplineConfig
        from eegid.services.filter_service import BandpassSpec, NotchSpec
        from eegid.services.preprocess_service import PreprocessingConfig

        rate = fs if fs is not None else self.SAMPLING_RATE_HZ
        return PreprocessingConfig(
            notch=NotchSpec(
                base_hz=self.NOTCH_BASE_HZ,
                notch_width_hz=self.NOTCH_WIDTH_HZ,
                transition_hz=self.NOTCH_TRANSITION_HZ,
                window=self.FIR_WINDOW,
                fs=rate,
            ),
            bandpass=BandpassSpec(
                low_hz=self.BANDPASS_LOW_HZ,
                high_hz=self.BANDPASS_HIGH_HZ,
                transition_hz=self.BANDPASS_TRANSITION_HZ,
                window=self.FIR_WINDOW,
                fs=rate,
            ),
            bad_channels=BadChannelConfig(
                window_s=self.BAD_WINDOW_S,
                correlation_threshold=self.BAD_CORRELATION_THRESHOLD,
                bad_fraction_threshold=self.BAD_FRACTION_THRESHOLD,
            ),
            spline=SplineConfig(
                stiffness_m=self.SPLINE_STIFFNESS,
                n_legendre_terms=self.SPLINE_LEGENDRE_TERMS,
                regularization=self.SPLINE_REGULARIZATION,
            ),
        )

    def wavelet_config(self):
        from eegid.services.feature_service import WaveletConfig

        return WaveletConfig(family=self.WAVELET_FAMILY, levels=self.WAVELET_LEVELS, extension=self.WAVELET_MODE)

    def split_spec(self):
        from eegid.core.models import SplitSpec

        return SplitSpec(
            train_sessions=self.TRAIN_SESSIONS,
            val_sessions=self.VAL_SESSIONS,
            test_sessions=self.TEST_SESSIONS,
        )

    def svm_hyperparams(self):
        from eegid.services.svm_service import SvmHyperparams

        return SvmHyperparams(C=self.SVM_C, sigma=self.SVM_SIGMA, tol=self.SVM_TOL, max_passes=self.SVM_MAX_PASSES)

    def gbt_config(self):
        from eegid.services.boosting_service import GbtConfig

        return GbtConfig(
            n_rounds=self.GBT_ROUNDS,
            learning_rate=self.GBT_LEARNING_RATE,
            max_depth=self.GBT_MAX_DEPTH,
            min_child_weight=self.GBT_MIN_CHILD_WEIGHT,
            reg_lambda=self.GBT_LAMBDA,
            gamma=self.GBT_GAMMA,
        )

    def ledger(self) -> dict:
        """Settings that encode decisions the recording protocol leaves open"""
        return {
            "notch_width_hz": self.NOTCH_WIDTH_HZ,
            "spline": {
                "stiffness_m": self.SPLINE_STIFFNESS,
                "n_legendre_terms": self.SPLINE_LEGENDRE_TERMS,
                "regularization": self.SPLINE_REGULARIZATION,
            },
            "epoch": {"window_s": self.EPOCH_WINDOW_S, "offset_s": self.EPOCH_OFFSET_S},
            "wavelet": {
                "family": self.WAVELET_FAMILY,
                "levels": self.WAVELET_LEVELS,
                "extension": self.WAVELET_MODE,
                "padding": "zero-pad to a multiple of 2**levels",
            },
            "standardization": "z-score with training-session statistics",
            "svm_margin": "soft margin, C tuned on validation session",
            "boosting_objective": "softmax cross-entropy, second-order leaf weights",
            "tuning": "seeded random search",
            "metric_averaging": "macro",
            "fold_validation": self.FOLD_VALIDATION,
        }


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Build settings from the environment plus an optional KEY=value file"""
    if path is None:
        return Settings()
    config_path = Path(path)
    if not config_path.is_file():
        raise FileNotFoundError(f"config file not found: {config_path}")
    unknown = sorted(set(dotenv_values(config_path)) - set(Settings.model_fields))
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    return Settings(_env_file=config_path)


settings = Settings()
