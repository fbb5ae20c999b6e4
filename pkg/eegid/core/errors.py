# ============================================================================
# FILE: eegid/core/errors.py
# ============================================================================

from typing import Optional


class EegIdError(Exception):
    """Base class for every error raised by the pipeline"""


class ConfigurationError(EegIdError):
    """Configuration file or settings value is invalid"""


class InvariantViolationError(EegIdError):
    """A domain object broke one of its invariants"""


class SessionFormatError(EegIdError):
    """A CEEG session file could not be decoded"""


class BadMagicError(SessionFormatError):
    pass


class UnsupportedVersionError(SessionFormatError):
    pass


class CorruptHeaderError(SessionFormatError):
    pass


class TruncatedPayloadError(SessionFormatError):
    pass


class NonFiniteAmplitudeError(SessionFormatError):
    pass


class ManifestError(EegIdError):
    """Dataset manifest is malformed or points at missing files"""


class SynthesisError(EegIdError):
    """Synthetic generator or fault injector received unusable parameters"""


class FilterDesignError(EegIdError):
    """Requested FIR design cannot be realized"""


class ChannelError(EegIdError):
    """Channel selection, montage lookup or channel count problem"""


class EpochError(EegIdError):
    pass


class FeatureError(EegIdError):
    pass


class TrainingError(EegIdError):
    pass


class SplitError(EegIdError):
    pass


class PipelineError(EegIdError):
    """Failure inside a pipeline stage, carrying the stage name"""

    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        self.stage = stage
        self.cause = cause
        detail = f"{type(cause).__name__}: {cause}" if cause is not None else "unknown failure"
        super().__init__(f"stage '{stage}' failed: {detail}")
