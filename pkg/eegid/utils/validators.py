# ============================================================================
# FILE: eegid/utils/validators.py
# ============================================================================

from typing import List, Tuple

from eegid.core.config import Settings
from eegid.core.models import DatasetManifest


class InputValidator:
    """Validate command inputs before any work starts"""

    VALID_FEATURE_SETS = ["statistical", "wavelet", "both"]
    VALID_MODELS = ["svm", "gbt"]

    @staticmethod
    def validate_feature_set(name: str) -> Tuple[bool, str]:
        if name not in InputValidator.VALID_FEATURE_SETS:
            return False, f"Feature set must be one of: {', '.join(InputValidator.VALID_FEATURE_SETS)}"
        return True, "Feature set valid"

    @staticmethod
    def validate_model(name: str) -> Tuple[bool, str]:
        if name not in InputValidator.VALID_MODELS:
            return False, f"Model must be one of: {', '.join(InputValidator.VALID_MODELS)}"
        return True, "Model valid"

    @staticmethod
    def validate_trial_counts(counts: List[int]) -> Tuple[bool, str]:
        if not 1 <= len(counts) <= 5:
            return False, "Trial counts must list between 1 and 5 sessions"
        if any(count < 1 for count in counts):
            return False, "Every session needs at least one trial"
        return True, "Trial counts valid"

    @staticmethod
    def validate_settings(settings: Settings) -> Tuple[bool, str]:
        """Cross-field checks pydantic cannot express per field"""

        # Split sets
        train, val, test = set(settings.TRAIN_SESSIONS), set(settings.VAL_SESSIONS), set(settings.TEST_SESSIONS)
        if not train or not val or not test:
            return False, "Train, validation and test session sets must be non-empty"
        if train & val or train & test or val & test:
            return False, "Train, validation and test session sets must be pairwise disjoint"

        ok, message = InputValidator.validate_feature_set(settings.FEATURE_SET)
        if not ok:
            return ok, message
        ok, message = InputValidator.validate_model(settings.MODEL)
        if not ok:
            return ok, message

        if settings.TUNE_BUDGET < 0:
            return False, "TUNE_BUDGET must be zero (no tuning) or positive"
        if settings.N_SUBJECTS < 2:
            return False, "Identification needs at least 2 subjects"
        if settings.BANDPASS_LOW_HZ >= settings.BANDPASS_HIGH_HZ:
            return False, "BANDPASS_LOW_HZ must be below BANDPASS_HIGH_HZ"
        if settings.BANDPASS_HIGH_HZ >= settings.SAMPLING_RATE_HZ / 2:
            return False, "BANDPASS_HIGH_HZ must be below Nyquist"

        return True, "Configuration valid"

    @staticmethod
    def validate_split_coverage(settings: Settings, manifest: DatasetManifest) -> Tuple[bool, str]:
        """Every manifest session must fall into one of the three split sets"""
        covered = set(settings.TRAIN_SESSIONS) | set(settings.VAL_SESSIONS) | set(settings.TEST_SESSIONS)
        present = sorted({entry.index for subject in manifest.subjects for entry in subject.sessions})
        stray = [index for index in present if index not in covered]
        if stray:
            return False, f"Sessions {stray} are outside the train/validation/test sets"
        if not set(settings.TEST_SESSIONS) & set(present):
            return False, "test session absent from manifest"
        return True, "Split covers the manifest"
