# ============================================================================
# FILE: eegid/core/protocol.py
# ============================================================================

from typing import Dict, List, Optional

from eegid.core.models import LabelEntry


# Five Persian words, ids follow the response-key order Left/Right/Forward/Backward/Stop
WORD_VOCABULARY: List[LabelEntry] = [
    LabelEntry(id=0, word="/tʃæp/", english_equivalent="Left"),
    LabelEntry(id=1, word="/rɑːst/", english_equivalent="Right"),
    LabelEntry(id=2, word="/dʒelo/", english_equivalent="Forward"),
    LabelEntry(id=3, word="/æɢæb/", english_equivalent="Backward"),
    LabelEntry(id=4, word="/ist/", english_equivalent="Stop"),
]

PARTICIPANTS: List[Dict[str, object]] = [
    {"id": "Sub-01", "gender": "male", "age": 23},
    {"id": "Sub-02", "gender": "male", "age": 24},
    {"id": "Sub-03", "gender": "male", "age": 22},
    {"id": "Sub-04", "gender": "male", "age": 24},
    {"id": "Sub-05", "gender": "male", "age": 21},
    {"id": "Sub-06", "gender": "male", "age": 21},
    {"id": "Sub-07", "gender": "male", "age": 24},
    {"id": "Sub-08", "gender": "female", "age": 27},
    {"id": "Sub-09", "gender": "female", "age": 28},
    {"id": "Sub-10", "gender": "female", "age": 21},
    {"id": "Sub-11", "gender": "female", "age": 27},
]

# Per-session trial counts of the recording protocol
PROTOCOL_TRIALS_PER_SESSION: List[int] = [100, 100, 100, 50, 50]

# Fixed trial phases in seconds; pre-fixation is drawn uniformly from this range
PRE_FIXATION_RANGE_S = (1.0, 2.0)
IMAGERY_S = 2.0
END_FIXATION_S = 1.0


def subject_id(index: int) -> str:
    """Zero-based subject index -> 'Sub-NN'"""
    return f"Sub-{index + 1:02d}"


def participant_info(index: int) -> Dict[str, Optional[object]]:
    """Participant row for a zero-based index; subjects past the table get no demographics"""
    if index < len(PARTICIPANTS):
        return dict(PARTICIPANTS[index])
    return {"id": subject_id(index), "gender": None, "age": None}


def imagery_onset(n_samples: int, sampling_rate_hz: float) -> int:
    """Sample index where imagery starts: trials end with the imagery and end-fixation phases"""
    tail = int(round((IMAGERY_S + END_FIXATION_S) * sampling_rate_hz))
    return max(0, n_samples - tail)
