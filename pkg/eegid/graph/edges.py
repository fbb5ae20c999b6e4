# ============================================================================
# FILE: eegid/graph/edges.py
# ============================================================================

from typing import Literal

from eegid.core.state import PipelineState


def should_tune(state: PipelineState) -> Literal["tune", "train"]:
    """Conditional edge: a zero budget trains with the configured hyperparameters as-is"""

    if state["settings"].TUNE_BUDGET > 0:
        return "tune"
    else:
        return "train"
