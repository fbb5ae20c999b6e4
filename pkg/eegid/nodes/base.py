# ============================================================================
# FILE: eegid/nodes/base.py
# ============================================================================

from typing import Any, Dict

from eegid.core.errors import PipelineError
from eegid.core.state import PipelineState
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class PipelineNode:
    """A pipeline stage; failures surface as PipelineError tagged with the stage name"""

    stage = "stage"

    def execute(self, state: PipelineState) -> PipelineState:
        logger.info(f"[{self.stage}] starting")
        try:
            summary = self.run(state)
        except PipelineError:
            raise
        except Exception as e:
            logger.error(f"[{self.stage}] failed: {e}")
            raise PipelineError(self.stage, e) from e
        state["stage_log"].append({"stage": self.stage, **summary})
        logger.info(f"[{self.stage}] done")
        return state

    def run(self, state: PipelineState) -> Dict[str, Any]:
        """Mutate the state in place and return a short summary for the run log"""
        raise NotImplementedError
