# ============================================================================
# FILE: eegid/nodes/standardize_node.py
# ============================================================================

from typing import Any, Dict

from eegid.core.errors import SplitError
from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.feature_service import fit_standardizer
from eegid.services.metrics_service import session_split
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class StandardizeNode(PipelineNode):
    """Session split, then z-score statistics from training rows only"""

    stage = "standardize"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        train, val, test = session_split(state["features"], state["split"])
        if test.n_rows == 0:
            raise SplitError("test session absent: no usable test rows after bad-trial removal")
        standardizer = fit_standardizer(train)
        state["train"], state["val"], state["test"] = train, val, test
        state["standardizer"] = standardizer
        logger.info(f"  {train.n_rows} train / {val.n_rows} val / {test.n_rows} test rows, "
                    f"{len(standardizer.dropped_indices)} constant columns dropped")
        return {
            "train_rows": train.n_rows,
            "val_rows": val.n_rows,
            "test_rows": test.n_rows,
            "dropped_columns": len(standardizer.dropped_indices),
        }
