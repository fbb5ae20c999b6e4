# ============================================================================
# FILE: eegid/nodes/training_node.py
# ============================================================================

from pathlib import Path
from typing import Any, Dict

import numpy as np

from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.model_store import save_model, train_model
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class TrainingNode(PipelineNode):
    """Final fit on the training sessions, optionally folding the validation session in"""

    stage = "train"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        settings = state["settings"]
        kind = state["model_kind"]
        defaults = settings.svm_hyperparams() if kind == "svm" else settings.gbt_config()

        if settings.FOLD_VALIDATION:
            split = state["split"]
            features = state["features"]
            sessions = list(split.train_sessions) + list(split.val_sessions)
            train = features.select_rows(np.isin(features.session_indices, sessions))
            standardizer = None
            logger.info(f"  folding validation sessions {split.val_sessions} into training")
        else:
            train = state["train"]
            standardizer = state["standardizer"]

        model = train_model(kind, train, state["params"], defaults, standardizer)
        target = save_model(model, Path(state["out_dir"]) / "model.json")
        state["model"] = model
        state["artifacts"]["model"] = target.name
        return {"model": kind, "rows": train.n_rows, "params": model.params}
