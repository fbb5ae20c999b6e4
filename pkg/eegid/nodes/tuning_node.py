# ============================================================================
# FILE: eegid/nodes/tuning_node.py
# ============================================================================

from pathlib import Path
from typing import Any, Dict

from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.model_store import save_params
from eegid.services.tuning_service import random_search_tune, save_trace, trace_path


class TuningNode(PipelineNode):
    """Seeded random search scored on the validation session"""

    stage = "tune"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        settings = state["settings"]
        kind = state["model_kind"]
        defaults = settings.svm_hyperparams() if kind == "svm" else settings.gbt_config()
        result = random_search_tune(kind, state["train"], state["val"], settings.TUNE_BUDGET, settings.SEED, defaults)

        params_file = Path(state["out_dir"]) / "params.json"
        save_params(kind, result.best_params, params_file, extra={
            "seed": result.seed,
            "budget": result.budget,
            "best_trial": result.best_trial,
            "best_val_accuracy": result.best_val_accuracy,
        })
        trace_file = save_trace(result, trace_path(params_file))

        state["tune_result"] = result
        state["params"] = dict(result.best_params)
        state["artifacts"]["params"] = params_file.name
        state["artifacts"]["trace"] = trace_file.name
        return {"budget": result.budget, "best_trial": result.best_trial,
                "best_val_accuracy": result.best_val_accuracy}
