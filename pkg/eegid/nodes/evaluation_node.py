# ============================================================================
# FILE: eegid/nodes/evaluation_node.py
# ============================================================================

import json
from pathlib import Path
from typing import Any, Dict

from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.metrics_service import metrics_service, save_report


class EvaluationNode(PipelineNode):
    """Score the held-out test session and write the report plus the run log"""

    stage = "evaluate"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        settings = state["settings"]
        tuning = state["tune_result"]
        report = metrics_service.evaluate(
            state["model"],
            state["test"],
            split=state["split"],
            seed=settings.SEED,
            model_provenance={
                "tuning": None if tuning is None else {
                    "budget": tuning.budget,
                    "best_trial": tuning.best_trial,
                    "best_val_accuracy": tuning.best_val_accuracy,
                },
                "fold_validation": settings.FOLD_VALIDATION,
            },
        )
        out_dir = Path(state["out_dir"])
        save_report(report, out_dir / "report.json")
        state["report"] = report
        state["artifacts"]["report"] = "report.json"
        summary = {"accuracy": report.accuracy, "macro_precision": report.macro_precision,
                   "macro_recall": report.macro_recall, "n_test": report.n_test}
        write_run_log(state, out_dir / "run_log.json", final=summary)
        return summary


def write_run_log(state: PipelineState, path: Path, final: Dict[str, Any]) -> Path:
    """Seeds, every setting, the ledger and per-stage summaries; no timestamps"""
    settings = state["settings"]
    document = {
        "seeds": {"global": settings.SEED, "tuning": settings.SEED, "synthesis": settings.SEED},
        "feature_set": state["feature_set"],
        "model": state["model_kind"],
        "settings": settings.model_dump(mode="json"),
        "ledger": settings.ledger(),
        "stages": state["stage_log"] + [{"stage": EvaluationNode.stage, **final}],
        "artifacts": dict(state["artifacts"], run_log=path.name),
    }
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    state["artifacts"]["run_log"] = path.name
    return path
