# ============================================================================
# FILE: eegid/services/benchmark_service.py
# ============================================================================

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from eegid.core.config import Settings
from eegid.core.models import FeatureMatrix
from eegid.core.state import create_initial_state
from eegid.graph.workflow import PipelineWorkflow
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

BENCHMARK_FEATURE_SETS = ("statistical", "wavelet")
BENCHMARK_MODELS = ("svm", "gbt")
BENCHMARK_COLUMNS = ["feature_set", "model", "accuracy", "macro_precision", "macro_recall",
                     "best_val_accuracy", "n_test"]


def run_benchmark(
    manifest_path: Union[str, Path],
    settings: Settings,
    out_dir: Union[str, Path],
    feature_sets: Sequence[str] = BENCHMARK_FEATURE_SETS,
    models: Sequence[str] = BENCHMARK_MODELS,
) -> pd.DataFrame:
    """
    Feature set x classifier grid, each cell tuned on the validation session and
    scored on the test session. Features are extracted once per set. Each cell
    keeps its full pipeline artifacts under out_dir/<set>-<model>/.
    """
    root = Path(out_dir)
    workflow = PipelineWorkflow()
    rows: List[Dict[str, object]] = []
    for feature_set in feature_sets:
        features: Optional[FeatureMatrix] = None
        for model in models:
            cell = root / f"{feature_set}-{model}"
            logger.info(f"Benchmark cell {feature_set} + {model}")
            state = workflow.run(create_initial_state(settings, manifest_path, cell, feature_set, model, features))
            features, report = state["features"], state["report"]
            tuning = report.model_provenance.get("tuning") or {}
            rows.append({
                "feature_set": feature_set,
                "model": model,
                "accuracy": report.accuracy,
                "macro_precision": report.macro_precision,
                "macro_recall": report.macro_recall,
                "best_val_accuracy": tuning.get("best_val_accuracy"),
                "n_test": report.n_test,
            })

    table = pd.DataFrame(rows, columns=BENCHMARK_COLUMNS)
    root.mkdir(parents=True, exist_ok=True)
    table.to_csv(root / "benchmark.csv", index=False, float_format="%.6f", lineterminator="\n")
    logger.info(f"Benchmark table written to {root / 'benchmark.csv'}")
    return table
