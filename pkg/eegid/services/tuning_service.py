# ============================================================================
# FILE: eegid/services/tuning_service.py
# ============================================================================

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from eegid.core.errors import SplitError, TrainingError
from eegid.core.models import FeatureMatrix
from eegid.services.boosting_service import GbtConfig, gbt_predict_batch, gbt_train
from eegid.services.feature_service import apply_standardizer, fit_standardizer
from eegid.services.svm_service import (
    GramCache,
    SvmHyperparams,
    ovo_decisions_from_kernel,
    ovo_train,
    ovo_vote,
    rbf_from_distances,
    squared_distances,
)
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


def sample_svm_params(rng: np.random.Generator) -> Dict[str, Any]:
    """C log-uniform on [1e-2, 1e3], sigma log-uniform on [1e-1, 1e2]"""
    C = float(10.0 ** rng.uniform(-2.0, 3.0))
    sigma = float(10.0 ** rng.uniform(-1.0, 2.0))
    return {"C": C, "sigma": sigma}


def sample_gbt_params(rng: np.random.Generator) -> Dict[str, Any]:
    """eta uniform on [0.01, 0.3], depth 2..6, rounds 50..400, lambda log-uniform on [1e-2, 10]"""
    learning_rate = float(rng.uniform(0.01, 0.3))
    max_depth = int(rng.integers(2, 7))
    n_rounds = int(rng.integers(50, 401))
    reg_lambda = float(10.0 ** rng.uniform(-2.0, 1.0))
    return {"learning_rate": learning_rate, "max_depth": max_depth, "n_rounds": n_rounds, "reg_lambda": reg_lambda}


SEARCH_SPACES: Dict[str, Callable[[np.random.Generator], Dict[str, Any]]] = {
    "svm": sample_svm_params,
    "gbt": sample_gbt_params,
}


class TrialRecord(BaseModel):
    trial: int
    params: Dict[str, Any]
    val_accuracy: float


class TuneResult(BaseModel):
    model: str
    seed: int
    budget: int
    best_params: Dict[str, Any]
    best_val_accuracy: float
    best_trial: int
    trace: List[TrialRecord] = Field(default_factory=list)


class _SvmEvaluator:
    """Shares train distances and validation-to-train distances across draws"""

    def __init__(self, X_train: np.ndarray, y_train: np.ndarray, X_val: np.ndarray, y_val: np.ndarray,
                 defaults: SvmHyperparams):
        self.y_train, self.y_val, self.defaults = y_train, y_val, defaults
        self.cache = GramCache(X_train)
        self.val_sq_dist = squared_distances(X_val, X_train)

    def __call__(self, params: Dict[str, Any]) -> float:
        hp = self.defaults.model_copy(update=params)
        model = ovo_train(self.cache.X, self.y_train, hp, cache=self.cache)
        pool_kernel = rbf_from_distances(self.val_sq_dist[:, model.support_rows], hp.sigma)
        predictions, _ = ovo_vote(model, ovo_decisions_from_kernel(model, pool_kernel))
        return float(np.mean(predictions == self.y_val))


class _GbtEvaluator:
    def __init__(self, X_train: np.ndarray, y_train: np.ndarray, X_val: np.ndarray, y_val: np.ndarray,
                 defaults: GbtConfig):
        self.X_train, self.y_train, self.X_val, self.y_val, self.defaults = X_train, y_train, X_val, y_val, defaults

    def __call__(self, params: Dict[str, Any]) -> float:
        config = self.defaults.model_copy(update=params)
        model = gbt_train(self.X_train, self.y_train, config)
        return float(np.mean(gbt_predict_batch(model, self.X_val) == self.y_val))


def random_search_tune(
    model: str,
    train: FeatureMatrix,
    val: FeatureMatrix,
    budget: int,
    seed: int,
    defaults: Optional[Union[SvmHyperparams, GbtConfig]] = None,
) -> TuneResult:
    """
    Seeded random search; the draw with the highest validation accuracy wins,
    the earliest one on ties. Standardization uses training rows only.
    """
    if model not in SEARCH_SPACES:
        raise TrainingError(f"unknown model {model!r}")
    if budget < 1:
        raise TrainingError(f"tuning budget must be at least 1, got {budget}")
    if train.n_rows == 0 or val.n_rows == 0:
        raise SplitError("empty split: tuning needs training and validation rows")

    standardizer = fit_standardizer(train)
    X_train = apply_standardizer(standardizer, train).values
    X_val = apply_standardizer(standardizer, val).values
    if model == "svm":
        evaluate = _SvmEvaluator(X_train, train.subject_labels, X_val, val.subject_labels,
                                 defaults if isinstance(defaults, SvmHyperparams) else SvmHyperparams())
    else:
        evaluate = _GbtEvaluator(X_train, train.subject_labels, X_val, val.subject_labels,
                                 defaults if isinstance(defaults, GbtConfig) else GbtConfig())

    rng = np.random.default_rng(seed)
    sampler = SEARCH_SPACES[model]
    trace: List[TrialRecord] = []
    best: Optional[TrialRecord] = None
    logger.info(f"Tuning {model}: budget {budget}, seed {seed}, {train.n_rows} train / {val.n_rows} val rows")
    for trial in range(budget):
        params = sampler(rng)
        accuracy = evaluate(params)
        record = TrialRecord(trial=trial, params=params, val_accuracy=accuracy)
        trace.append(record)
        if best is None or accuracy > best.val_accuracy:
            best = record
        logger.debug(f"  trial {trial}: {params} -> val accuracy {accuracy:.4f}")

    logger.info(f"Best {model} draw #{best.trial}: {best.params} (val accuracy {best.val_accuracy:.4f})")
    return TuneResult(model=model, seed=seed, budget=budget, best_params=best.params,
                      best_val_accuracy=best.val_accuracy, best_trial=best.trial, trace=trace)


def trace_frame(result: TuneResult) -> pd.DataFrame:
    rows = [{"trial": r.trial, **r.params, "val_accuracy": r.val_accuracy} for r in result.trace]
    return pd.DataFrame(rows)


def trace_path(params_path: PathLike) -> Path:
    path = Path(params_path)
    return path.with_name(path.stem + ".trace.csv")


def save_trace(result: TuneResult, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(result).to_csv(target, index=False, float_format="%.17g", lineterminator="\n")
    return target
