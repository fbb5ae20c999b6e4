# ============================================================================
# FILE: eegid/services/model_store.py
# ============================================================================

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from eegid.core.errors import TrainingError
from eegid.core.models import FeatureMatrix
from eegid.services.boosting_service import GbtConfig, GbtModel, gbt_predict_batch, gbt_train
from eegid.services.feature_service import Standardizer, apply_standardizer, fit_standardizer
from eegid.services.svm_service import (
    OvoSvmModel,
    SvmHyperparams,
    ovo_predict_batch,
    ovo_train,
    svm_model_document,
    svm_model_from_document,
)
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
MODEL_FORMAT = "eegid-model"
MODEL_VERSION = 1
MODEL_KINDS = ("svm", "gbt")


class TrainedModel(BaseModel):
    """A fitted classifier bundled with the standardizer and feature layout it expects"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["svm", "gbt"]
    params: Dict[str, Any]
    estimator: Union[OvoSvmModel, GbtModel]
    standardizer: Standardizer
    feature_names: List[str] = Field(..., description="Raw input columns, before standardization")
    subject_ids: List[str] = Field(default_factory=list)
    feature_set: str = "wavelet"
    training: Dict[str, Any] = Field(default_factory=dict)

    @property
    def classes(self) -> List[int]:
        return list(self.estimator.classes)


def hyperparams_for(kind: str, params: Optional[Dict[str, Any]] = None,
                    defaults: Optional[Union[SvmHyperparams, GbtConfig]] = None) -> Union[SvmHyperparams, GbtConfig]:
    """Overlay tuned values on the configured defaults"""
    if kind not in MODEL_KINDS:
        raise TrainingError(f"unknown model {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    base = defaults if defaults is not None else (SvmHyperparams() if kind == "svm" else GbtConfig())
    try:
        return type(base).model_validate({**base.model_dump(), **dict(params or {})})
    except ValidationError as e:
        raise TrainingError(f"invalid {kind} parameters: {e.errors()[0]['msg']}") from e


def fit_estimator(kind: str, X: np.ndarray, y: np.ndarray, hp: Union[SvmHyperparams, GbtConfig]):
    if kind == "svm":
        return ovo_train(X, y, hp)
    return gbt_train(X, y, hp)


def predict_standardized(estimator: Union[OvoSvmModel, GbtModel], X: np.ndarray) -> np.ndarray:
    if isinstance(estimator, OvoSvmModel):
        return ovo_predict_batch(estimator, X)
    return gbt_predict_batch(estimator, X)


def train_model(kind: str, train: FeatureMatrix, params: Optional[Dict[str, Any]] = None,
                defaults: Optional[Union[SvmHyperparams, GbtConfig]] = None,
                standardizer: Optional[Standardizer] = None) -> TrainedModel:
    """Standardize with training statistics, then fit the requested classifier"""
    if train.n_rows == 0:
        raise TrainingError("empty training split")
    hp = hyperparams_for(kind, params, defaults)
    standardizer = standardizer or fit_standardizer(train)
    X = apply_standardizer(standardizer, train).values
    logger.info(f"Training {kind} on {train.n_rows} rows x {X.shape[1]} features")
    estimator = fit_estimator(kind, X, train.subject_labels, hp)
    return TrainedModel(
        kind=kind,
        params=hp.model_dump(),
        estimator=estimator,
        standardizer=standardizer,
        feature_names=list(train.feature_names),
        subject_ids=list(train.subject_ids),
        feature_set=train.feature_set,
        training={
            "sessions": sorted({int(s) for s in train.session_indices}),
            "n_rows": train.n_rows,
        },
    )


def predict(model: TrainedModel, features: FeatureMatrix) -> np.ndarray:
    """Class ids for raw (unstandardized) feature rows"""
    if list(features.feature_names) != model.feature_names:
        raise TrainingError(
            f"feature layout mismatch: model expects {len(model.feature_names)} named columns, "
            f"got {features.n_features}"
        )
    if features.n_rows == 0:
        return np.zeros(0, dtype=np.int64)
    X = apply_standardizer(model.standardizer, features).values
    return predict_standardized(model.estimator, X)


def model_document(model: TrainedModel) -> Dict[str, Any]:
    estimator = model.estimator
    if isinstance(estimator, OvoSvmModel):
        body = svm_model_document(estimator)
    else:
        body = estimator.model_dump()
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "params": model.params,
        "feature_set": model.feature_set,
        "feature_names": model.feature_names,
        "subject_ids": model.subject_ids,
        "standardizer": model.standardizer.model_dump(),
        "training": model.training,
        "model": body,
    }


def model_from_document(document: Dict[str, Any]) -> TrainedModel:
    if document.get("format") != MODEL_FORMAT:
        raise TrainingError("not an eegid model document")
    if document.get("version") != MODEL_VERSION:
        raise TrainingError(f"unsupported model document version {document.get('version')}")
    kind = document["kind"]
    try:
        if kind == "svm":
            estimator = svm_model_from_document(document["model"])
        elif kind == "gbt":
            estimator = GbtModel.model_validate(document["model"])
        else:
            raise TrainingError(f"unknown model kind {kind!r}")
        return TrainedModel(
            kind=kind,
            params=document["params"],
            estimator=estimator,
            standardizer=Standardizer.model_validate(document["standardizer"]),
            feature_names=document["feature_names"],
            subject_ids=document.get("subject_ids", []),
            feature_set=document.get("feature_set", "wavelet"),
            training=document.get("training", {}),
        )
    except (KeyError, ValidationError) as e:
        raise TrainingError(f"malformed model document: {e}") from e


def dumps_model(model: TrainedModel) -> str:
    return json.dumps(model_document(model), indent=2, sort_keys=True) + "\n"


def save_model(model: TrainedModel, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps_model(model), encoding="utf-8")
    logger.info(f"Model saved to {target}")
    return target


def load_model(path: PathLike) -> TrainedModel:
    source = Path(path)
    try:
        document = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TrainingError(f"model file {source} is not valid JSON: {e}") from e
    return model_from_document(document)


def save_params(kind: str, params: Dict[str, Any], path: PathLike, extra: Optional[Dict[str, Any]] = None) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    document = {"model": kind, "params": params, **(extra or {})}
    target.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_params(path: PathLike) -> Dict[str, Any]:
    """{"model": kind, "params": {...}}; a bare parameter object is accepted too"""
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if "params" in document:
        return document
    return {"model": None, "params": document}
