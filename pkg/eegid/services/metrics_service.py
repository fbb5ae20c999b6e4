# ============================================================================
# FILE: eegid/services/metrics_service.py
# ============================================================================

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_score, recall_score

from eegid.core.errors import SplitError
from eegid.core.models import EvalReport, FeatureMatrix, SplitSpec
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


def session_split(features: FeatureMatrix, spec: SplitSpec) -> Tuple[FeatureMatrix, FeatureMatrix, FeatureMatrix]:
    """Partition rows by recording session; row order is kept inside each split"""
    sessions = features.session_indices
    covered = set(spec.train_sessions) | set(spec.val_sessions) | set(spec.test_sessions)
    stray = sorted({int(s) for s in sessions} - covered)
    if stray:
        raise SplitError(f"session index outside all sets: {stray}")
    train = features.select_rows(np.isin(sessions, spec.train_sessions))
    val = features.select_rows(np.isin(sessions, spec.val_sessions))
    test = features.select_rows(np.isin(sessions, spec.test_sessions))
    logger.debug(f"Split: {train.n_rows} train / {val.n_rows} val / {test.n_rows} test rows")
    return train, val, test


class MetricsService:
    """Confusion matrix and macro-averaged identification metrics"""

    def confusion_matrix(self, y_true: Sequence[int], y_pred: Sequence[int],
                         labels: Optional[Sequence[int]] = None) -> Tuple[List[int], np.ndarray]:
        """Rows are true classes, columns predicted; labels default to the sorted union"""
        true = np.asarray(y_true, dtype=np.int64)
        pred = np.asarray(y_pred, dtype=np.int64)
        if true.shape != pred.shape:
            raise ValueError("y_true and y_pred must have the same length")
        if labels is None:
            labels = sorted({int(v) for v in true} | {int(v) for v in pred})
        labels = [int(label) for label in labels]
        return labels, confusion_matrix(true, pred, labels=labels).astype(np.int64)

    def per_class_scores(self, y_true: Sequence[int], y_pred: Sequence[int],
                         labels: Sequence[int]) -> Tuple[List[float], List[float], List[str]]:
        """Undefined precision or recall counts as 0 and is reported"""
        true = np.asarray(y_true, dtype=np.int64)
        pred = np.asarray(y_pred, dtype=np.int64)
        labels = list(labels)
        precision = precision_score(true, pred, labels=labels, average=None, zero_division=0)
        recall = recall_score(true, pred, labels=labels, average=None, zero_division=0)

        warnings: List[str] = []
        for label in labels:
            if not np.any(pred == label):
                warnings.append(f"precision undefined for class {label} (never predicted); set to 0")
            if not np.any(true == label):
                warnings.append(f"recall undefined for class {label} (absent from test rows); set to 0")
        return [float(p) for p in precision], [float(r) for r in recall], warnings

    def build_report(
        self,
        y_true: Sequence[int],
        y_pred: Sequence[int],
        split: SplitSpec,
        class_names: Optional[Sequence[str]] = None,
        known_classes: Optional[Sequence[int]] = None,
        labels: Optional[Sequence[int]] = None,
        model_provenance: Optional[Dict[str, Any]] = None,
        feature_provenance: Optional[Dict[str, Any]] = None,
        seed: int = 0,
    ) -> EvalReport:
        if len(y_true) == 0:
            raise SplitError("empty test split")
        labels, confusion = self.confusion_matrix(y_true, y_pred, labels)
        precision, recall, warnings = self.per_class_scores(y_true, y_pred, labels)
        for message in warnings:
            logger.warning(message)

        unseen: List[int] = []
        if known_classes is not None:
            known = {int(c) for c in known_classes}
            unseen = sorted({int(t) for t in y_true} - known)
            if unseen:
                message = f"test classes never seen in training: {unseen} (their rows count as errors)"
                logger.warning(message)
                warnings.append(message)

        names = list(class_names or [])
        return EvalReport(
            labels=labels,
            class_names=[names[label] if 0 <= label < len(names) else str(label) for label in labels],
            confusion=confusion.tolist(),
            accuracy=float(accuracy_score(y_true, y_pred)),
            macro_precision=float(np.mean(precision)),
            macro_recall=float(np.mean(recall)),
            per_class_precision=precision,
            per_class_recall=recall,
            n_test=int(confusion.sum()),
            split=split,
            model_provenance=dict(model_provenance or {}),
            feature_provenance=dict(feature_provenance or {}),
            unseen_classes=unseen,
            warnings=warnings,
            seed=seed,
        )

    def evaluate(self, model, test: FeatureMatrix, split: Optional[SplitSpec] = None, seed: int = 0,
                 model_provenance: Optional[Dict[str, Any]] = None) -> EvalReport:
        """Score a trained model on raw test features"""
        from eegid.services.model_store import predict

        if test.n_rows == 0:
            raise SplitError("empty test split")
        predictions = predict(model, test)
        provenance = {"kind": model.kind, "params": model.params, "training": model.training}
        provenance.update(model_provenance or {})
        report = self.build_report(
            test.subject_labels,
            predictions,
            split or SplitSpec(),
            class_names=model.subject_ids or test.subject_ids,
            known_classes=model.classes,
            model_provenance=provenance,
            feature_provenance=test.provenance,
            seed=seed,
        )
        logger.info(
            f"Test accuracy {report.accuracy:.4f}, macro precision {report.macro_precision:.4f}, "
            f"macro recall {report.macro_recall:.4f} on {report.n_test} rows"
        )
        return report


def dumps_report(report: EvalReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def save_report(report: EvalReport, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps_report(report), encoding="utf-8")
    return target


metrics_service = MetricsService()
