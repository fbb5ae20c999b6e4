# ============================================================================
# FILE: eegid/core/state.py
# ============================================================================

from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict, Union

from eegid.core.config import Settings
from eegid.core.models import DatasetManifest, EvalReport, FeatureMatrix, SplitSpec


class PipelineState(TypedDict):
    """Everything the pipeline graph passes from stage to stage"""
    settings: Settings
    manifest_path: str
    out_dir: str
    feature_set: str
    model_kind: str
    split: SplitSpec
    manifest: Optional[DatasetManifest]
    features: Optional[FeatureMatrix]
    train: Optional[FeatureMatrix]
    val: Optional[FeatureMatrix]
    test: Optional[FeatureMatrix]
    standardizer: Optional[Any]
    tune_result: Optional[Any]
    params: Dict[str, Any]
    model: Optional[Any]
    report: Optional[EvalReport]
    artifacts: Dict[str, str]
    stage_log: List[Dict[str, Any]]


def create_initial_state(
    settings: Settings,
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    feature_set: Optional[str] = None,
    model_kind: Optional[str] = None,
    features: Optional[FeatureMatrix] = None,
) -> PipelineState:
    """Initialize the state object; no clock or random ids so reruns stay byte-identical"""
    return PipelineState(
        settings=settings,
        manifest_path=str(manifest_path),
        out_dir=str(out_dir),
        feature_set=feature_set or settings.FEATURE_SET,
        model_kind=model_kind or settings.MODEL,
        split=settings.split_spec(),
        manifest=None,
        features=features,
        train=None,
        val=None,
        test=None,
        standardizer=None,
        tune_result=None,
        params={},
        model=None,
        report=None,
        artifacts={},
        stage_log=[],
    )
