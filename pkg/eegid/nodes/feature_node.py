# ============================================================================
# FILE: eegid/nodes/feature_node.py
# ============================================================================

from pathlib import Path
from typing import Any, Dict

from eegid.core.montage import builtin_montage
from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.feature_service import extract_manifest_features, save_feature_matrix
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class FeatureNode(PipelineNode):
    """Bad-trial removal, preprocessing, epoching and feature extraction for every session"""

    stage = "features"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        settings = state["settings"]
        manifest = state["manifest"]
        cached = state["features"]
        if cached is not None and cached.feature_set == state["feature_set"]:
            logger.info(f"  reusing {cached.n_rows} precomputed {cached.feature_set} rows")
            features = cached
        else:
            features = extract_manifest_features(
                manifest,
                Path(state["manifest_path"]).parent,
                state["feature_set"],
                builtin_montage(),
                preprocessing=settings.preprocessing_config(manifest.sampling_rate_hz),
                wavelet=settings.wavelet_config(),
                window_s=settings.EPOCH_WINDOW_S,
                offset_s=settings.EPOCH_OFFSET_S,
            )

        target = save_feature_matrix(features, Path(state["out_dir"]) / "features.csv")
        state["features"] = features
        state["artifacts"]["features"] = target.name
        return {"feature_set": features.feature_set, "rows": features.n_rows, "columns": features.n_features}
