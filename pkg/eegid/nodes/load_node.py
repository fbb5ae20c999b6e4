# ============================================================================
# FILE: eegid/nodes/load_node.py
# ============================================================================

from pathlib import Path
from typing import Any, Dict

from eegid.core.errors import SplitError
from eegid.core.state import PipelineState
from eegid.nodes.base import PipelineNode
from eegid.services.session_io import iter_session_entries, load_manifest
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class LoadNode(PipelineNode):
    """Validate the manifest and check it can feed the session split"""

    stage = "load"

    def run(self, state: PipelineState) -> Dict[str, Any]:
        manifest = load_manifest(state["manifest_path"])
        split = state["split"]
        present = sorted({entry.index for _, entry in iter_session_entries(manifest)})
        if not set(split.test_sessions) & set(present):
            raise SplitError(f"test session absent: manifest holds sessions {present}, "
                             f"test set is {split.test_sessions}")
        if not set(split.train_sessions) & set(present):
            raise SplitError(f"training sessions absent: manifest holds sessions {present}")

        Path(state["out_dir"]).mkdir(parents=True, exist_ok=True)
        state["manifest"] = manifest
        logger.info(f"  {len(manifest.subjects)} subjects, {manifest.n_sessions} sessions, "
                    f"preprocessed={manifest.preprocessed}")
        return {"subjects": len(manifest.subjects), "sessions": manifest.n_sessions,
                "preprocessed": manifest.preprocessed}
