# ============================================================================
# FILE: eegid/graph/workflow.py
# ============================================================================

from pathlib import Path
from typing import Optional, Union

from langgraph.graph import END, StateGraph

from eegid.core.config import Settings
from eegid.core.models import EvalReport, FeatureMatrix
from eegid.core.state import PipelineState, create_initial_state
from eegid.graph.edges import should_tune
from eegid.nodes.evaluation_node import EvaluationNode
from eegid.nodes.feature_node import FeatureNode
from eegid.nodes.load_node import LoadNode
from eegid.nodes.standardize_node import StandardizeNode
from eegid.nodes.training_node import TrainingNode
from eegid.nodes.tuning_node import TuningNode
from eegid.utils.logger import get_logger

logger = get_logger(__name__)


class PipelineWorkflow:
    """load -> features -> standardize -> [tune] -> train -> evaluate"""

    def __init__(self):
        self.load = LoadNode()
        self.features = FeatureNode()
        self.standardize = StandardizeNode()
        self.tune = TuningNode()
        self.train = TrainingNode()
        self.evaluate = EvaluationNode()

    def build_graph(self):
        workflow = StateGraph(PipelineState)

        workflow.add_node("load_dataset", self.load.execute)
        workflow.add_node("extract_features", self.features.execute)
        workflow.add_node("standardize", self.standardize.execute)
        workflow.add_node("tune_params", self.tune.execute)
        workflow.add_node("train_model", self.train.execute)
        workflow.add_node("evaluate_model", self.evaluate.execute)

        workflow.set_entry_point("load_dataset")
        workflow.add_edge("load_dataset", "extract_features")
        workflow.add_edge("extract_features", "standardize")
        workflow.add_conditional_edges(
            "standardize",
            should_tune,
            {
                "tune": "tune_params",
                "train": "train_model",
            }
        )
        workflow.add_edge("tune_params", "train_model")
        workflow.add_edge("train_model", "evaluate_model")
        workflow.add_edge("evaluate_model", END)

        return workflow.compile()

    def run(self, state: PipelineState) -> PipelineState:
        logger.info(f"Pipeline: {state['feature_set']} features + {state['model_kind']} on {state['manifest_path']}")
        graph = self.build_graph()
        final_state = graph.invoke(state)
        logger.info(f"Pipeline complete: artifacts in {state['out_dir']}")
        return final_state


def run_pipeline(
    manifest_path: Union[str, Path],
    settings: Settings,
    out_dir: Union[str, Path],
    feature_set: Optional[str] = None,
    model_kind: Optional[str] = None,
    features: Optional[FeatureMatrix] = None,
) -> EvalReport:
    """End-to-end run; every stage writes its artifact under out_dir"""
    state = create_initial_state(settings, manifest_path, out_dir, feature_set, model_kind, features)
    return PipelineWorkflow().run(state)["report"]
