# ============================================================================
# FILE: eegid/services/boosting_service.py
# ============================================================================
"""
Second-order gradient boosted trees with a softmax cross-entropy objective.

Each round fits one regression tree per class on the gradient g = p - y and
hessian h = p (1 - p). Splits are exact and greedy over pre-sorted feature
values; leaf weights are -eta * G / (H + lambda).
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from eegid.core.errors import TrainingError
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

_HESSIAN_FLOOR = 1e-16


class GbtConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_rounds: int = Field(100, ge=0)
    learning_rate: float = Field(0.1, gt=0, le=1)
    max_depth: int = Field(3, ge=1)
    min_child_weight: float = Field(1.0, ge=0)
    reg_lambda: float = Field(1.0, ge=0)
    gamma: float = Field(0.0, ge=0)
    n_classes: Optional[int] = Field(None, ge=2, description="Defaults to the classes present in training")


class RegressionTree(BaseModel):
    """Flat binary tree; node 0 is the root, leaves have feature == -1"""
    model_config = ConfigDict(frozen=True)

    feature: List[int]
    threshold: List[float]
    left: List[int]
    right: List[int]
    value: List[float]

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)

    @property
    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def leaf_values(self) -> List[float]:
        return [v for f, v in zip(self.feature, self.value) if f < 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = feature[node] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            f = feature[node[rows]]
            go_left = X[rows, f] < threshold[node[rows]]
            node[rows] = np.where(go_left, left[node[rows]], right[node[rows]])
            active = feature[node] >= 0
        return np.asarray(self.value)[node]


class BoostingRound(BaseModel):
    round: int
    data_loss: float = Field(..., description="Mean softmax cross-entropy after the round")
    objective: float = Field(..., description="Summed loss plus gamma*T + lambda/2*sum(w^2) of this round's trees")
    cumulative_penalty: float = Field(0.0, description="Regularization summed over every tree grown so far")


class GbtModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    classes: List[int]
    base_score: List[float]
    trees: List[List[RegressionTree]] = Field(default_factory=list, description="rounds x classes")
    config: GbtConfig
    n_features: int
    history: List[BoostingRound] = Field(default_factory=list)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _cross_entropy(proba: np.ndarray, y_idx: np.ndarray) -> np.ndarray:
    return -np.log(np.maximum(proba[np.arange(y_idx.size), y_idx], 1e-300))


class _TreeGrower:
    """Exact greedy growth over feature columns sorted once per training run"""

    def __init__(self, X: np.ndarray, sorted_idx: np.ndarray, config: GbtConfig):
        self.X = X
        self.sorted_idx = sorted_idx
        self.config = config
        self.columns = np.arange(X.shape[1])

    def grow(self, g: np.ndarray, h: np.ndarray) -> RegressionTree:
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.g, self.h = g, h
        self._build(np.ones(self.X.shape[0], dtype=bool), depth=0)
        return RegressionTree(feature=self.feature, threshold=self.threshold,
                              left=self.left, right=self.right, value=self.value)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _build(self, mask: np.ndarray, depth: int) -> int:
        node = self._new_node()
        G = float(self.g[mask].sum())
        H = float(self.h[mask].sum())
        cfg = self.config

        split = self._best_split(mask, G, H) if depth < cfg.max_depth else None
        if split is None:
            self.value[node] = -cfg.learning_rate * G / (H + cfg.reg_lambda) if H + cfg.reg_lambda > 0 else 0.0
            return node

        feature, threshold = split
        goes_left = self.X[:, feature] < threshold
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = self._build(mask & goes_left, depth + 1)
        self.right[node] = self._build(mask & ~goes_left, depth + 1)
        return node

    def _best_split(self, mask: np.ndarray, G: float, H: float) -> Optional[Tuple[int, float]]:
        n_node = int(mask.sum())
        if n_node < 2:
            return None
        cfg = self.config
        in_node = mask[self.sorted_idx]
        order = self.sorted_idx.T[in_node.T].reshape(self.X.shape[1], n_node).T
        values = self.X[order, self.columns]

        GL = np.cumsum(self.g[order], axis=0)[:-1]
        HL = np.cumsum(self.h[order], axis=0)[:-1]
        GR = G - GL
        HR = H - HL
        lam = cfg.reg_lambda
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G ** 2 / (H + lam)) - cfg.gamma
        valid = (values[1:] > values[:-1]) & (HL >= cfg.min_child_weight) & (HR >= cfg.min_child_weight)
        gain = np.where(valid & np.isfinite(gain), gain, -np.inf)

        best_per_feature = gain.max(axis=0)
        feature = int(np.argmax(best_per_feature))
        best = best_per_feature[feature]
        if not best > 0:
            return None
        position = int(np.argmax(gain[:, feature]))
        lo, hi = values[position, feature], values[position + 1, feature]
        threshold = lo + (hi - lo) / 2.0
        if not lo < threshold <= hi:
            threshold = hi
        return feature, float(threshold)


def _tree_penalty(tree: RegressionTree, config: GbtConfig) -> float:
    leaves = np.asarray(tree.leaf_values())
    return config.gamma * leaves.size + 0.5 * config.reg_lambda * float(np.dot(leaves, leaves))


def gbt_train(X: np.ndarray, y: np.ndarray, config: GbtConfig) -> GbtModel:
    """Fit n_rounds x n_classes trees; the loss history is stored on the model"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("empty data: boosting needs a non-empty 2-D feature matrix")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features contain non-finite values")
    y = np.asarray(y).astype(np.int64).ravel()
    if y.shape[0] != X.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    present = sorted(int(c) for c in np.unique(y))
    if len(present) < 2:
        raise TrainingError("boosting needs at least 2 classes")
    if config.n_classes is not None:
        if present[0] < 0 or present[-1] >= config.n_classes:
            raise TrainingError(f"labels must lie in 0..{config.n_classes - 1}")
        classes = list(range(config.n_classes))
    else:
        classes = present

    index: Dict[int, int] = {c: k for k, c in enumerate(classes)}
    y_idx = np.array([index[int(label)] for label in y])
    k = len(classes)
    onehot = np.zeros((X.shape[0], k))
    onehot[np.arange(X.shape[0]), y_idx] = 1.0

    base = np.zeros(k)
    scores = np.tile(base, (X.shape[0], 1))
    grower = _TreeGrower(X, np.argsort(X, axis=0, kind="stable"), config)
    trees: List[List[RegressionTree]] = []
    history: List[BoostingRound] = []
    cumulative_penalty = 0.0

    for round_idx in range(config.n_rounds):
        proba = softmax(scores)
        grad = proba - onehot
        hess = np.maximum(proba * (1.0 - proba), _HESSIAN_FLOOR)
        round_trees = []
        round_penalty = 0.0
        for c in range(k):
            tree = grower.grow(grad[:, c], hess[:, c])
            round_trees.append(tree)
            round_penalty += _tree_penalty(tree, config)
        cumulative_penalty += round_penalty
        # All classes step from the same probabilities before scores move
        for c, tree in enumerate(round_trees):
            scores[:, c] += tree.predict(X)
        trees.append(round_trees)

        losses = _cross_entropy(softmax(scores), y_idx)
        history.append(BoostingRound(round=round_idx + 1, data_loss=float(losses.mean()),
                                     objective=float(losses.sum() + round_penalty),
                                     cumulative_penalty=cumulative_penalty))

    if history:
        logger.debug(f"GBT: {config.n_rounds} rounds x {k} classes, final loss {history[-1].data_loss:.4f}")
    return GbtModel(classes=classes, base_score=base.tolist(), trees=trees, config=config,
                    n_features=X.shape[1], history=history)


def gbt_scores(model: GbtModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise TrainingError(f"dimension mismatch: model has {model.n_features} features, input {X.shape[1]}")
    scores = np.tile(np.asarray(model.base_score), (X.shape[0], 1))
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            scores[:, c] += tree.predict(X)
    return scores


def gbt_predict_proba(model: GbtModel, X: np.ndarray) -> np.ndarray:
    return softmax(gbt_scores(model, X))


def gbt_predict_batch(model: GbtModel, X: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lowest class id on ties
    proba = gbt_predict_proba(model, X)
    return np.asarray(model.classes)[np.argmax(proba, axis=1)]


def gbt_predict(model: GbtModel, x: np.ndarray) -> Tuple[int, np.ndarray]:
    """Class and probability vector for a single sample"""
    proba = gbt_predict_proba(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return int(model.classes[int(np.argmax(proba))]), proba
