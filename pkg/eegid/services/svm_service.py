# ============================================================================
# FILE: eegid/services/svm_service.py
# ============================================================================
"""
Soft-margin RBF support vector machines trained by SMO, combined one-vs-one.

The dual is solved with maximal-violating-pair / second-order working-set
selection and the two-variable analytic update with box clipping. No random
numbers are involved, so training is a pure function of the data.
"""

import itertools
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.spatial.distance import cdist

from eegid.core.errors import TrainingError
from eegid.utils.logger import get_logger

logger = get_logger(__name__)

_TAU = 1e-12


class SvmHyperparams(BaseModel):
    model_config = ConfigDict(frozen=True)

    C: float = Field(1.0, gt=0, description="Soft-margin penalty")
    sigma: float = Field(10.0, gt=0, description="RBF width")
    tol: float = Field(1e-3, gt=0, description="KKT tolerance")
    max_passes: int = Field(50, gt=0, description="Iteration cap in multiples of the training size")


def _as_matrix(X: np.ndarray, name: str = "X") -> np.ndarray:
    array = np.asarray(X, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise TrainingError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(array)):
        raise TrainingError(f"{name} contains non-finite values")
    return array


def rbf_kernel(x: np.ndarray, x_prime: np.ndarray, sigma: float) -> float:
    """exp(-||x - x'||^2 / (2 sigma^2))"""
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(x_prime, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise TrainingError(f"dimension mismatch: {a.size} vs {b.size}")
    diff = a - b
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))


def squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise TrainingError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return cdist(A, B, metric="sqeuclidean")


def rbf_from_distances(sq_dist: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-sq_dist / (2.0 * sigma * sigma))


class SmoResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    alpha: np.ndarray
    gradient: np.ndarray
    rho: float
    n_iter: int
    converged: bool


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int) -> SmoResult:
    """
    Minimize 1/2 a^T Q a - e^T a subject to y^T a = 0 and 0 <= a <= C, Q_ij = y_i y_j K_ij.

    Stops when the maximal KKT violation m(a) - M(a) falls below tol.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    converged = False
    n_iter = 0

    while n_iter < max_iter:
        below = alpha < C
        above = alpha > 0
        up = (pos & below) | (~pos & above)
        low = (pos & above) | (~pos & below)
        score = -y * G

        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        m = up_scores[i]
        low_scores = np.where(low, score, np.inf)
        M = float(np.min(low_scores))
        if not np.isfinite(m) or m - M < tol:
            converged = True
            break

        Ki = K[i]
        candidates = low & (score < m)
        b = m - score
        a = diag[i] + diag - 2.0 * Ki
        a = np.where(a > 0, a, _TAU)
        gain = np.where(candidates, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))
        Kj = K[j]

        yi, yj = y[i], y[j]
        old_i, old_j = alpha[i], alpha[j]
        Qij = yi * yj * Ki[j]
        if yi != yj:
            quad = diag[i] + diag[j] + 2.0 * Qij
            delta = (-G[i] - G[j]) / max(quad, _TAU)
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Qij
            delta = (G[i] - G[j]) / max(quad, _TAU)
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        G += y * (yi * d_i * Ki + yj * d_j * Kj)
        n_iter += 1

    return SmoResult(alpha=alpha, gradient=G, rho=_rho(alpha, G, y, C), n_iter=n_iter, converged=converged)


def _rho(alpha: np.ndarray, G: np.ndarray, y: np.ndarray, C: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(yG[free]))
    pos = y > 0
    at_upper = alpha >= C
    # Bounded-only solutions take the midpoint of the feasible bias interval
    ub_mask = (at_upper & ~pos) | (~at_upper & pos)
    lb_mask = (at_upper & pos) | (~at_upper & ~pos)
    ub = float(np.min(yG[ub_mask])) if np.any(ub_mask) else np.inf
    lb = float(np.max(yG[lb_mask])) if np.any(lb_mask) else -np.inf
    if not np.isfinite(ub):
        return lb
    if not np.isfinite(lb):
        return ub
    return 0.5 * (ub + lb)


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij"""
    ay = alpha * y
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


class BinarySvmModel(BaseModel):
    """Support vectors with coefficients alpha_i * y_i; f(x) = sum coef_i K(sv_i, x) - bias"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    sigma: float
    C: float
    support_indices: List[int] = Field(default_factory=list, description="Rows of the training matrix")
    n_iter: int = 0
    converged: bool = True

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.dual_coef)

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])


def svm_train_binary(X: np.ndarray, y: np.ndarray, hp: SvmHyperparams,
                     kernel_matrix: Optional[np.ndarray] = None) -> BinarySvmModel:
    """
    Train one soft-margin RBF SVM on labels in {-1, +1}.

    Args:
        kernel_matrix: precomputed RBF Gram matrix of X for hp.sigma
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("binary labels must be -1 or +1")
    if np.all(y > 0) or np.all(y < 0):
        raise TrainingError("single-class input: both classes must be present")

    K = kernel_matrix if kernel_matrix is not None else rbf_from_distances(squared_distances(X, X), hp.sigma)
    max_iter = hp.max_passes * max(X.shape[0], 1)
    result = smo_solve(K, y, hp.C, hp.tol, max_iter)
    if not result.converged:
        logger.warning(f"SMO stopped at the iteration cap ({max_iter}) before reaching tol={hp.tol}")

    support = np.flatnonzero(result.alpha > 0)
    return BinarySvmModel(
        support_vectors=X[support],
        dual_coef=result.alpha[support] * y[support],
        bias=result.rho,
        sigma=hp.sigma,
        C=hp.C,
        support_indices=support.tolist(),
        n_iter=result.n_iter,
        converged=result.converged,
    )


def svm_decision(model: BinarySvmModel, x: np.ndarray) -> np.ndarray:
    """Decision values for one sample (scalar) or a batch of rows"""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise TrainingError(f"dimension mismatch: model has {model.n_features} features, input {X.shape[1]}")
    K = rbf_from_distances(squared_distances(X, model.support_vectors), model.sigma)
    values = K @ model.dual_coef - model.bias
    return float(values[0]) if single else values


def svm_predict_binary(model: BinarySvmModel, x: np.ndarray) -> np.ndarray:
    return np.where(np.atleast_1d(svm_decision(model, x)) >= 0, 1, -1)


class OvoMember(BaseModel):
    """Binary machine for one class pair; +1 means the lower class id"""
    model_config = ConfigDict(frozen=True)

    positive: int
    negative: int
    pool_indices: List[int]
    dual_coef: List[float]
    bias: float
    n_iter: int = 0
    converged: bool = True


class OvoSvmModel(BaseModel):
    """One machine per unordered class pair sharing a pool of support vectors"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    classes: List[int]
    sigma: float
    C: float
    support_pool: np.ndarray
    members: List[OvoMember]
    support_rows: List[int] = Field(default_factory=list, description="Training rows behind the pool; not persisted")

    @field_validator("members")
    @classmethod
    def _check_members(cls, members: List[OvoMember]) -> List[OvoMember]:
        pairs = [(m.positive, m.negative) for m in members]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate class pair in one-vs-one ensemble")
        return members

    @property
    def n_features(self) -> int:
        return int(self.support_pool.shape[1])

    def member_model(self, index: int) -> BinarySvmModel:
        member = self.members[index]
        return BinarySvmModel(
            support_vectors=self.support_pool[member.pool_indices],
            dual_coef=np.asarray(member.dual_coef),
            bias=member.bias,
            sigma=self.sigma,
            C=self.C,
            support_indices=member.pool_indices,
            n_iter=member.n_iter,
            converged=member.converged,
        )


class GramCache:
    """Squared distances of a training matrix, reused across class pairs and sigma values"""

    def __init__(self, X: np.ndarray):
        self.X = _as_matrix(X)
        self.sq_dist = squared_distances(self.X, self.X)
        self._sigma: Optional[float] = None
        self._gram: Optional[np.ndarray] = None

    def gram(self, sigma: float) -> np.ndarray:
        if self._sigma != sigma:
            self._gram = rbf_from_distances(self.sq_dist, sigma)
            self._sigma = sigma
        return self._gram


def ovo_train(X: np.ndarray, y: np.ndarray, hp: SvmHyperparams, cache: Optional[GramCache] = None) -> OvoSvmModel:
    """k(k-1)/2 binary machines over sorted class ids"""
    X = _as_matrix(X)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.shape[0] != y.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    classes = sorted(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise TrainingError("one-vs-one training needs at least 2 classes")
    cache = cache or GramCache(X)
    K = cache.gram(hp.sigma)

    raw: List[Tuple[int, int, np.ndarray, np.ndarray, float, int, bool]] = []
    for a, b in itertools.combinations(classes, 2):
        rows = np.flatnonzero((y == a) | (y == b))
        labels = np.where(y[rows] == a, 1.0, -1.0)
        model = svm_train_binary(X[rows], labels, hp, kernel_matrix=K[np.ix_(rows, rows)])
        raw.append((a, b, rows[model.support_indices], model.dual_coef, model.bias, model.n_iter, model.converged))

    used = np.unique(np.concatenate([entry[2] for entry in raw]))
    position = {int(row): k for k, row in enumerate(used)}
    members = [
        OvoMember(
            positive=a,
            negative=b,
            pool_indices=[position[int(r)] for r in rows],
            dual_coef=coef.tolist(),
            bias=bias,
            n_iter=n_iter,
            converged=converged,
        )
        for a, b, rows, coef, bias, n_iter, converged in raw
    ]
    logger.debug(
        f"OvO SVM: {len(members)} machines, {used.size} pooled support vectors, "
        f"{sum(m.n_iter for m in members)} SMO iterations (C={hp.C:.4g}, sigma={hp.sigma:.4g})"
    )
    return OvoSvmModel(classes=classes, sigma=hp.sigma, C=hp.C, support_pool=X[used], members=members,
                       support_rows=used.tolist())


def ovo_decisions(ovo: OvoSvmModel, X: np.ndarray) -> np.ndarray:
    """n_samples x n_members decision values"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != ovo.n_features:
        raise TrainingError(f"dimension mismatch: model has {ovo.n_features} features, input {X.shape[1]}")
    return ovo_decisions_from_kernel(ovo, rbf_from_distances(squared_distances(X, ovo.support_pool), ovo.sigma))


def ovo_decisions_from_kernel(ovo: OvoSvmModel, K: np.ndarray) -> np.ndarray:
    """Decision values from a precomputed samples x pool kernel matrix"""
    out = np.empty((K.shape[0], len(ovo.members)))
    for k, member in enumerate(ovo.members):
        out[:, k] = K[:, member.pool_indices] @ np.asarray(member.dual_coef) - member.bias
    return out


def ovo_vote(ovo: OvoSvmModel, decisions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Majority vote per row. Ties go to the class with the largest summed |margin|
    over the pairs it won, then to the lowest class id.

    Returns predicted class ids and the vote matrix (columns follow ovo.classes).
    """
    index: Dict[int, int] = {c: k for k, c in enumerate(ovo.classes)}
    n = decisions.shape[0]
    votes = np.zeros((n, len(ovo.classes)), dtype=np.int64)
    margins = np.zeros((n, len(ovo.classes)))
    for k, member in enumerate(ovo.members):
        positive = decisions[:, k] >= 0
        winner = np.where(positive, index[member.positive], index[member.negative])
        np.add.at(votes, (np.arange(n), winner), 1)
        np.add.at(margins, (np.arange(n), winner), np.abs(decisions[:, k]))

    predictions = np.empty(n, dtype=np.int64)
    for row in range(n):
        tied = np.flatnonzero(votes[row] == votes[row].max())
        if tied.size > 1:
            best = margins[row, tied].max()
            tied = tied[margins[row, tied] == best]
        predictions[row] = ovo.classes[int(tied[0])]
    return predictions, votes


def ovo_predict(ovo: OvoSvmModel, x: np.ndarray) -> Tuple[int, np.ndarray]:
    """Class and vote vector for a single sample"""
    row = np.asarray(x, dtype=np.float64).reshape(1, -1)
    predictions, votes = ovo_vote(ovo, ovo_decisions(ovo, row))
    return int(predictions[0]), votes[0]


def ovo_predict_batch(ovo: OvoSvmModel, X: np.ndarray) -> np.ndarray:
    predictions, _ = ovo_vote(ovo, ovo_decisions(ovo, X))
    return predictions


def svm_model_document(ovo: OvoSvmModel) -> dict:
    return {
        "classes": ovo.classes,
        "sigma": ovo.sigma,
        "C": ovo.C,
        "support_pool": ovo.support_pool.tolist(),
        "members": [member.model_dump() for member in ovo.members],
    }


def svm_model_from_document(document: dict) -> OvoSvmModel:
    return OvoSvmModel(
        classes=[int(c) for c in document["classes"]],
        sigma=float(document["sigma"]),
        C=float(document["C"]),
        support_pool=np.atleast_2d(np.asarray(document["support_pool"], dtype=np.float64)),
        members=[OvoMember.model_validate(m) for m in document["members"]],
    )