"""
Soft-margin RBF support vector machine trained by SMO.

Binary machines solve the dual with maximal-violating-pair working sets and
the analytic two-variable update; multiclass prediction is one-vs-one voting
with ties broken by summed decision values. Kernel:

    k(x, x') = exp(-||x - x'||² / σ²)

σ² and C are picked by stratified k-fold cross-validation over a fixed grid
scaled by the median pairwise squared distance of the training rows.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ..exceptions import TrainingError, ValidationError
from .models import Classifier, LabeledFeatureSet, require_classes, stratified_folds

logger = logging.getLogger(__name__)

SIGMA_FACTORS: Tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
C_GRID: Tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
_TAU = 1e-12


@dataclass(frozen=True)
class SMOResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    gap: float


def rbf_kernel(a: np.ndarray, b: np.ndarray, sigma2: float) -> np.ndarray:
    return np.exp(-cdist(a, b, metric='sqeuclidean') / sigma2)


def smo_solve(kernel: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iterations: int = 1_000_000) -> SMOResult:
    """
    Solve min ½ αᵀQα - eᵀα, 0 <= α <= C, yᵀα = 0, with Q = (y yᵀ) ∘ K.

    Args:
        kernel: (n, n) kernel matrix
        y: Labels in {-1, +1}
        C: Box constraint
        tol: Stop when the maximal KKT violation m - M drops below tol
        max_iterations: Pair updates before giving up

    Returns:
        SMOResult; decision f(x) = Σ α_t y_t k(x_t, x) + bias
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValidationError("y", "binary labels must be -1 or +1")
    alpha = np.zeros(n)
    gradient = -np.ones(n)
    diagonal = np.diag(kernel)
    gap = np.inf

    for iteration in range(1, max_iterations + 1):
        violation = -y * gradient
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(violation[up])])
        j = int(np.flatnonzero(low)[np.argmin(violation[low])])
        gap = float(violation[i] - violation[j])
        if gap < tol:
            break

        quad = max(diagonal[i] + diagonal[j] - 2.0 * kernel[i, j], _TAU)
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-gradient[i] - gradient[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            delta = (gradient[i] - gradient[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total

        gradient += y * (y[i] * kernel[:, i] * (alpha[i] - old_i) + y[j] * kernel[:, j] * (alpha[j] - old_j))
    else:
        raise TrainingError("svm: SMO did not converge",
                            {'iterations': max_iterations, 'gap': gap, 'tol': tol, 'C': C})

    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(-np.mean(y[free] * gradient[free]))
    else:
        violation = -y * gradient
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        high = float(np.max(violation[up])) if up.any() else 0.0
        lowest = float(np.min(violation[low])) if low.any() else 0.0
        bias = 0.5 * (high + lowest)
    return SMOResult(alpha=alpha, bias=bias, iterations=iteration, gap=gap)


@dataclass(frozen=True, eq=False)
class BinaryMachine:
    positive: int
    negative: int
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float

    def decision(self, x: np.ndarray, sigma2: float) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(x.shape[0], self.bias)
        return rbf_kernel(x, self.support_vectors, sigma2) @ self.dual_coef + self.bias


def _train_pairs(features: np.ndarray, labels: np.ndarray, kernel: np.ndarray, C: float,
                 tol: float, max_iterations: int) -> List[BinaryMachine]:
    machines = []
    for a, b in itertools.combinations(np.unique(labels), 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        result = smo_solve(kernel[np.ix_(rows, rows)], y, C, tol, max_iterations)
        support = result.alpha > 0
        machines.append(BinaryMachine(int(a), int(b), features[rows[support]],
                                      result.alpha[support] * y[support], result.bias))
    return machines


def _vote(machines: Sequence[BinaryMachine], classes: np.ndarray, x: np.ndarray, sigma2: float) -> np.ndarray:
    position = {int(c): i for i, c in enumerate(classes)}
    votes = np.zeros((x.shape[0], classes.size))
    scores = np.zeros((x.shape[0], classes.size))
    for machine in machines:
        d = machine.decision(x, sigma2)
        pa, pb = position[machine.positive], position[machine.negative]
        votes[:, pa] += d > 0
        votes[:, pb] += d <= 0
        scores[:, pa] += d
        scores[:, pb] -= d
    predictions = np.empty(x.shape[0], dtype=int)
    for q in range(x.shape[0]):
        # most votes, then largest summed decision, then lowest class
        order = np.lexsort((np.arange(classes.size), -scores[q], -votes[q]))
        predictions[q] = classes[order[0]]
    return predictions


def median_squared_distance(features: np.ndarray) -> float:
    if features.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(features, metric='sqeuclidean')))
    return median if median > 0 else 1.0


class SVMClassifier(Classifier):
    """
    One-vs-one RBF SVM.

    When both ``sigma2`` and ``C`` are given they are used as is; otherwise
    they are chosen by cross-validation on the training set.
    """

    kind = "svm"

    def __init__(self, sigma2: Optional[float] = None, C: Optional[float] = None, cv_folds: int = 5,
                 sigma_factors: Sequence[float] = SIGMA_FACTORS, c_grid: Sequence[float] = C_GRID,
                 tol: float = 1e-3, max_iterations: int = 1_000_000, seed: int = 0):
        super().__init__()
        self.sigma2 = sigma2
        self.C = C
        self.cv_folds = cv_folds
        self.sigma_factors = tuple(sigma_factors)
        self.c_grid = tuple(c_grid)
        self.tol = tol
        self.max_iterations = max_iterations
        self.seed = seed
        self.classes = np.zeros(0, dtype=int)
        self.machines: List[BinaryMachine] = []
        self._n_features = 0

    @property
    def n_features(self) -> int:
        return self._n_features

    def _cross_validate(self, train: LabeledFeatureSet, sq_distances: np.ndarray, counts: np.ndarray):
        median = median_squared_distance(train.features)
        folds_wanted = self.cv_folds
        n_folds = min(folds_wanted, int(counts.min()))
        if n_folds < 2:
            logger.warning("svm: too few samples per class for cross-validation; using median σ² and C=1")
            return median, 1.0, {}
        if n_folds < folds_wanted:
            logger.warning(f"svm: reducing cross-validation from {folds_wanted} to {n_folds} folds")
        folds = stratified_folds(train.labels, n_folds, np.random.default_rng(self.seed))

        scores: Dict[str, float] = {}
        best = (-1.0, None, None)
        for factor in self.sigma_factors:
            sigma2 = factor * median
            kernel = np.exp(-sq_distances / sigma2)
            for C in self.c_grid:
                correct = 0
                for held in folds:
                    fit_rows = np.setdiff1d(np.arange(len(train)), held)
                    machines = _train_pairs(train.features[fit_rows], train.labels[fit_rows],
                                            kernel[np.ix_(fit_rows, fit_rows)], C, self.tol, self.max_iterations)
                    predicted = _vote(machines, np.unique(train.labels[fit_rows]), train.features[held], sigma2)
                    correct += int(np.sum(predicted == train.labels[held]))
                accuracy = correct / len(train)
                scores[f"sigma2={sigma2:.6g},C={C:g}"] = accuracy
                if accuracy > best[0]:
                    best = (accuracy, sigma2, C)
        logger.debug(f"svm: cross-validation picked σ²={best[1]:.6g}, C={best[2]:g} (accuracy {best[0]:.4f})")
        return best[1], best[2], scores

    def fit(self, train: LabeledFeatureSet) -> "SVMClassifier":
        classes, counts = require_classes(train, 1, self.kind)
        sq_distances = cdist(train.features, train.features, metric='sqeuclidean')
        cv_scores: Dict[str, float] = {}
        if self.sigma2 is None or self.C is None:
            sigma2, C, cv_scores = self._cross_validate(train, sq_distances, counts)
            self.sigma2 = self.sigma2 if self.sigma2 is not None else sigma2
            self.C = self.C if self.C is not None else C
        if not (self.sigma2 > 0) or not (self.C > 0):
            raise ValidationError("svm", f"sigma2 and C must be positive, got {self.sigma2}, {self.C}")

        kernel = np.exp(-sq_distances / self.sigma2)
        self.machines = _train_pairs(train.features, train.labels, kernel, self.C, self.tol, self.max_iterations)
        self.classes = classes
        self._n_features = train.n_features
        self.metadata = {'sigma2': self.sigma2, 'C': self.C, 'cv_folds': self.cv_folds,
                         'cv_scores': cv_scores, 'seed': self.seed, 'n_machines': len(self.machines)}
        self._fitted = True
        return self

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        """(Q, n_pairs) pairwise decision values in combination order"""
        return np.column_stack([m.decision(x, self.sigma2) for m in self.machines])

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return _vote(self.machines, self.classes, x, self.sigma2)

    def params_dict(self) -> dict:
        return {
            'sigma2': self.sigma2, 'C': self.C, 'classes': self.classes.tolist(), 'n_features': self._n_features,
            'machines': [{'positive': m.positive, 'negative': m.negative, 'bias': m.bias,
                          'support_vectors': m.support_vectors.tolist(), 'dual_coef': m.dual_coef.tolist()}
                         for m in self.machines],
        }

    @classmethod
    def from_params(cls, params: dict) -> "SVMClassifier":
        model = cls(sigma2=params['sigma2'], C=params['C'])
        model.classes = np.asarray(params['classes'], dtype=int)
        model._n_features = int(params['n_features'])
        model.machines = [BinaryMachine(m['positive'], m['negative'],
                                        np.asarray(m['support_vectors'], dtype=float).reshape(-1, model._n_features),
                                        np.asarray(m['dual_coef'], dtype=float), float(m['bias']))
                          for m in params['machines']]
        model._fitted = True
        return model


def svm_train(train: LabeledFeatureSet, cv_folds: int = 5, seed: int = 0, **kwargs) -> SVMClassifier:
    return SVMClassifier(cv_folds=cv_folds, seed=seed, **kwargs).fit(train)


def svm_predict(model: SVMClassifier, x: np.ndarray) -> np.ndarray:
    return model.predict(x)
