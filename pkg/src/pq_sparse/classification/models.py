"""
Shared classifier plumbing: labeled feature sets, the classifier base class
and stratified index helpers used by cross-validation and hold-out splits.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from ..exceptions import TrainingError, ValidationError


@dataclass(frozen=True, eq=False)
class LabeledFeatureSet:
    """Feature rows x_p with integer class labels ℓ_p"""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels).astype(int)
        if features.ndim != 2:
            raise ValidationError("features", f"expected a (P, D) matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValidationError("labels", f"{labels.shape[0] if labels.ndim else 0} labels for {features.shape[0]} rows")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features", "feature matrix contains non-finite entries")
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, indices) -> "LabeledFeatureSet":
        return LabeledFeatureSet(self.features[indices], self.labels[indices])


def as_query(x: np.ndarray, n_features: int) -> np.ndarray:
    """Accept a single feature vector or a (Q, D) matrix"""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != n_features:
        raise ValidationError("x", f"expected {n_features} features per row, got shape {x.shape}")
    return x


class Classifier(ABC):
    """Train / predict interface shared by every classifier"""

    kind: str = ""

    def __init__(self):
        self.metadata: Dict[str, Any] = {}
        self._fitted = False

    @abstractmethod
    def fit(self, train: LabeledFeatureSet) -> "Classifier":
        ...

    @abstractmethod
    def _predict(self, x: np.ndarray) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def n_features(self) -> int:
        ...

    def predict(self, x: np.ndarray) -> np.ndarray:
        if not self._fitted:
            raise TrainingError(f"{self.kind} classifier used before training")
        return self._predict(as_query(x, self.n_features))

    def predict_one(self, x: np.ndarray) -> int:
        return int(self.predict(x)[0])

    @abstractmethod
    def params_dict(self) -> Dict[str, Any]:
        ...

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'params': self.params_dict(), 'metadata': dict(self.metadata)}


def require_classes(train: LabeledFeatureSet, minimum_per_class: int, kind: str) -> Tuple[np.ndarray, np.ndarray]:
    """Class values and counts, raising if there are < 2 classes or a class is too small"""
    if len(train) == 0:
        raise TrainingError(f"{kind}: empty training set")
    classes, counts = np.unique(train.labels, return_counts=True)
    if classes.size < 2:
        raise TrainingError(f"{kind}: need at least two classes", {'classes': classes.tolist()})
    small = classes[counts < minimum_per_class]
    if small.size:
        raise TrainingError(f"{kind}: class has fewer than {minimum_per_class} samples",
                            {'class': int(small[0]), 'count': int(counts[classes == small[0]][0])})
    return classes, counts


# =============================================================================
# STRATIFIED INDEXING
# =============================================================================

def stratified_folds(labels: np.ndarray, n_folds: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Partition row indices into n_folds folds with per-class round-robin assignment"""
    labels = np.asarray(labels)
    if n_folds < 2:
        raise ValidationError("n_folds", f"need at least 2 folds, got {n_folds}")
    assignment = np.empty(labels.shape[0], dtype=int)
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        members = members[rng.permutation(members.size)]
        assignment[members] = np.arange(members.size) % n_folds
    return [np.flatnonzero(assignment == f) for f in range(n_folds)]


def stratified_holdout(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(fit, holdout) indices taking round(fraction * n_c) rows of each class, at least one when possible"""
    labels = np.asarray(labels)
    fit, held = [], []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        members = members[rng.permutation(members.size)]
        n_held = int(round(fraction * members.size))
        if members.size >= 2:
            n_held = min(max(n_held, 1), members.size - 1)
        else:
            n_held = 0
        held.append(members[:n_held])
        fit.append(members[n_held:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(held))
