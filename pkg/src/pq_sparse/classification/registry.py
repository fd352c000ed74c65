"""
Classifier names used in experiment tables, their settings, and JSON model files.
"""

import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Dict, Tuple, Union

from ..exceptions import ConfigurationError, DatasetError
from ..io_utils import atomic_write_json, load_json
from .discriminant import LinearDiscriminant, QuadraticDiscriminant
from .mlp import DEFAULT_HIDDEN, MLPClassifier
from .models import Classifier
from .neighbors import KNNClassifier
from .svm import C_GRID, SIGMA_FACTORS, SVMClassifier

logger = logging.getLogger(__name__)

CLASSIFIER_NAMES: Tuple[str, ...] = ("1-NN", "3-NN", "LDC", "QDC", "SVM", "MLP")
# classifiers whose training draws random numbers get a per-repetition seed
SEEDED = frozenset({"SVM", "MLP"})


@dataclass(frozen=True)
class ClassifierSettings:
    names: Tuple[str, ...] = CLASSIFIER_NAMES
    svm_cv_folds: int = 5
    svm_sigma_factors: Tuple[float, ...] = SIGMA_FACTORS
    svm_c_grid: Tuple[float, ...] = C_GRID
    svm_tol: float = 1e-3
    svm_max_iterations: int = 1_000_000
    mlp_hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    mlp_epochs: int = 500
    mlp_batch_size: int = 32
    mlp_learning_rate: float = 0.1
    mlp_momentum: float = 0.9
    mlp_patience: int = 50
    mlp_validation_fraction: float = 0.1

    def __post_init__(self):
        unknown = [name for name in self.names if name not in CLASSIFIER_NAMES]
        if unknown:
            raise ConfigurationError(f"classifiers: unknown names {unknown} (expected {list(CLASSIFIER_NAMES)})")
        if not self.names:
            raise ConfigurationError("classifiers: names must not be empty")
        if self.svm_cv_folds < 2:
            raise ConfigurationError(f"classifiers.svm_cv_folds must be >= 2, got {self.svm_cv_folds}")

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierSettings":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"classifiers: unknown keys {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def make_classifier(name: str, settings: ClassifierSettings = ClassifierSettings(), seed: int = 0) -> Classifier:
    """Untrained classifier for a table name such as '3-NN' or 'SVM'"""
    if name == "1-NN":
        return KNNClassifier(1)
    if name == "3-NN":
        return KNNClassifier(3)
    if name == "LDC":
        return LinearDiscriminant()
    if name == "QDC":
        return QuadraticDiscriminant()
    if name == "SVM":
        return SVMClassifier(cv_folds=settings.svm_cv_folds, sigma_factors=settings.svm_sigma_factors,
                             c_grid=settings.svm_c_grid, tol=settings.svm_tol,
                             max_iterations=settings.svm_max_iterations, seed=seed)
    if name == "MLP":
        return MLPClassifier(hidden=settings.mlp_hidden, epochs=settings.mlp_epochs,
                             batch_size=settings.mlp_batch_size, learning_rate=settings.mlp_learning_rate,
                             momentum=settings.mlp_momentum, patience=settings.mlp_patience,
                             validation_fraction=settings.mlp_validation_fraction, seed=seed)
    raise ConfigurationError(f"unknown classifier '{name}' (expected one of {list(CLASSIFIER_NAMES)})")


_LOADERS: Dict[str, Callable[[dict], Classifier]] = {
    KNNClassifier.kind: KNNClassifier.from_params,
    LinearDiscriminant.kind: LinearDiscriminant.from_params,
    QuadraticDiscriminant.kind: QuadraticDiscriminant.from_params,
    SVMClassifier.kind: SVMClassifier.from_params,
    MLPClassifier.kind: MLPClassifier.from_params,
}


def model_from_dict(data: dict) -> Classifier:
    try:
        loader = _LOADERS[data['kind']]
    except KeyError:
        raise DatasetError(f"unknown model kind {data.get('kind')!r}") from None
    model = loader(data['params'])
    model.metadata = dict(data.get('metadata', {}))
    return model


def save_model(model: Classifier, path: Union[str, Path]) -> Path:
    path = atomic_write_json(path, model.to_dict())
    logger.info(f"Saved {model.kind} model to {path}")
    return path


def load_model(path: Union[str, Path]) -> Classifier:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"model file not found: {path}")
    return model_from_dict(load_json(path))
