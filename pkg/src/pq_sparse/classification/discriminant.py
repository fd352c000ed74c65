"""
Gaussian discriminant classifiers with equal class priors.

LDC shares the pooled covariance Σ = Σ_c (n_c / T) Σ_c; QDC keeps one
covariance per class and adds the log-determinant term. Every covariance is
regularized with ε I, ε = 1e-6 trace(Σ) / D, before factorization.
"""

import logging
from typing import List

import numpy as np
from scipy import linalg

from ..exceptions import TrainingError
from .models import Classifier, LabeledFeatureSet, require_classes

logger = logging.getLogger(__name__)

RIDGE_FACTOR = 1e-6


def _regularized(covariance: np.ndarray) -> np.ndarray:
    dim = covariance.shape[0]
    epsilon = RIDGE_FACTOR * np.trace(covariance) / dim
    return covariance + epsilon * np.eye(dim)


def _cholesky(covariance: np.ndarray, kind: str, label) -> np.ndarray:
    try:
        return linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError as e:
        raise TrainingError(f"{kind}: covariance is not positive definite after ridge", {'class': label}) from e


def _class_statistics(train: LabeledFeatureSet, classes: np.ndarray):
    means, covariances, counts = [], [], []
    for label in classes:
        rows = train.features[train.labels == label]
        means.append(rows.mean(axis=0))
        covariances.append(np.atleast_2d(np.cov(rows, rowvar=False, ddof=1)))
        counts.append(rows.shape[0])
    return np.array(means), covariances, np.array(counts)


class LinearDiscriminant(Classifier):
    kind = "ldc"

    def __init__(self):
        super().__init__()
        self.classes = np.zeros(0, dtype=int)
        self.means = np.zeros((0, 0))
        self.covariance = np.zeros((0, 0))

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def fit(self, train: LabeledFeatureSet) -> "LinearDiscriminant":
        classes, _ = require_classes(train, 2, self.kind)
        means, covariances, counts = _class_statistics(train, classes)
        pooled = sum((n / counts.sum()) * cov for n, cov in zip(counts, covariances))
        self.classes, self.means = classes, means
        self.covariance = _regularized(pooled)
        self._factor = _cholesky(self.covariance, self.kind, "pooled")
        self.metadata = {'priors': 'equal', 'ridge_factor': RIDGE_FACTOR, 'n_train': len(train)}
        self._fitted = True
        return self

    def scores(self, x: np.ndarray) -> np.ndarray:
        """δ_c(x) = x^T Σ^-1 μ_c - ½ μ_c^T Σ^-1 μ_c"""
        weights = linalg.cho_solve((self._factor, True), self.means.T)
        offsets = -0.5 * np.sum(self.means * weights.T, axis=1)
        return x @ weights + offsets[None, :]

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.scores(x), axis=1)]

    def params_dict(self) -> dict:
        return {'classes': self.classes.tolist(), 'means': self.means.tolist(),
                'covariance': self.covariance.tolist()}

    @classmethod
    def from_params(cls, params: dict) -> "LinearDiscriminant":
        model = cls()
        model.classes = np.asarray(params['classes'], dtype=int)
        model.means = np.asarray(params['means'], dtype=float)
        model.covariance = np.asarray(params['covariance'], dtype=float)
        model._factor = _cholesky(model.covariance, cls.kind, "pooled")
        model._fitted = True
        return model


class QuadraticDiscriminant(Classifier):
    kind = "qdc"

    def __init__(self):
        super().__init__()
        self.classes = np.zeros(0, dtype=int)
        self.means = np.zeros((0, 0))
        self.covariances: List[np.ndarray] = []

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def _factorize(self):
        self._factors = [_cholesky(cov, self.kind, int(label)) for cov, label in zip(self.covariances, self.classes)]
        self._log_dets = np.array([2.0 * np.sum(np.log(np.diag(f))) for f in self._factors])

    def fit(self, train: LabeledFeatureSet) -> "QuadraticDiscriminant":
        classes, counts = require_classes(train, 2, self.kind)
        small = classes[counts < train.n_features + 1]
        if small.size:
            logger.debug(f"qdc: classes {small.tolist()} have fewer than D+1 samples; relying on ridge")
        means, covariances, _ = _class_statistics(train, classes)
        self.classes, self.means = classes, means
        self.covariances = [_regularized(cov) for cov in covariances]
        self._factorize()
        self.metadata = {'priors': 'equal', 'ridge_factor': RIDGE_FACTOR, 'n_train': len(train)}
        self._fitted = True
        return self

    def scores(self, x: np.ndarray) -> np.ndarray:
        """-½ log|Σ_c| - ½ (x - μ_c)^T Σ_c^-1 (x - μ_c)"""
        out = np.empty((x.shape[0], self.classes.size))
        for c, (mean, factor) in enumerate(zip(self.means, self._factors)):
            z = linalg.solve_triangular(factor, (x - mean).T, lower=True)
            out[:, c] = -0.5 * self._log_dets[c] - 0.5 * np.sum(z * z, axis=0)
        return out

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.scores(x), axis=1)]

    def params_dict(self) -> dict:
        return {'classes': self.classes.tolist(), 'means': self.means.tolist(),
                'covariances': [cov.tolist() for cov in self.covariances]}

    @classmethod
    def from_params(cls, params: dict) -> "QuadraticDiscriminant":
        model = cls()
        model.classes = np.asarray(params['classes'], dtype=int)
        model.means = np.asarray(params['means'], dtype=float)
        model.covariances = [np.asarray(cov, dtype=float) for cov in params['covariances']]
        model._factorize()
        model._fitted = True
        return model


def ldc_train(train: LabeledFeatureSet) -> LinearDiscriminant:
    return LinearDiscriminant().fit(train)


def ldc_predict(model: LinearDiscriminant, x: np.ndarray) -> np.ndarray:
    return model.predict(x)


def qdc_train(train: LabeledFeatureSet) -> QuadraticDiscriminant:
    return QuadraticDiscriminant().fit(train)


def qdc_predict(model: QuadraticDiscriminant, x: np.ndarray) -> np.ndarray:
    return model.predict(x)
