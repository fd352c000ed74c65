"""
Statistical features of a coefficient vector and z-score normalization.

    F1  mean |β_i|
    F2  sample standard deviation (divisor M - 1)
    F3  kurtosis m4 / m2² (central moments, not excess)
    F4  ½ Σ β_i²
    F5  sqrt(mean β_i²)
    F6  mean |β_{i+1} - β_i| over the M - 1 forward differences
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import DegenerateInputError, ValidationError
from ..io_utils import atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

FEATURE_NAMES: Tuple[str, ...] = ("F1", "F2", "F3", "F4", "F5", "F6")
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    f1_mean_abs: float
    f2_std: float
    f3_kurtosis: float
    f4_shannon_energy: float
    f5_rms: float
    f6_mean_abs_derivative: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f1_mean_abs, self.f2_std, self.f3_kurtosis,
                         self.f4_shannon_energy, self.f5_rms, self.f6_mean_abs_derivative])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        values = [float(v) for v in values]
        if len(values) != N_FEATURES:
            raise ValidationError("features", f"expected {N_FEATURES} values, got {len(values)}")
        return cls(*values)


def _feature_array(beta: np.ndarray, constant_kurtosis: Optional[float] = None) -> np.ndarray:
    m = beta.shape[0]
    if m < 2:
        raise ValidationError("beta", f"need at least 2 coefficients, got {m}")
    if np.ptp(beta) == 0.0:
        if constant_kurtosis is None:
            raise DegenerateInputError("constant coefficient vector: kurtosis (F3) is undefined")
        kurt = constant_kurtosis
    else:
        kurt = float(stats.kurtosis(beta, fisher=False, bias=True))
    energy = 0.5 * float(beta @ beta)
    return np.array([
        float(np.mean(np.abs(beta))),
        float(np.std(beta, ddof=1)),
        kurt,
        energy,
        float(np.sqrt(2.0 * energy / m)),
        float(np.mean(np.abs(np.diff(beta)))),
    ])


def extract_features(beta) -> FeatureVector:
    """F1-F6 of a full coefficient vector (Coefficients or array)"""
    values = getattr(beta, 'values', beta)
    return FeatureVector.from_array(_feature_array(np.asarray(values, dtype=float)))


def feature_names(per_group: bool = False, group_names: Sequence[str] = ()) -> Tuple[str, ...]:
    if not per_group:
        return FEATURE_NAMES
    return tuple(f"{group}_{name}" for group in group_names for name in FEATURE_NAMES)


def extract_feature_matrix(coefficients: np.ndarray, per_group: bool = False,
                           group_slices: Sequence[slice] = ()) -> np.ndarray:
    """
    Feature rows for a (P, M) coefficient matrix.

    In per-group mode each group contributes six features; a group that was
    zeroed entirely has no defined kurtosis and gets F3 = 0.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.ndim != 2:
        raise ValidationError("coefficients", f"expected a (P, M) matrix, got shape {coefficients.shape}")
    if not per_group:
        return np.vstack([_feature_array(row) for row in coefficients])
    if not group_slices:
        raise ValidationError("group_slices", "per-group features need the dictionary groups")
    return np.vstack([
        np.concatenate([_feature_array(row[cols], constant_kurtosis=0.0) for cols in group_slices])
        for row in coefficients
    ])


# =============================================================================
# NORMALIZATION
# =============================================================================

@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    names: Tuple[str, ...] = FEATURE_NAMES

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {'names': list(self.names), 'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Normalizer":
        return cls(mean=np.asarray(data['mean'], dtype=float), std=np.asarray(data['std'], dtype=float),
                   names=tuple(data['names']))


def zscore_fit(train_features: np.ndarray, names: Optional[Sequence[str]] = None) -> Normalizer:
    """Per-feature mean and sample std of the training rows only"""
    x = np.asarray(train_features, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("train_features", f"need at least 2 rows, got shape {x.shape}")
    names = tuple(names) if names is not None else (FEATURE_NAMES if x.shape[1] == N_FEATURES
                                                     else tuple(f"x{j}" for j in range(x.shape[1])))
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    constant = np.flatnonzero(~(std > 0))
    if constant.size:
        raise DegenerateInputError(f"feature {names[constant[0]]} is constant on the training set")
    return Normalizer(mean=mean, std=std, names=names)


def zscore_apply(normalizer: Normalizer, x: np.ndarray) -> np.ndarray:
    return normalizer.apply(x)


def zscore_inverse(normalizer: Normalizer, z: np.ndarray) -> np.ndarray:
    return normalizer.inverse(z)


def write_features(features: np.ndarray, labels: np.ndarray, path: Union[str, Path],
                   names: Sequence[str] = FEATURE_NAMES, normalizer: Optional[Normalizer] = None) -> Path:
    """Feature CSV with a header row, plus a JSON sidecar holding the normalizer"""
    path = Path(path)
    frame = pd.DataFrame(np.asarray(features, dtype=float), columns=list(names))
    frame.insert(0, 'label', np.asarray(labels))
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))
    if normalizer is not None:
        atomic_write_json(path.with_suffix(".normalizer.json"), normalizer.to_dict())
    logger.info(f"Features written to {path}")
    return path
