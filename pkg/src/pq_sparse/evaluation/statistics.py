"""
Splits, accuracy, confusion matrices and the Wilcoxon rank-sum test.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import stats

from ..exceptions import ValidationError
from ..signals.disturbances import LABELED_CLASSES

DEFAULT_CLASSES: Tuple[int, ...] = tuple(int(c) for c in LABELED_CLASSES)
EXACT_LIMIT = 12


def split_stratified(labels: np.ndarray, train_fraction: float,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per class, round(train_fraction * count) random rows go to train, the rest to test.

    Returns:
        Sorted (train, test) row indices
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValidationError("train_fraction", f"must be in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    train, test = [], []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if members.size < 2:
            raise ValidationError("labels", f"class {label} has {members.size} sample(s); need at least 2")
        n_train = int(round(train_fraction * members.size))
        if n_train == 0 or n_train == members.size:
            raise ValidationError("train_fraction",
                                  f"{train_fraction} leaves class {label} with an empty train or test part")
        chosen = members[rng.permutation(members.size)]
        train.append(chosen[:n_train])
        test.append(chosen[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValidationError("predictions", f"{predictions.shape[0]} predictions for {labels.shape[0]} labels")
    if labels.size == 0:
        raise ValidationError("labels", "accuracy of an empty test set is undefined")
    return float(np.mean(predictions == labels))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts by (true class row, predicted class column)"""
    counts: np.ndarray
    classes: Tuple[int, ...] = DEFAULT_CLASSES

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(self.diagonal.sum() / total) if total else 0.0

    def recall(self) -> np.ndarray:
        sums = self.row_sums
        return np.divide(self.diagonal, sums, out=np.zeros(len(self.classes)), where=sums > 0)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValidationError("classes", "cannot add confusion matrices over different classes")
        return ConfusionMatrix(self.counts + other.counts, self.classes)

    def to_list(self) -> list:
        return self.counts.tolist()


def confusion(predictions: Sequence[int], labels: Sequence[int],
              classes: Sequence[int] = DEFAULT_CLASSES) -> ConfusionMatrix:
    predictions, labels = np.asarray(predictions, dtype=int), np.asarray(labels, dtype=int)
    if predictions.shape != labels.shape:
        raise ValidationError("predictions", f"{predictions.shape[0]} predictions for {labels.shape[0]} labels")
    position = {int(c): i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    for true, predicted in zip(labels, predictions):
        if int(true) not in position or int(predicted) not in position:
            raise ValidationError("labels", f"label outside the class set {list(classes)}")
        counts[position[int(true)], position[int(predicted)]] += 1
    return ConfusionMatrix(counts, tuple(int(c) for c in classes))


def pooled_confusion(matrices: Iterable[ConfusionMatrix]) -> ConfusionMatrix:
    matrices = list(matrices)
    if not matrices:
        raise ValidationError("matrices", "nothing to pool")
    total = matrices[0]
    for matrix in matrices[1:]:
        total = total + matrix
    return total


@dataclass(frozen=True)
class RankSumResult:
    statistic: float
    p_value: float
    exact: bool

    def to_dict(self) -> dict:
        return {'statistic': self.statistic, 'p_value': self.p_value, 'exact': self.exact}


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> RankSumResult:
    """
    Two-sided Wilcoxon rank-sum test with midranks.

    The statistic is the rank sum W of ``a``. With at most twelve values in
    total the p-value is P(|W - E[W]| >= |w - E[W]|) over every assignment of
    the pooled ranks; otherwise a normal approximation with tie-corrected
    variance and continuity correction is used.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValidationError("samples", "both samples must be nonempty")
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    ranks = stats.rankdata(np.concatenate([a, b]))
    w = float(ranks[:n_a].sum())
    expected = n_a * (n + 1) / 2.0
    observed = abs(w - expected)

    if n <= EXACT_LIMIT:
        extreme = total = 0
        for subset in itertools.combinations(range(n), n_a):
            total += 1
            if abs(ranks[list(subset)].sum() - expected) >= observed - 1e-9:
                extreme += 1
        return RankSumResult(statistic=w, p_value=extreme / total, exact=True)

    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1))
    variance = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if variance <= 0:
        return RankSumResult(statistic=w, p_value=1.0, exact=False)
    z = max(observed - 0.5, 0.0) / math.sqrt(variance)
    return RankSumResult(statistic=w, p_value=min(1.0, 2.0 * float(stats.norm.sf(z))), exact=False)


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (zero for a single value)"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("values", "no values")
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), std
