import numpy as np
from scipy.spatial.distance import cdist

from ..exceptions import TrainingError, ValidationError
from .models import Classifier, LabeledFeatureSet


class KNNClassifier(Classifier):
    """
    k-nearest-neighbour vote under the Euclidean distance.

    Neighbours are ordered by distance, then by label. A vote tie goes to the
    tied class whose nearest member comes first in that order, which also
    resolves exact distance ties toward the lowest class index.
    """

    kind = "knn"

    def __init__(self, k: int = 1):
        super().__init__()
        if int(k) != k or k < 1:
            raise ValidationError("k", f"must be a positive integer, got {k}")
        self.k = int(k)
        self.train_features = np.zeros((0, 0))
        self.train_labels = np.zeros(0, dtype=int)

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]

    def fit(self, train: LabeledFeatureSet) -> "KNNClassifier":
        if len(train) == 0:
            raise TrainingError("knn: empty training set")
        if self.k > len(train):
            raise ValidationError("k", f"k={self.k} exceeds the {len(train)} training rows")
        self.train_features = train.features.copy()
        self.train_labels = train.labels.copy()
        self.metadata = {'k': self.k, 'n_train': len(train)}
        self._fitted = True
        return self

    def _predict(self, x: np.ndarray) -> np.ndarray:
        distances = cdist(x, self.train_features, metric='sqeuclidean')
        labels = np.broadcast_to(self.train_labels, distances.shape)
        order = np.lexsort((labels, distances), axis=-1)[:, :self.k]
        predictions = np.empty(x.shape[0], dtype=int)
        for q, neighbours in enumerate(order):
            votes = self.train_labels[neighbours]
            classes, first_seen, counts = np.unique(votes, return_index=True, return_counts=True)
            tied = counts == counts.max()
            predictions[q] = classes[tied][np.argmin(first_seen[tied])]
        return predictions

    def params_dict(self) -> dict:
        return {'k': self.k, 'train_features': self.train_features.tolist(),
                'train_labels': self.train_labels.tolist()}

    @classmethod
    def from_params(cls, params: dict) -> "KNNClassifier":
        model = cls(params['k'])
        model.train_features = np.asarray(params['train_features'], dtype=float)
        model.train_labels = np.asarray(params['train_labels'], dtype=int)
        model._fitted = True
        return model


def knn_train(train: LabeledFeatureSet, k: int) -> KNNClassifier:
    return KNNClassifier(k).fit(train)


def knn_predict(model: KNNClassifier, x: np.ndarray) -> np.ndarray:
    return model.predict(x)
