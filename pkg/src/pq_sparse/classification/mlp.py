"""
Multilayer perceptron: sigmoid hidden layers, softmax output, cross-entropy.

Trained by mini-batch gradient descent with momentum. A stratified slice of
the training rows is held out for early stopping and the weights with the
lowest hold-out loss are kept.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_softmax, softmax

from ..exceptions import TrainingError, ValidationError
from .models import Classifier, LabeledFeatureSet, require_classes, stratified_holdout

logger = logging.getLogger(__name__)

Layer = Tuple[np.ndarray, np.ndarray]

DEFAULT_HIDDEN = (20, 15, 10)


def init_params(sizes: Sequence[int], rng: np.random.Generator) -> List[Layer]:
    """Weights and biases uniform in ±1/sqrt(fan_in)"""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        params.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                       rng.uniform(-bound, bound, size=fan_out)))
    return params


def forward(params: Sequence[Layer], x: np.ndarray) -> List[np.ndarray]:
    """Activations of every layer; the last entry holds the output logits"""
    activations = [x]
    for weights, bias in params[:-1]:
        activations.append(expit(activations[-1] @ weights + bias))
    weights, bias = params[-1]
    activations.append(activations[-1] @ weights + bias)
    return activations


def cross_entropy(logits: np.ndarray, targets: np.ndarray) -> float:
    return float(-np.mean(np.sum(targets * log_softmax(logits, axis=1), axis=1)))


def loss_and_gradients(params: Sequence[Layer], x: np.ndarray, targets: np.ndarray) -> Tuple[float, List[Layer]]:
    """Mean cross-entropy over the batch and its gradient for every layer"""
    activations = forward(params, x)
    logits = activations[-1]
    loss = cross_entropy(logits, targets)
    delta = (softmax(logits, axis=1) - targets) / x.shape[0]
    gradients: List[Layer] = []
    for layer in range(len(params) - 1, -1, -1):
        weights, _ = params[layer]
        inputs = activations[layer]
        gradients.append((inputs.T @ delta, delta.sum(axis=0)))
        if layer > 0:
            delta = (delta @ weights.T) * inputs * (1.0 - inputs)
    gradients.reverse()
    return loss, gradients


class MLPClassifier(Classifier):
    kind = "mlp"

    def __init__(self, hidden: Sequence[int] = DEFAULT_HIDDEN, epochs: int = 500, batch_size: int = 32,
                 learning_rate: float = 0.1, momentum: float = 0.9, patience: int = 50,
                 validation_fraction: float = 0.1, seed: int = 0):
        super().__init__()
        if any(int(h) < 1 for h in hidden) or epochs < 1 or batch_size < 1:
            raise ValidationError("mlp", f"invalid architecture or schedule: hidden={list(hidden)}, "
                                         f"epochs={epochs}, batch_size={batch_size}")
        if not (0.0 <= validation_fraction < 1.0):
            raise ValidationError("validation_fraction", f"must be in [0, 1), got {validation_fraction}")
        self.hidden = tuple(int(h) for h in hidden)
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.seed = seed
        self.classes = np.zeros(0, dtype=int)
        self.params: List[Layer] = []

    @property
    def n_features(self) -> int:
        return self.params[0][0].shape[0] if self.params else 0

    def fit(self, train: LabeledFeatureSet) -> "MLPClassifier":
        classes, counts = require_classes(train, 1, self.kind)
        rng = np.random.default_rng(self.seed)
        targets = (train.labels[:, None] == classes[None, :]).astype(float)
        params = init_params((train.n_features, *self.hidden, classes.size), rng)

        if self.validation_fraction > 0 and counts.min() >= 2:
            fit_rows, held_rows = stratified_holdout(train.labels, self.validation_fraction, rng)
        else:
            fit_rows, held_rows = np.arange(len(train)), np.zeros(0, dtype=int)

        velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        best_loss, best_params, best_epoch, stale = np.inf, None, 0, 0
        epoch = 0
        for epoch in range(1, self.epochs + 1):
            order = fit_rows[rng.permutation(fit_rows.size)]
            for start in range(0, order.size, self.batch_size):
                batch = order[start:start + self.batch_size]
                loss, gradients = loss_and_gradients(params, train.features[batch], targets[batch])
                if not math.isfinite(loss):
                    raise TrainingError("mlp: loss became non-finite", {'epoch': epoch})
                for layer, ((w, b), (gw, gb), (vw, vb)) in enumerate(zip(params, gradients, velocity)):
                    vw = self.momentum * vw - self.learning_rate * gw
                    vb = self.momentum * vb - self.learning_rate * gb
                    velocity[layer] = (vw, vb)
                    params[layer] = (w + vw, b + vb)

            if held_rows.size:
                held_loss = cross_entropy(forward(params, train.features[held_rows])[-1], targets[held_rows])
                if held_loss < best_loss:
                    best_loss, best_epoch, stale = held_loss, epoch, 0
                    best_params = [(w.copy(), b.copy()) for w, b in params]
                else:
                    stale += 1
                    if stale >= self.patience:
                        logger.debug(f"mlp: early stop at epoch {epoch} (best {best_epoch})")
                        break

        if best_params is not None:
            params = best_params
        self.params = params
        self.classes = classes
        self.metadata = {'hidden': list(self.hidden), 'epochs_run': epoch, 'best_epoch': best_epoch,
                         'holdout_loss': None if best_params is None else best_loss,
                         'optimizer': 'sgd+momentum/cross-entropy', 'seed': self.seed}
        self._fitted = True
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(forward(self.params, x)[-1], axis=1)

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(forward(self.params, x)[-1], axis=1)]

    def params_dict(self) -> dict:
        return {'hidden': list(self.hidden), 'classes': self.classes.tolist(),
                'layers': [{'weights': w.tolist(), 'bias': b.tolist()} for w, b in self.params]}

    @classmethod
    def from_params(cls, params: dict) -> "MLPClassifier":
        model = cls(hidden=params['hidden'])
        model.classes = np.asarray(params['classes'], dtype=int)
        model.params = [(np.asarray(layer['weights'], dtype=float), np.asarray(layer['bias'], dtype=float))
                        for layer in params['layers']]
        model._fitted = True
        return model


def mlp_train(train: LabeledFeatureSet, architecture: Sequence[int] = DEFAULT_HIDDEN, seed: int = 0,
              **kwargs) -> MLPClassifier:
    return MLPClassifier(hidden=architecture, seed=seed, **kwargs).fit(train)


def mlp_predict(model: MLPClassifier, x: np.ndarray) -> np.ndarray:
    return model.predict(x)
