import numpy as np
import pytest

from pq_sparse.classification.discriminant import LinearDiscriminant, QuadraticDiscriminant
from pq_sparse.classification.mlp import MLPClassifier
from pq_sparse.classification.models import LabeledFeatureSet
from pq_sparse.classification.neighbors import KNNClassifier
from pq_sparse.classification.registry import (
    CLASSIFIER_NAMES,
    ClassifierSettings,
    load_model,
    make_classifier,
    model_from_dict,
    save_model,
)
from pq_sparse.classification.svm import SVMClassifier
from pq_sparse.exceptions import ConfigurationError, DatasetError

SETTINGS = ClassifierSettings(svm_cv_folds=3, svm_sigma_factors=(1.0,), svm_c_grid=(1.0, 10.0), mlp_epochs=20)


@pytest.fixture
def three_classes(rng):
    centers = [(0.0, 0.0, 0.0), (3.0, 0.0, 0.0), (0.0, 3.0, 1.0)]
    features = np.vstack([rng.normal(c, 0.4, size=(10, 3)) for c in centers])
    return LabeledFeatureSet(features, np.repeat([2, 4, 6], 10))


@pytest.mark.parametrize("name, kind", [("1-NN", KNNClassifier), ("3-NN", KNNClassifier),
                                        ("LDC", LinearDiscriminant), ("QDC", QuadraticDiscriminant),
                                        ("SVM", SVMClassifier), ("MLP", MLPClassifier)])
def test_make_classifier(name, kind):
    assert isinstance(make_classifier(name, SETTINGS, seed=1), kind)


def test_knn_neighbour_counts():
    assert make_classifier("1-NN").k == 1
    assert make_classifier("3-NN").k == 3


def test_settings_reach_the_models():
    svm = make_classifier("SVM", SETTINGS, seed=7)
    assert svm.cv_folds == 3 and svm.seed == 7 and svm.c_grid == (1.0, 10.0)
    mlp = make_classifier("MLP", SETTINGS, seed=8)
    assert mlp.epochs == 20 and mlp.seed == 8


def test_unknown_names():
    with pytest.raises(ConfigurationError):
        make_classifier("RandomForest")
    with pytest.raises(ConfigurationError):
        ClassifierSettings(names=("1-NN", "5-NN"))
    with pytest.raises(ConfigurationError):
        ClassifierSettings(svm_cv_folds=1)


def test_settings_dict_form():
    data = SETTINGS.to_dict()
    assert data['svm_c_grid'] == [1.0, 10.0]
    assert ClassifierSettings.from_dict(data) == SETTINGS
    with pytest.raises(ConfigurationError):
        ClassifierSettings.from_dict({"mlp_layers": 3})


@pytest.mark.parametrize("name", CLASSIFIER_NAMES)
def test_saved_models_predict_identically(tmp_path, three_classes, rng, name):
    model = make_classifier(name, SETTINGS, seed=3).fit(three_classes)
    path = save_model(model, tmp_path / f"{name}.json")
    loaded = load_model(path)
    queries = rng.uniform(-1, 4, size=(25, 3))
    np.testing.assert_array_equal(loaded.predict(queries), model.predict(queries))
    assert loaded.kind == model.kind
    assert loaded.metadata == model.to_dict()['metadata']


def test_load_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_model(tmp_path / "missing.json")
    with pytest.raises(DatasetError):
        model_from_dict({"kind": "forest", "params": {}})
