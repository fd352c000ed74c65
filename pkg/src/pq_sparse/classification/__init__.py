"""Coefficient features and the six classifiers"""

from .discriminant import LinearDiscriminant, QuadraticDiscriminant, ldc_predict, ldc_train, qdc_predict, qdc_train
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    Normalizer,
    extract_feature_matrix,
    extract_features,
    zscore_apply,
    zscore_fit,
    zscore_inverse,
)
from .mlp import MLPClassifier, mlp_predict, mlp_train
from .models import Classifier, LabeledFeatureSet
from .neighbors import KNNClassifier, knn_predict, knn_train
from .registry import CLASSIFIER_NAMES, ClassifierSettings, load_model, make_classifier, save_model
from .svm import SVMClassifier, svm_predict, svm_train
