"""From-scratch classifiers (SVM, KNN, random forest, MLP) and evaluation."""

from .base import (KINDS, Standardizer, TrainedModel, apply_standardizer, encode_labels,
                   fit_standardizer, load_model, save_model, split_stratified)
from .evaluation import (DISPLAY_NAMES, PUBLISHED_BASELINE, ComparisonReport, ConfusionMatrix,
                         compare_classifiers, evaluate, predict, predict_batch, train_kind)
from .forest import train_random_forest
from .knn import train_knn
from .mlp import train_mlp
from .svm import SvmParams, grid_search_svm, train_svm

__all__ = [
    "KINDS", "Standardizer", "TrainedModel", "apply_standardizer", "encode_labels",
    "fit_standardizer", "load_model", "save_model", "split_stratified",
    "DISPLAY_NAMES", "PUBLISHED_BASELINE", "ComparisonReport", "ConfusionMatrix",
    "compare_classifiers", "evaluate", "predict", "predict_batch", "train_kind",
    "train_random_forest", "train_knn", "train_mlp", "SvmParams", "grid_search_svm", "train_svm",
]
