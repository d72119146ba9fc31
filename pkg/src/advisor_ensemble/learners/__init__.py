"""Base learners, baselines and hyperparameter search."""
from .base import ModelKind, Predictor
from .forests import (
    RandomForest,
    RotationForest,
    fit_random_forest,
    fit_rotation_forest,
    permutation_importance,
)
from .gbt import GradientBoostedTrees, fit_gbt
from .linear import ElasticLinear, ElasticLogistic, fit_elastic_linear, fit_elastic_logistic
from .mlp import MLP, fit_mlp
from .registry import fit_model
from .serialize import load_predictor, save_predictor
from .svm import SVMRBF, fit_svm_rbf
from .trees import CARTClassifier, fit_cart
from .tuning import (
    Choice,
    HyperparamSearchSpec,
    IntUniform,
    LogUniform,
    TuneResult,
    Uniform,
    contiguous_folds,
    tune,
)

__all__ = [
    "CARTClassifier", "Choice", "ElasticLinear", "ElasticLogistic", "GradientBoostedTrees",
    "HyperparamSearchSpec", "IntUniform", "LogUniform", "MLP", "ModelKind", "Predictor",
    "RandomForest", "RotationForest", "SVMRBF", "TuneResult", "Uniform", "contiguous_folds",
    "fit_cart", "fit_elastic_linear", "fit_elastic_logistic", "fit_gbt", "fit_mlp", "fit_model",
    "fit_random_forest", "fit_rotation_forest", "fit_svm_rbf", "load_predictor",
    "permutation_importance", "save_predictor", "tune",
]
