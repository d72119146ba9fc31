"""Uniform ``fit_model(kind, X, y, params, seed)`` entry point."""
from __future__ import annotations

from ..errors import SpecError
from .base import ModelKind, Predictor
from .forests import fit_random_forest, fit_rotation_forest
from .gbt import fit_gbt
from .linear import fit_elastic_linear, fit_elastic_logistic
from .mlp import fit_mlp
from .svm import fit_svm_rbf
from .trees import fit_cart

PARAM_NAMES = {
    ModelKind.ELASTIC_LINEAR: {"alpha", "lambda"},
    ModelKind.ELASTIC_LOGISTIC: {"alpha", "lambda"},
    ModelKind.SVM_RBF: {"C", "gamma"},
    ModelKind.GBT: {"eta", "min_child_weight", "max_depth", "subsample", "colsample_bytree",
                    "alpha", "lambda", "gamma", "n_rounds"},
    ModelKind.ROTATION_FOREST: {"n_trees", "subset_size"},
    ModelKind.RANDOM_FOREST: {"n_trees", "mtry"},
    ModelKind.MLP: {"hidden", "lr", "momentum", "epochs", "batch_size", "patience"},
    ModelKind.CART: {"max_depth", "min_samples_leaf"},
}


def fit_model(kind, X, y, params=None, seed=None) -> Predictor:
    kind = ModelKind(kind)
    params = dict(params or {})
    unknown = set(params) - PARAM_NAMES[kind]
    if unknown:
        raise SpecError(f"unknown {kind.value} parameters: {sorted(unknown)}")
    if kind is ModelKind.ELASTIC_LINEAR:
        return fit_elastic_linear(X, y, params.get("alpha", 0.5), params.get("lambda", 1.0))
    if kind is ModelKind.ELASTIC_LOGISTIC:
        return fit_elastic_logistic(X, y, params.get("alpha", 0.5), params.get("lambda", 1.0))
    if kind is ModelKind.SVM_RBF:
        return fit_svm_rbf(X, y, params.get("C", 1.0), params.get("gamma", 1.0))
    if kind is ModelKind.GBT:
        return fit_gbt(X, y, params, seed=seed)
    if kind is ModelKind.ROTATION_FOREST:
        return fit_rotation_forest(X, y, params.get("n_trees", 10), params.get("subset_size", 3),
                                   seed=seed)
    if kind is ModelKind.RANDOM_FOREST:
        return fit_random_forest(X, y, params.get("n_trees", 100), params.get("mtry"), seed=seed)
    if kind is ModelKind.MLP:
        return fit_mlp(X, y, seed=seed, **params)
    return fit_cart(X, y, seed=seed, **params)
