"""Common predictor interface and small numeric helpers."""
from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit

from ..errors import ClassBalanceError, DataError


class ModelKind(str, enum.Enum):
    ELASTIC_LINEAR = "elastic_linear"
    ELASTIC_LOGISTIC = "elastic_logistic"
    SVM_RBF = "svm_rbf"
    GBT = "gbt"
    ROTATION_FOREST = "rotation_forest"
    RANDOM_FOREST = "random_forest"
    MLP = "mlp"
    CART = "cart"


class Predictor:
    """A fitted binary model.

    ``score`` returns a real value whose range depends on the model;
    ``classify`` thresholds it at ``threshold`` (ties go to class 1).
    """

    kind: ModelKind
    threshold: float = 0.5

    def score(self, X) -> np.ndarray:
        raise NotImplementedError

    def classify(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(np.int8)


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("feature matrix contains non-finite values")
    return X


def as_labels(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if n is not None and len(y) != n:
        raise DataError(f"{len(y)} labels for {n} rows")
    if not np.isfinite(y).all():
        raise DataError("labels contain non-finite values")
    return y


def require_both_classes(y) -> None:
    y = np.asarray(y)
    if not ((y == 0).any() and (y == 1).any()):
        raise ClassBalanceError("both classes must be present in the training labels")


def sigmoid(z):
    return expit(z)


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
