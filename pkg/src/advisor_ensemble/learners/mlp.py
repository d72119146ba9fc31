"""Three-layer perceptron (one sigmoid hidden layer) trained by SGD with momentum."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SpecError, TrainingError
from .base import ModelKind, Predictor, as_labels, as_matrix, make_rng, sigmoid


@dataclass
class MLPParams:
    W1: np.ndarray  # (d, hidden)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden,)
    b2: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])

    @classmethod
    def unflat(cls, theta, d, hidden) -> "MLPParams":
        theta = np.asarray(theta, dtype=float)
        k = d * hidden
        return cls(theta[:k].reshape(d, hidden).copy(), theta[k:k + hidden].copy(),
                   theta[k + hidden:k + 2 * hidden].copy(), float(theta[-1]))


def forward(params: MLPParams, X):
    H = sigmoid(X @ params.W1 + params.b1)
    return H, sigmoid(H @ params.W2 + params.b2)


def loss_and_grad(params: MLPParams, X, y):
    """Mean binary cross-entropy and its gradient (same layout as ``flat``)."""
    m = len(X)
    H, p = forward(params, X)
    z2 = H @ params.W2 + params.b2
    loss = float(np.mean(np.logaddexp(0.0, z2) - y * z2))
    d2 = (p - y) / m
    gW2 = H.T @ d2
    gb2 = d2.sum()
    d1 = np.outer(d2, params.W2) * H * (1.0 - H)
    gW1 = X.T @ d1
    gb1 = d1.sum(axis=0)
    return loss, np.concatenate([gW1.ravel(), gb1, gW2, [gb2]])


@dataclass
class MLP(Predictor):
    params: MLPParams
    loss_history: list[float] = field(default_factory=list)
    kind: ModelKind = ModelKind.MLP
    threshold: float = 0.5

    def score(self, X):
        return forward(self.params, as_matrix(X))[1]


def init_params(d, hidden, rng) -> MLPParams:
    r1 = np.sqrt(6.0 / (d + hidden))
    r2 = np.sqrt(6.0 / (hidden + 1))
    return MLPParams(rng.uniform(-r1, r1, (d, hidden)), np.zeros(hidden),
                     rng.uniform(-r2, r2, hidden), 0.0)


def fit_mlp(X, y, hidden=20, lr=0.1, momentum=0.9, epochs=200, batch_size=16, seed=None,
            patience=20, min_delta=1e-6) -> MLP:
    """Mini-batch SGD with momentum on the mean cross-entropy.

    Training stops early once the full-batch training loss has not improved
    by ``min_delta`` for ``patience`` consecutive epochs.
    """
    if hidden < 1 or lr <= 0 or not 0 <= momentum < 1 or epochs < 0 or batch_size < 1:
        raise SpecError("invalid MLP hyperparameters")
    X = as_matrix(X)
    y = as_labels(y, len(X))
    n, d = X.shape
    rng = make_rng(seed)
    params = init_params(d, hidden, rng)
    theta = params.flat()
    velocity = np.zeros_like(theta)
    history = [loss_and_grad(params, X, y)[0]]
    best, stale = history[0], 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            _, grad = loss_and_grad(MLPParams.unflat(theta, d, hidden), X[rows], y[rows])
            velocity = momentum * velocity - lr * grad
            theta = theta + velocity
        params = MLPParams.unflat(theta, d, hidden)
        loss = loss_and_grad(params, X, y)[0]
        if not np.isfinite(loss) or not np.isfinite(theta).all():
            raise TrainingError(f"MLP training diverged (loss {loss}); try a lower learning rate")
        history.append(loss)
        if loss < best - min_delta:
            best, stale = loss, 0
        else:
            stale += 1
            if stale >= patience:
                break
    return MLP(params, history)
