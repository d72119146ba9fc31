"""Second-order gradient-boosted trees with logistic loss.

Trees are grown by exact greedy search over sorted feature values using
the regularized gain

    gain = 1/2 * [T(GL)^2/(HL+lambda) + T(GR)^2/(HR+lambda) - T(G)^2/(H+lambda)] - gamma

with ``T`` the L1 soft-threshold by ``alpha``. A split is kept only when
its gain is positive and both children reach ``min_child_weight`` hessian
mass. Leaf weights are ``-eta * T(G)/(H+lambda)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, SpecError
from .base import ModelKind, Predictor, as_labels, as_matrix, make_rng, sigmoid
from .trees import Tree, _TreeBuilder, midpoint, sorted_columns

DEFAULT_PARAMS = {
    "eta": 0.3,
    "min_child_weight": 1.0,
    "max_depth": 6,
    "subsample": 1.0,
    "colsample_bytree": 1.0,
    "alpha": 0.0,
    "lambda": 1.0,
    "gamma": 0.0,
    "n_rounds": 100,
}


def check_params(params: dict) -> dict:
    unknown = set(params) - set(DEFAULT_PARAMS)
    if unknown:
        raise SpecError(f"unknown GBT parameters: {sorted(unknown)}")
    p = {**DEFAULT_PARAMS, **params}
    if not 0 < p["eta"] <= 1:
        raise SpecError("eta must lie in (0, 1]")
    if p["min_child_weight"] < 0:
        raise SpecError("min_child_weight must be >= 0")
    if int(p["max_depth"]) != p["max_depth"] or p["max_depth"] < 1:
        raise SpecError("max_depth must be an integer >= 1")
    for key in ("subsample", "colsample_bytree"):
        if not 0 < p[key] <= 1:
            raise SpecError(f"{key} must lie in (0, 1]")
    for key in ("alpha", "lambda", "gamma"):
        if p[key] < 0:
            raise SpecError(f"{key} must be >= 0")
    if int(p["n_rounds"]) != p["n_rounds"] or p["n_rounds"] < 1:
        raise SpecError("n_rounds must be an integer >= 1")
    p["max_depth"] = int(p["max_depth"])
    p["n_rounds"] = int(p["n_rounds"])
    return p


def _thresholded(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def leaf_objective(G, H, alpha, lam):
    """Structure score T(G)^2 / (H + lambda); zero when the denominator is infinite."""
    TG = _thresholded(G, alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.isinf(lam) | (H + lam == 0), 0.0, TG * TG / (H + lam))


def leaf_weight(G, H, alpha, lam) -> float:
    if math.isinf(lam) or H + lam == 0:
        return 0.0
    return float(-_thresholded(G, alpha) / (H + lam))


def best_gain_split(X, g, h, rows, features, p):
    """Exact greedy second-order split; ``None`` if no positive-gain cut exists."""
    m = len(rows)
    if m < 2:
        return None
    order, xs = sorted_columns(X, rows, features)
    gs, hs = g[rows][order], h[rows][order]
    GL = np.cumsum(gs, axis=0)[:-1]
    HL = np.cumsum(hs, axis=0)[:-1]
    G, H = g[rows].sum(), h[rows].sum()
    GR, HR = G - GL, H - HL
    a, lam = p["alpha"], p["lambda"]
    gain = 0.5 * (leaf_objective(GL, HL, a, lam) + leaf_objective(GR, HR, a, lam)
                  - leaf_objective(G, H, a, lam)) - p["gamma"]
    valid = (xs[:-1] < xs[1:]) & (HL >= p["min_child_weight"]) & (HR >= p["min_child_weight"])
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    flat = np.argmax(gain.T)
    j, i = divmod(int(flat), m - 1)
    if not gain[i, j] > 0:
        return None
    return int(features[j]), midpoint(xs[i, j], xs[i + 1, j]), float(gain[i, j])


def grow_boosting_tree(X, g, h, rows, features, p) -> Tree:
    builder = _TreeBuilder()
    stack = [(builder.add(), rows, 0)]
    while stack:
        node, r, depth = stack.pop()
        builder.value[node] = p["eta"] * leaf_weight(g[r].sum(), h[r].sum(), p["alpha"], p["lambda"])
        if depth >= p["max_depth"]:
            continue
        split = best_gain_split(X, g, h, r, features, p)
        if split is None:
            continue
        f, thr, _ = split
        mask = X[r, f] <= thr
        builder.feature[node] = f
        builder.threshold[node] = thr
        left, right = builder.add(), builder.add()
        builder.left[node], builder.right[node] = left, right
        stack.append((right, r[~mask], depth + 1))
        stack.append((left, r[mask], depth + 1))
    return builder.finish()


def logistic_loss(y, margin) -> float:
    """Mean negative log-likelihood of 0/1 labels under sigmoid(margin)."""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def logistic_grad_hess(y, margin):
    p = sigmoid(margin)
    return p - y, p * (1.0 - p)


@dataclass
class GradientBoostedTrees(Predictor):
    trees: list[Tree]
    params: dict
    base_margin: float = 0.0
    loss_history: list[float] = field(default_factory=list)
    kind: ModelKind = ModelKind.GBT
    threshold: float = 0.5

    def margin(self, X):
        X = as_matrix(X)
        out = np.full(len(X), self.base_margin)
        for t in self.trees:
            out += t.predict(X)
        return out

    def score(self, X):
        return sigmoid(self.margin(X))


def fit_gbt(X, y, params=None, seed=None) -> GradientBoostedTrees:
    """Boost ``n_rounds`` trees from the symmetric start score 0.5.

    ``loss_history[k]`` is the mean training log-loss after ``k`` rounds.
    """
    p = check_params(params or {})
    X = as_matrix(X)
    y = as_labels(y, len(X))
    n, d = X.shape
    if len(np.unique(X, axis=0)) < 2:
        raise DataError("need at least two distinct rows")
    rng = make_rng(seed)
    margin = np.zeros(n)
    trees, history = [], [logistic_loss(y, margin)]
    n_cols = max(1, int(round(p["colsample_bytree"] * d)))
    for _ in range(p["n_rounds"]):
        g, h = logistic_grad_hess(y, margin)
        if p["subsample"] < 1:
            rows = np.nonzero(rng.random(n) < p["subsample"])[0]
            if len(rows) == 0:
                rows = np.array([rng.integers(n)])
        else:
            rows = np.arange(n)
        if n_cols < d:
            features = np.sort(rng.choice(d, size=n_cols, replace=False))
        else:
            features = np.arange(d)
        tree = grow_boosting_tree(X, g, h, rows, features, p)
        trees.append(tree)
        margin = margin + tree.predict(X)
        history.append(logistic_loss(y, margin))
    return GradientBoostedTrees(trees, p, 0.0, history)
