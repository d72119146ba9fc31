"""Array-backed binary decision trees and an exact greedy Gini CART."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ModelKind, Predictor, as_labels, as_matrix, make_rng

LEAF = -1


@dataclass
class Tree:
    """Flat tree storage; node 0 is the root.

    Internal nodes route ``x[feature] <= threshold`` to ``left``.
    Leaves have ``feature == -1`` and carry ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by every row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while len(active):
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


class _TreeBuilder:
    """Collects nodes in preorder while a splitter grows the tree."""

    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=float),
        )


def midpoint(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2.0
    # rounding can land on hi, which would send hi to the left child
    return lo if mid >= hi else mid


def sorted_columns(X: np.ndarray, rows: np.ndarray, features: np.ndarray):
    """Sort the node's rows along each candidate feature (stable)."""
    sub = X[np.ix_(rows, features)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    return order, xs


def best_gini_split(X, y, rows, features, min_samples_leaf=1):
    """Exact greedy search minimizing the weighted Gini impurity.

    Returns ``(feature, threshold, impurity)`` or ``None`` when no cut
    between distinct values satisfies the leaf-size constraint. Ties
    resolve to the earliest feature in ``features``, then the lowest cut.
    """
    m = len(rows)
    if m < 2 * min_samples_leaf:
        return None
    order, xs = sorted_columns(X, rows, features)
    ys = y[rows][order]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    pos_left = np.cumsum(ys, axis=0)[:-1]
    pos_total = y[rows].sum()
    pos_right = pos_total - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    weighted = n_left * 2.0 * p_l * (1.0 - p_l) + n_right * 2.0 * p_r * (1.0 - p_r)
    valid = xs[:-1] < xs[1:]
    if min_samples_leaf > 1:
        ok = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        valid &= ok
    if not valid.any():
        return None
    weighted = np.where(valid, weighted, np.inf)
    # column-major scan so the first feature wins ties
    flat = np.argmin(weighted.T)
    j, i = divmod(int(flat), m - 1)
    thr = midpoint(xs[i, j], xs[i + 1, j])
    return int(features[j]), thr, float(weighted[i, j])


def grow_gini_tree(X, y, max_depth=None, min_samples_leaf=1, max_features=None, rng=None) -> Tree:
    """Unpruned CART with Gini impurity.

    ``max_features`` features are drawn per node (all when ``None``); if
    none of them admits a split, the remaining ones are tried as well.
    Leaves store the class-1 fraction of their training rows.
    """
    n, d = X.shape
    builder = _TreeBuilder()
    stack = [(builder.add(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        yr = y[rows]
        builder.value[node] = float(yr.mean())
        pure = yr.min() == yr.max()
        if pure or (max_depth is not None and depth >= max_depth):
            continue
        if max_features is None or max_features >= d:
            candidates = [np.arange(d)]
        else:
            perm = rng.permutation(d)
            candidates = [perm[:max_features], perm[max_features:]]
        split = None
        for feats in candidates:
            if len(feats):
                split = best_gini_split(X, y, rows, feats, min_samples_leaf)
            if split is not None:
                break
        if split is None:
            continue
        f, thr, _ = split
        mask = X[rows, f] <= thr
        builder.feature[node] = f
        builder.threshold[node] = thr
        left, right = builder.add(), builder.add()
        builder.left[node], builder.right[node] = left, right
        stack.append((right, rows[~mask], depth + 1))
        stack.append((left, rows[mask], depth + 1))
    return builder.finish()


@dataclass
class CARTClassifier(Predictor):
    tree: Tree
    kind: ModelKind = ModelKind.CART
    threshold: float = 0.5

    def score(self, X):
        return self.tree.predict(as_matrix(X))


def fit_cart(X, y, max_depth=None, min_samples_leaf=1, max_features=None, seed=None) -> CARTClassifier:
    X = as_matrix(X)
    y = as_labels(y, len(X))
    tree = grow_gini_tree(X, y, max_depth, min_samples_leaf, max_features, make_rng(seed))
    return CARTClassifier(tree)
