"""Random forest and rotation forest on top of the Gini CART."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientDataError, SpecError
from .base import ModelKind, Predictor, as_labels, as_matrix, make_rng, require_both_classes
from .trees import Tree, grow_gini_tree


@dataclass
class RandomForest(Predictor):
    """Bootstrap ensemble of unpruned CARTs combined by majority vote.

    ``score`` is the fraction of trees voting for class 1, so an even
    split of votes classifies as 1.
    """

    trees: list[Tree]
    in_bag: np.ndarray  # (n_trees, n_train) bootstrap multiplicities
    kind: ModelKind = ModelKind.RANDOM_FOREST
    threshold: float = 0.5

    def tree_votes(self, X) -> np.ndarray:
        X = as_matrix(X)
        return np.stack([(t.predict(X) >= 0.5).astype(np.int8) for t in self.trees])

    def score(self, X):
        return self.tree_votes(X).mean(axis=0)

    def oob_mask(self) -> np.ndarray:
        return self.in_bag == 0

    def oob_scores(self, X_train) -> np.ndarray:
        """Per-row vote share over the trees that did not see that row.

        Rows that were in-bag for every tree get NaN.
        """
        votes = self.tree_votes(X_train).astype(float)
        oob = self.oob_mask()
        counts = oob.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, (votes * oob).sum(axis=0) / counts, np.nan)


def fit_random_forest(X, y, n_trees=100, mtry=None, seed=None, bootstrap=True,
                      min_samples_leaf=1) -> RandomForest:
    """``mtry`` defaults to floor(sqrt(d))."""
    if n_trees < 1:
        raise SpecError("n_trees must be >= 1")
    X = as_matrix(X)
    y = as_labels(y, len(X))
    require_both_classes(y)
    n, d = X.shape
    if mtry is None:
        mtry = max(1, int(math.sqrt(d)))
    if not 1 <= mtry <= d:
        raise SpecError(f"mtry must lie in [1, {d}], got {mtry}")
    rng = make_rng(seed)
    trees, in_bag = [], np.zeros((n_trees, n), dtype=np.int32)
    for t in range(n_trees):
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            rows.sort()
        else:
            rows = np.arange(n)
        np.add.at(in_bag[t], rows, 1)
        trees.append(grow_gini_tree(X[rows], y[rows], None, min_samples_leaf, mtry, rng))
    return RandomForest(trees, in_bag)


def permutation_importance(forest: RandomForest, X, y, seed=None) -> np.ndarray:
    """Mean decrease in out-of-bag accuracy when one feature is shuffled.

    For each tree, the OOB rows are scored as-is and with the feature's
    values permuted among those rows; the per-tree drops are averaged.
    Trees without OOB rows are skipped.
    """
    X = as_matrix(X)
    y = as_labels(y, len(X))
    n, d = X.shape
    if n < 10:
        raise InsufficientDataError("permutation importance needs at least 10 rows")
    rng = make_rng(seed)
    drops = np.zeros(d)
    used = 0
    oob_all = forest.oob_mask()
    for t, tree in enumerate(forest.trees):
        rows = np.nonzero(oob_all[t])[0]
        if len(rows) == 0:
            continue
        used += 1
        Xo = X[rows]
        base = ((tree.predict(Xo) >= 0.5) == y[rows]).mean()
        features = tree.used_features()
        for f in range(d):
            perm = rng.permutation(len(rows))
            if f not in features:
                # unused feature: shuffling cannot change the prediction
                continue
            Xp = Xo.copy()
            Xp[:, f] = Xo[perm, f]
            acc = ((tree.predict(Xp) >= 0.5) == y[rows]).mean()
            drops[f] += base - acc
    if used == 0:
        raise InsufficientDataError("no tree has out-of-bag rows")
    return drops / used


@dataclass
class Rotation:
    """Block-diagonal PCA rotation: ``(x - center) @ matrix``."""

    center: np.ndarray
    matrix: np.ndarray
    subsets: list[list[int]] = field(default_factory=list)

    def transform(self, X):
        return (X - self.center) @ self.matrix

    def inverse(self, Z):
        return Z @ self.matrix.T + self.center


def fit_rotation(X, subsets) -> Rotation:
    """PCA per feature subset (covariance eigendecomposition), all components kept."""
    n, d = X.shape
    center = X.mean(axis=0)
    R = np.zeros((d, d))
    for subset in subsets:
        idx = np.asarray(subset)
        Xs = X[:, idx] - center[idx]
        cov = Xs.T @ Xs / max(n - 1, 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals, kind="stable")[::-1]
        evecs = evecs[:, order]
        # sign convention: largest-magnitude loading positive
        flip = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(len(idx))])
        flip[flip == 0] = 1.0
        R[np.ix_(idx, idx)] = evecs * flip
    return Rotation(center, R, [list(map(int, s)) for s in subsets])


def random_partition(d: int, subset_size: int, rng) -> list[list[int]]:
    perm = rng.permutation(d)
    return [sorted(perm[i:i + subset_size].tolist()) for i in range(0, d, subset_size)]


@dataclass
class RotationForest(Predictor):
    """Each tree sees the full feature vector rotated by its own block PCA."""

    rotations: list[Rotation]
    trees: list[Tree]
    kind: ModelKind = ModelKind.ROTATION_FOREST
    threshold: float = 0.5

    def score(self, X):
        X = as_matrix(X)
        probs = [t.predict(r.transform(X)) for r, t in zip(self.rotations, self.trees)]
        return np.mean(probs, axis=0)


def fit_rotation_forest(X, y, n_trees=10, subset_size=3, seed=None, partitions=None) -> RotationForest:
    """``partitions`` forces the feature split of every tree (testing hook)."""
    if n_trees < 1 or subset_size < 1:
        raise SpecError("n_trees and subset_size must be >= 1")
    X = as_matrix(X)
    y = as_labels(y, len(X))
    require_both_classes(y)
    d = X.shape[1]
    rng = make_rng(seed)
    rotations, trees = [], []
    for t in range(n_trees):
        subsets = partitions[t] if partitions is not None else random_partition(d, subset_size, rng)
        rot = fit_rotation(X, subsets)
        rotations.append(rot)
        trees.append(grow_gini_tree(rot.transform(X), y))
    return RotationForest(rotations, trees)
