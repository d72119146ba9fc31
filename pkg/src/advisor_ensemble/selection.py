"""Hybrid feature selection: significance filter, three rankers, rank fusion.

Every ranker reorders columns by name before doing any arithmetic, so a
feature's score does not depend on its column position.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import betainc

from .errors import (
    ClassBalanceError,
    DegenerateTargetError,
    InsufficientDataError,
    SchemaError,
    SpecError,
)
from .learners.forests import fit_random_forest, permutation_importance


class RankMethod(str, enum.Enum):
    R2 = "r2"
    RELIEFF = "relieff"
    RF_IMPORTANCE = "rf_importance"
    COMBINED = "combined"


@dataclass(frozen=True)
class RankEntry:
    name: str
    rank: int
    score: float


@dataclass(frozen=True)
class FeatureRanking:
    """Entries sorted by rank (1 = most important)."""

    entries: tuple[RankEntry, ...]
    method: RankMethod

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def rank_of(self) -> dict[str, int]:
        return {e.name: e.rank for e in self.entries}

    def score_of(self) -> dict[str, float]:
        return {e.name: e.score for e in self.entries}


def _ranking(names, scores, method) -> FeatureRanking:
    """Rank by descending score; equal scores fall back to feature name."""
    order = sorted(range(len(names)), key=lambda i: (-scores[i], names[i]))
    entries = tuple(RankEntry(names[i], r + 1, float(scores[i])) for r, i in enumerate(order))
    return FeatureRanking(entries, method)


def _canonical(X: pd.DataFrame) -> pd.DataFrame:
    return X[sorted(X.columns)]


def _check_target(y, min_rows=3):
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < min_rows:
        raise InsufficientDataError(f"need at least {min_rows} rows, got {len(y)}")
    if np.all(y == y[0]):
        raise DegenerateTargetError("target is constant")
    return y


def univariate_fits(X: pd.DataFrame, y) -> pd.DataFrame:
    """Least-squares fit of y on each feature alone: slope, R^2 and slope p-value.

    The two-sided p-value uses the exact Student t distribution with n-2
    degrees of freedom, via P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
    Zero-variance features get R^2 = 0 and p = 1.
    """
    y = _check_target(y)
    n = len(y)
    df = n - 2
    A = X.to_numpy(dtype=float)
    xc = A - A.mean(axis=0)
    yc = y - y.mean()
    sxx = (xc * xc).sum(axis=0)
    sxy = xc.T @ yc
    syy = yc @ yc
    ok = sxx > 0
    slope = np.where(ok, sxy / np.where(ok, sxx, 1.0), 0.0)
    r2 = np.where(ok, sxy * sxy / (np.where(ok, sxx, 1.0) * syy), 0.0)
    r2 = np.clip(r2, 0.0, 1.0)
    rss = syy * (1.0 - r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = np.where(rss > 0, r2 * df / (1.0 - r2), np.inf)
        pval = np.where(ok, betainc(df / 2.0, 0.5, df / (df + t2)), 1.0)
    pval = np.where(ok & ~np.isfinite(t2), 0.0, pval)
    return pd.DataFrame({"slope": slope, "r2": r2, "p_value": pval}, index=X.columns)


def pvalue_filter(X: pd.DataFrame, y, threshold: float = 0.5) -> list[str]:
    """Names (input order) whose slope p-value is <= ``threshold``."""
    fits = univariate_fits(X, y)
    return [c for c in X.columns if fits.at[c, "p_value"] <= threshold]


def r2_rank(X: pd.DataFrame, y) -> FeatureRanking:
    if X.shape[1] == 0:
        raise InsufficientDataError("no features to rank")
    X = _canonical(X)
    fits = univariate_fits(X, y)
    return _ranking(list(X.columns), fits["r2"].to_numpy(), RankMethod.R2)


def relieff_weights(A: np.ndarray, y, k_neighbors=10, n_iterations=None, seed=None) -> np.ndarray:
    """ReliefF for two classes.

    For each sampled instance, the k nearest hits and k nearest misses
    (Manhattan distance) move a feature's weight down by its normalized
    difference to the hits and up by its difference to the misses.
    """
    y = np.asarray(y).ravel()
    n, d = A.shape
    span = A.max(axis=0) - A.min(axis=0)
    scale = np.where(span > 0, span, 1.0)
    dist = cdist(A, A, metric="cityblock")
    if n_iterations is None or n_iterations >= n:
        sample = np.arange(n)
    else:
        sample = np.sort(np.random.default_rng(seed).choice(n, n_iterations, replace=False))
    m = len(sample)
    W = np.zeros(d)
    for i in sample:
        same = np.nonzero((y == y[i]) & (np.arange(n) != i))[0]
        other = np.nonzero(y != y[i])[0]
        hits = same[np.argsort(dist[i, same], kind="stable")[:k_neighbors]]
        misses = other[np.argsort(dist[i, other], kind="stable")[:k_neighbors]]
        if len(hits):
            W -= (np.abs(A[hits] - A[i]) / scale).sum(axis=0) / (m * len(hits))
        W += (np.abs(A[misses] - A[i]) / scale).sum(axis=0) / (m * len(misses))
    W[span == 0] = 0.0
    return W


def relieff_rank(X: pd.DataFrame, y, k_neighbors: int = 10, n_iterations=None, seed=None) -> FeatureRanking:
    if k_neighbors < 1:
        raise SpecError("k_neighbors must be >= 1")
    if n_iterations is not None and n_iterations < 1:
        raise SpecError("n_iterations must be >= 1")
    y = np.asarray(y).ravel()
    if not ((y == 0).any() and (y == 1).any()):
        raise ClassBalanceError("ReliefF needs both classes")
    X = _canonical(X)
    W = relieff_weights(X.to_numpy(dtype=float), y, k_neighbors, n_iterations, seed)
    return _ranking(list(X.columns), W, RankMethod.RELIEFF)


def rf_importance_rank(X: pd.DataFrame, y, n_trees: int = 200, seed=0) -> FeatureRanking:
    """Rank by mean decrease in out-of-bag accuracy under permutation."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 10:
        raise InsufficientDataError("random-forest importance needs at least 10 rows")
    if not ((y == 0).any() and (y == 1).any()):
        raise ClassBalanceError("random-forest importance needs both classes")
    X = _canonical(X)
    rng = np.random.default_rng(seed)
    A = X.to_numpy(dtype=float)
    forest = fit_random_forest(A, y, n_trees=n_trees, seed=rng)
    imp = permutation_importance(forest, A, y, seed=rng)
    return _ranking(list(X.columns), imp, RankMethod.RF_IMPORTANCE)


@dataclass(frozen=True)
class Selection:
    selected: list[str]
    combined: FeatureRanking
    rankings: tuple[FeatureRanking, ...]
    filtered: list[str]
    candidates: list[str]

    def to_csv(self, path) -> None:
        by_method = {r.method: r.rank_of() for r in self.rankings}
        chosen = set(self.selected)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "r2_rank", "relieff_rank", "rf_importance_rank",
                        "combined_rank", "combined_score", "selected"])
            for e in self.combined.entries:
                w.writerow([e.name,
                            by_method.get(RankMethod.R2, {}).get(e.name, ""),
                            by_method.get(RankMethod.RELIEFF, {}).get(e.name, ""),
                            by_method.get(RankMethod.RF_IMPORTANCE, {}).get(e.name, ""),
                            e.rank, repr(e.score), int(e.name in chosen)])


def n_keep(n: int, keep_fraction: float) -> int:
    if not 0 < keep_fraction <= 1:
        raise SpecError("keep_fraction must lie in (0, 1]")
    # exact decimal arithmetic: 0.2 * 15 must give 3, not 3.0000000000000004
    return max(1, math.ceil(Fraction(str(keep_fraction)) * n))


def combine_rankings(rankings) -> FeatureRanking:
    """Mean rank per feature (rank 1 = smallest mean; ties by name)."""
    rankings = list(rankings)
    if not rankings:
        raise SpecError("no rankings to combine")
    names = set(rankings[0].names)
    for r in rankings[1:]:
        if set(r.names) != names:
            raise SchemaError("rankings cover different feature sets")
    rank_maps = [r.rank_of() for r in rankings]
    # integer sums keep the mean independent of the order of the rankings
    mean_rank = {f: sum(m[f] for m in rank_maps) / len(rank_maps) for f in names}
    order = sorted(names, key=lambda f: (mean_rank[f], f))
    entries = tuple(RankEntry(f, i + 1, mean_rank[f]) for i, f in enumerate(order))
    return FeatureRanking(entries, RankMethod.COMBINED)


def combine_and_select(rankings, keep_fraction: float = 0.2) -> list[str]:
    combined = combine_rankings(rankings)
    return combined.names[:n_keep(len(combined.entries), keep_fraction)]


def select_features(X: pd.DataFrame, y, p_threshold=0.5, keep_fraction=0.2, k_neighbors=10,
                    relieff_iterations=None, rf_trees=200, seed=0) -> Selection:
    """Full chain: p-value filter, R^2 / ReliefF / RF rankings, fusion, top cut."""
    filtered = pvalue_filter(X, y, p_threshold)
    if not filtered:
        raise InsufficientDataError(f"no feature passed the p-value filter (threshold {p_threshold})")
    Xf = X[filtered]
    rankings = (
        r2_rank(Xf, y),
        relieff_rank(Xf, y, k_neighbors, relieff_iterations, seed=seed),
        rf_importance_rank(Xf, y, rf_trees, seed=seed),
    )
    combined = combine_rankings(rankings)
    selected = combined.names[:n_keep(len(filtered), keep_fraction)]
    return Selection(selected, combined, rankings, filtered, list(X.columns))
