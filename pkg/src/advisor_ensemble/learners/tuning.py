"""Grid and random hyperparameter search with contiguous-block K-fold CV."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SpecError
from ..seeding import derive_rng, derive_seed
from .base import ModelKind, as_labels, as_matrix
from .registry import fit_model

OBJECTIVES = ("mse", "misclassification")


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def sample(self, rng):
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))


@dataclass(frozen=True)
class IntUniform:
    """Integers in ``[low, high]`` inclusive."""

    low: int
    high: int

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class Choice:
    values: tuple

    def sample(self, rng):
        return self.values[int(rng.integers(len(self.values)))]


@dataclass
class HyperparamSearchSpec:
    """Either an exhaustive ``grid`` or ``budget`` draws from ``distributions``.

    ``fixed`` parameters are passed to every candidate unchanged.
    """

    grid: dict | None = None
    distributions: dict | None = None
    budget: int = 1
    cv_folds: int = 10
    objective: str = "mse"
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.grid is None) == (self.distributions is None):
            raise SpecError("give exactly one of grid or distributions")
        if self.grid is not None and (not self.grid or any(len(v) == 0 for v in self.grid.values())):
            raise SpecError("empty hyperparameter grid")
        if self.budget < 1:
            raise SpecError("budget must be >= 1")
        if self.cv_folds < 2:
            raise SpecError("cv_folds must be >= 2")
        if self.objective not in OBJECTIVES:
            raise SpecError(f"objective must be one of {OBJECTIVES}")

    def candidates(self, seed) -> list[dict]:
        if self.grid is not None:
            keys = list(self.grid)
            return [dict(zip(keys, combo)) for combo in itertools.product(*self.grid.values())]
        rng = derive_rng(seed, "random-search")
        return [{k: dist.sample(rng) for k, dist in self.distributions.items()}
                for _ in range(self.budget)]


def contiguous_folds(n: int, k: int) -> list[np.ndarray]:
    """Split ``range(n)`` into ``k`` consecutive blocks (sizes differ by <= 1)."""
    if k < 2 or n < k:
        raise SpecError(f"cannot cut {n} rows into {k} folds")
    return np.array_split(np.arange(n), k)


def cv_error(kind, X, y, params, folds, objective="mse", seed=0) -> float:
    """Pooled held-out error over the folds."""
    X = as_matrix(X)
    y = as_labels(y, len(X))
    total = 0.0
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(len(y)), test, assume_unique=True)
        model = fit_model(kind, X[train], y[train], params, seed=derive_seed(seed, "fold", f))
        if objective == "mse":
            resid = model.score(X[test]) - y[test]
            total += float(resid @ resid)
        else:
            total += float((model.classify(X[test]) != y[test]).sum())
    return total / len(y)


@dataclass
class TuneResult:
    kind: ModelKind
    best: dict
    best_score: float
    table: list[tuple[dict, float]]

    def to_csv(self, path):
        keys = sorted({k for params, _ in self.table for k in params})
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*keys, "cv_score"])
            for params, score in self.table:
                w.writerow([*(repr(params.get(k, "")) for k in keys), repr(score)])


def tune(kind, X, y, spec: HyperparamSearchSpec, seed=0) -> TuneResult:
    """Return the candidate with the lowest CV objective (first one on ties)."""
    kind = ModelKind(kind)
    X = as_matrix(X)
    y = as_labels(y, len(X))
    folds = contiguous_folds(len(y), spec.cv_folds)
    table = []
    best, best_score = None, math.inf
    for i, cand in enumerate(spec.candidates(seed)):
        params = {**spec.fixed, **cand}
        score = cv_error(kind, X, y, params, folds, spec.objective, derive_seed(seed, "cand", i))
        table.append((params, score))
        if score < best_score:
            best, best_score = params, score
    if best is None:
        # every candidate scored NaN
        best, best_score = table[0]
    return TuneResult(kind, best, best_score, table)
