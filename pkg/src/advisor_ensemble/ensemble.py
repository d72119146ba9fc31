"""Per-advisor stacking and bagging.

Each advisor trains five base models on its own selected features, stacks
their out-of-fold scores with three meta-learners plus their average, and
repeats this over bootstrap samples of the training set. The result is four
agent score streams per advisor on the validation dates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import pandas as pd

from .errors import (
    AdvisorEnsembleError,
    ClassBalanceError,
    DegenerateTargetError,
    LeakageError,
    PipelineError,
    SchemaError,
    SpecError,
)
from .learners import HyperparamSearchSpec, IntUniform, LogUniform, ModelKind, Uniform, fit_model, tune
from .learners.base import as_labels, as_matrix
from .learners.tuning import TuneResult
from .online import AgentMatrix
from .seeding import derive_rng, derive_seed


class Stacker(str, enum.Enum):
    LOGISTIC = "LOGISTIC"
    XGBOOST = "XGBOOST"
    ROTFOREST = "ROTFOREST"
    AVERAGED = "AVERAGED"


STACKERS = (Stacker.LOGISTIC, Stacker.XGBOOST, Stacker.ROTFOREST, Stacker.AVERAGED)

BASE_KINDS = (
    ModelKind.ELASTIC_LINEAR,
    ModelKind.ELASTIC_LOGISTIC,
    ModelKind.SVM_RBF,
    ModelKind.GBT,
    ModelKind.ROTATION_FOREST,
)


@dataclass(frozen=True)
class AdvisorSpec:
    name: str
    feature_pool: tuple[str, ...]
    selected_features: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "feature_pool", tuple(self.feature_pool))
        object.__setattr__(self, "selected_features", tuple(self.selected_features))
        extra = [f for f in self.selected_features if f not in set(self.feature_pool)]
        if extra:
            raise SchemaError(f"advisor {self.name!r}: selected features outside its pool: {extra}")

    def with_selection(self, selected: Sequence[str]) -> "AdvisorSpec":
        return AdvisorSpec(self.name, self.feature_pool, tuple(selected))


class Fittable(Protocol):
    name: str

    def fit(self, X, y, seed): ...


@dataclass(frozen=True)
class BaseModel:
    """A base learner with fixed hyperparameters."""

    name: str
    kind: ModelKind
    params: dict = field(default_factory=dict)

    def fit(self, X, y, seed):
        return fit_model(self.kind, X, y, self.params, seed=seed)


@dataclass(frozen=True)
class FoldRecord:
    fold: int
    held_out_rows: tuple[int, ...]
    trained_ids: frozenset


@dataclass
class MetaFeatures:
    """Out-of-fold training scores and full-fit validation scores, one column per model."""

    train: np.ndarray
    valid: np.ndarray
    model_names: list[str]
    row_ids: np.ndarray
    folds: list[FoldRecord]
    thresholds: tuple[float, ...] = ()

    def check_no_leakage(self) -> None:
        """Every training row is covered once, by a fold model that never saw its row."""
        covered = np.zeros(len(self.row_ids), dtype=int)
        for rec in self.folds:
            for r in rec.held_out_rows:
                covered[r] += 1
                if int(self.row_ids[r]) in rec.trained_ids:
                    raise LeakageError(
                        f"row {r} (id {int(self.row_ids[r])}) was scored by fold {rec.fold}, "
                        "whose models trained on it"
                    )
        if not (covered == 1).all():
            raise LeakageError("out-of-fold scores do not cover every training row exactly once")


def _wrap(exc: Exception, what: str) -> PipelineError:
    err = PipelineError(f"{what}: {type(exc).__name__}: {exc}", stage=what)
    err.__cause__ = exc
    return err


def stack_meta_features(models: Sequence[Fittable], X, y, X_valid, folds: int = 5, seed: int = 0,
                        row_ids=None) -> MetaFeatures:
    """Out-of-fold base-model scores for stacking.

    Folds are contiguous blocks over the distinct values of ``row_ids``
    (time order), so repeated rows of a bootstrap sample always share a
    fold and can never be trained on and scored by the same fold model.
    """
    X = as_matrix(X)
    y = as_labels(y, len(X))
    Xv = as_matrix(X_valid)
    ids = np.arange(len(y)) if row_ids is None else np.asarray(row_ids)
    if len(ids) != len(y):
        raise SchemaError("row_ids do not match the training rows")
    distinct = np.unique(ids)
    if folds < 2 or len(distinct) < folds:
        raise SpecError(f"cannot build {folds} folds from {len(distinct)} distinct rows")
    blocks = np.array_split(distinct, folds)
    train_meta = np.full((len(y), len(models)), np.nan)
    records = []
    for k, block in enumerate(blocks):
        test = np.nonzero(np.isin(ids, block))[0]
        train = np.nonzero(~np.isin(ids, block))[0]
        for m, model in enumerate(models):
            try:
                fitted = model.fit(X[train], y[train], derive_seed(seed, "fold", k, model.name))
                train_meta[test, m] = fitted.score(X[test])
            except AdvisorEnsembleError as exc:
                raise _wrap(exc, f"fold {k} / model {model.name}") from exc
        records.append(FoldRecord(k, tuple(test.tolist()), frozenset(ids[train].tolist())))
    valid_meta = np.empty((len(Xv), len(models)))
    thresholds = []
    for m, model in enumerate(models):
        try:
            fitted = model.fit(X, y, derive_seed(seed, "full", model.name))
        except AdvisorEnsembleError as exc:
            raise _wrap(exc, f"full fit / model {model.name}") from exc
        valid_meta[:, m] = fitted.score(Xv)
        thresholds.append(float(getattr(fitted, "threshold", 0.5)))
    meta = MetaFeatures(train_meta, valid_meta, [m.name for m in models], ids, records, tuple(thresholds))
    meta.check_no_leakage()
    return meta


@dataclass(frozen=True)
class StackerSettings:
    """Meta-learner settings; the logistic stacker's penalty is tuned by CV."""

    logistic_search: HyperparamSearchSpec = field(default_factory=lambda: HyperparamSearchSpec(
        grid={"alpha": [0.0, 0.5, 1.0], "lambda": [0.1, 1.0, 10.0]}, cv_folds=5, objective="mse"))
    gbt_params: dict = field(default_factory=lambda: {"max_depth": 2, "eta": 0.1, "n_rounds": 100})
    rotation_params: dict = field(default_factory=lambda: {"n_trees": 10, "subset_size": 3})


def fit_stackers(train_meta, y, valid_meta, settings: StackerSettings | None = None,
                 seed: int = 0) -> dict[Stacker, np.ndarray]:
    """Validation scores of the three meta-learners and of their mean."""
    settings = settings or StackerSettings()
    M = as_matrix(train_meta)
    y = as_labels(y, len(M))
    Mv = as_matrix(valid_meta)
    if M.shape[1] != Mv.shape[1]:
        raise SchemaError("train and validation meta-features have different columns")
    if np.all(y == y[0]):
        raise DegenerateTargetError("stacking target is constant")
    best = tune(ModelKind.ELASTIC_LOGISTIC, M, y, settings.logistic_search, seed=derive_seed(seed, "stk-tune"))
    out = {
        Stacker.LOGISTIC: fit_model(ModelKind.ELASTIC_LOGISTIC, M, y, best.best).score(Mv),
        Stacker.XGBOOST: fit_model(ModelKind.GBT, M, y, settings.gbt_params,
                                   seed=derive_seed(seed, "stk-gbt")).score(Mv),
        Stacker.ROTFOREST: fit_model(ModelKind.ROTATION_FOREST, M, y, settings.rotation_params,
                                     seed=derive_seed(seed, "stk-rot")).score(Mv),
    }
    out[Stacker.AVERAGED] = (out[Stacker.LOGISTIC] + out[Stacker.XGBOOST] + out[Stacker.ROTFOREST]) / 3.0
    return out


def stacked_scores(models, X, y, X_valid, folds=5, seed=0, row_ids=None,
                   settings: StackerSettings | None = None):
    """One pass of stacking: returns (stacker scores, meta-features)."""
    meta = stack_meta_features(models, X, y, X_valid, folds, derive_seed(seed, "meta"), row_ids)
    try:
        scores = fit_stackers(meta.train, y, meta.valid, settings, derive_seed(seed, "stackers"))
    except AdvisorEnsembleError as exc:
        raise _wrap(exc, "stackers") from exc
    return scores, meta


@dataclass(frozen=True)
class AgentPredictions:
    advisor: str
    stacker: Stacker
    scores: np.ndarray

    @property
    def classes(self) -> np.ndarray:
        return (self.scores >= 0.5).astype(np.int8)


@dataclass(frozen=True)
class BaggingSettings:
    n_samples: int = 10
    sample_frac: float = 0.8
    replace: bool = True
    folds: int = 5
    max_retries: int = 20

    def __post_init__(self):
        if self.n_samples < 1:
            raise SpecError("need at least one bootstrap sample")
        if not 0 < self.sample_frac <= 1:
            raise SpecError("sample_frac must lie in (0, 1]")
        if self.folds < 2:
            raise SpecError("stacking needs at least 2 folds")

    def sample_size(self, n: int) -> int:
        return max(1, int(round(self.sample_frac * n)))


@dataclass
class SampleRecord:
    index: int
    rows: np.ndarray
    attempts: int
    scores: dict[Stacker, np.ndarray]
    meta: MetaFeatures


@dataclass
class AdvisorResult:
    advisor: AdvisorSpec
    agents: list[AgentPredictions]
    samples: list[SampleRecord]
    tuning: dict[str, TuneResult]
    base_models: list[BaseModel]


def draw_sample(n: int, y, settings: BaggingSettings, rng) -> tuple[np.ndarray, int]:
    """Sorted row indices of one bootstrap sample containing both classes."""
    size = settings.sample_size(n)
    for attempt in range(1, settings.max_retries + 1):
        if settings.replace:
            rows = rng.integers(0, n, size)
        elif size == n:
            rows = np.arange(n)
        else:
            rows = rng.choice(n, size, replace=False)
        rows = np.sort(rows)
        sample_y = y[rows]
        if (sample_y == 0).any() and (sample_y == 1).any():
            return rows, attempt
    raise ClassBalanceError(f"no bootstrap sample with both classes after {settings.max_retries} draws")


def bagged_advisor(advisor: AdvisorSpec, X, y, X_valid, models: Sequence[Fittable],
                   bagging: BaggingSettings | None = None, stackers: StackerSettings | None = None,
                   seed: int = 0) -> tuple[list[AgentPredictions], list[SampleRecord]]:
    """Average each stacker's validation scores over bootstrap samples."""
    bagging = bagging or BaggingSettings()
    X = as_matrix(X)
    y = as_labels(y, len(X))
    Xv = as_matrix(X_valid)
    samples = []
    for b in range(bagging.n_samples):
        rng = derive_rng(seed, advisor.name, "bootstrap", b)
        rows, attempts = draw_sample(len(y), y, bagging, rng)
        try:
            scores, meta = stacked_scores(models, X[rows], y[rows], Xv, bagging.folds,
                                          derive_seed(seed, advisor.name, "sample", b), rows, stackers)
        except PipelineError as exc:
            raise PipelineError(f"sample {b}: {exc}", stage=exc.stage) from exc
        samples.append(SampleRecord(b, rows, attempts, scores, meta))
    bagged = {s: np.mean(np.stack([smp.scores[s] for smp in samples]), axis=0) for s in STACKERS[:3]}
    # same value as bagging the per-sample averages, but exactly the mean of the three columns
    bagged[Stacker.AVERAGED] = (bagged[Stacker.LOGISTIC] + bagged[Stacker.XGBOOST] + bagged[Stacker.ROTFOREST]) / 3.0
    agents = [AgentPredictions(advisor.name, s, bagged[s]) for s in STACKERS]
    return agents, samples


@dataclass(frozen=True)
class BaseSearch:
    """How to obtain one base model's hyperparameters: a search, or fixed values."""

    kind: ModelKind
    search: HyperparamSearchSpec | None = None
    fixed: dict = field(default_factory=dict)


def default_base_searches(cv_folds: int = 10, gbt_budget: int = 60) -> list[BaseSearch]:
    alphas = [round(0.1 * i, 1) for i in range(11)]
    lambdas = [0.001, 0.01, 0.1, 1.0, 10.0]
    return [
        BaseSearch(ModelKind.ELASTIC_LINEAR, HyperparamSearchSpec(
            grid={"alpha": alphas, "lambda": lambdas}, cv_folds=cv_folds, objective="mse")),
        BaseSearch(ModelKind.ELASTIC_LOGISTIC, HyperparamSearchSpec(
            grid={"alpha": alphas, "lambda": lambdas}, cv_folds=cv_folds, objective="mse")),
        BaseSearch(ModelKind.SVM_RBF, HyperparamSearchSpec(
            grid={"C": [0.1, 1.0, 10.0, 100.0], "gamma": [0.01, 0.1, 1.0, 10.0]},
            cv_folds=cv_folds, objective="misclassification")),
        BaseSearch(ModelKind.GBT, HyperparamSearchSpec(
            distributions={
                "eta": LogUniform(0.01, 0.3), "max_depth": IntUniform(2, 8),
                "min_child_weight": Uniform(1.0, 10.0), "subsample": Uniform(0.5, 1.0),
                "colsample_bytree": Uniform(0.5, 1.0), "alpha": Uniform(0.0, 5.0),
                "lambda": Uniform(0.0, 5.0), "gamma": Uniform(0.0, 5.0),
            },
            budget=gbt_budget, cv_folds=cv_folds, objective="mse", fixed={"n_rounds": 100})),
        BaseSearch(ModelKind.ROTATION_FOREST, fixed={"n_trees": 10, "subset_size": 3}),
    ]


def tune_base_models(X, y, searches: Sequence[BaseSearch], seed: int = 0):
    """Tune every base model once on the full training set."""
    models, reports = [], {}
    for s in searches:
        name = s.kind.value
        if s.search is None:
            models.append(BaseModel(name, s.kind, dict(s.fixed)))
            continue
        try:
            res = tune(s.kind, X, y, s.search, seed=derive_seed(seed, "tune", name))
        except AdvisorEnsembleError as exc:
            raise _wrap(exc, f"tuning {name}") from exc
        reports[name] = res
        models.append(BaseModel(name, s.kind, {**res.best, **s.fixed}))
    return models, reports


def run_advisor(advisor: AdvisorSpec, train_X: pd.DataFrame, train_y, valid_X: pd.DataFrame,
                searches: Sequence[BaseSearch], bagging: BaggingSettings | None = None,
                stackers: StackerSettings | None = None, seed: int = 0) -> AdvisorResult:
    if not advisor.selected_features:
        raise SchemaError(f"advisor {advisor.name!r} has no selected features")
    cols = list(advisor.selected_features)
    X = train_X[cols].to_numpy(dtype=float)
    Xv = valid_X[cols].to_numpy(dtype=float)
    models, reports = tune_base_models(X, train_y, searches, derive_seed(seed, advisor.name))
    agents, samples = bagged_advisor(advisor, X, train_y, Xv, models, bagging, stackers, seed)
    return AdvisorResult(advisor, agents, samples, reports, models)


def build_all_advisors(advisors: Sequence[AdvisorSpec], train_X: pd.DataFrame, train_y,
                       valid_X: pd.DataFrame, valid_dates, searches: Sequence[BaseSearch],
                       bagging: BaggingSettings | None = None, stackers: StackerSettings | None = None,
                       seed: int = 0) -> tuple[AgentMatrix, list[AdvisorResult]]:
    """Agent matrix with columns: advisors in the given order x STACKERS."""
    names = [a.name for a in advisors]
    if len(set(names)) != len(names):
        raise SchemaError("advisor names must be unique")
    results = []
    for adv in advisors:
        try:
            results.append(run_advisor(adv, train_X, train_y, valid_X, searches, bagging, stackers, seed))
        except AdvisorEnsembleError as exc:
            raise PipelineError(f"advisor {adv.name!r}: {exc}", stage=f"advisor:{adv.name}") from exc
    columns, labels = [], []
    for res in results:
        by_stacker = {a.stacker: a for a in res.agents}
        for s in STACKERS:
            columns.append(by_stacker[s].scores)
            labels.append((res.advisor.name, s.value))
    matrix = AgentMatrix(pd.DatetimeIndex(valid_dates), np.column_stack(columns), tuple(labels))
    return matrix, results


def leakage_checks(results: Sequence[AdvisorResult]) -> int:
    """Re-run the structural no-leakage assertion; returns the number of folds checked."""
    n = 0
    for res in results:
        for smp in res.samples:
            smp.meta.check_no_leakage()
            n += len(smp.meta.folds)
    return n

