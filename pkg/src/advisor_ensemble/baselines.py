"""Static single-model baselines scored against the online ensemble."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AdvisorEnsembleError, PipelineError, SchemaError
from .learners import HyperparamSearchSpec, ModelKind, fit_model, tune
from .online import evaluate_excluding_burnin
from .seeding import derive_seed

BASELINE_NAMES = {
    ModelKind.SVM_RBF: "SVM",
    ModelKind.MLP: "NeuralNetwork",
    ModelKind.RANDOM_FOREST: "RandomForest",
}

ONLINE_CAVEAT = (
    "The online-ensemble row uses the (f, lambda) pair with the lowest error in the "
    "diagnostic grid over the validation period, so it is chosen in hindsight."
)


def default_baseline_searches(cv_folds: int = 10) -> dict[ModelKind, HyperparamSearchSpec]:
    return {
        ModelKind.SVM_RBF: HyperparamSearchSpec(
            grid={"C": [0.1, 1.0, 10.0, 100.0], "gamma": [0.01, 0.1, 1.0, 10.0]},
            cv_folds=cv_folds, objective="misclassification"),
        ModelKind.MLP: HyperparamSearchSpec(
            grid={"lr": [0.01, 0.1], "momentum": [0.5, 0.9]},
            cv_folds=cv_folds, objective="misclassification",
            fixed={"hidden": 20, "epochs": 200, "batch_size": 16, "patience": 20}),
        ModelKind.RANDOM_FOREST: HyperparamSearchSpec(
            grid={"n_trees": [100, 300], "mtry": [1, 2, 4]},
            cv_folds=cv_folds, objective="misclassification"),
    }


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    error: float
    params: dict = field(default_factory=dict)


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    burn_in: int
    n_eval_days: int
    features: list[str]
    note: str = ONLINE_CAVEAT

    def __post_init__(self):
        for r in self.rows:
            if not 0.0 <= r.error <= 1.0:
                raise SchemaError(f"error of {r.model} outside [0, 1]: {r.error}")

    def error_of(self, model: str) -> float:
        return next(r.error for r in self.rows if r.model == model)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "error", "params"])
            for r in self.rows:
                w.writerow([r.model, repr(r.error), ";".join(f"{k}={r.params[k]!r}" for k in sorted(r.params))])

    def to_text(self) -> str:
        width = max(len(r.model) for r in self.rows)
        lines = [f"misclassification error on validation days {self.burn_in + 1}..{self.burn_in + self.n_eval_days}"]
        lines += [f"  {r.model.ljust(width)}  {r.error:.4f}" for r in self.rows]
        lines.append(f"note: {self.note}")
        return "\n".join(lines) + "\n"


def run_baselines(X_train, y_train, X_valid, y_valid, burn_in: int, searches=None, seed: int = 0,
                  features=None) -> list[ComparisonRow]:
    """Tune each baseline by CV on the training rows, refit, score validation.

    Validation errors skip the first ``burn_in`` days, the same days the
    online ensemble excludes.
    """
    searches = searches or default_baseline_searches()
    Xt = np.asarray(X_train, dtype=float)
    Xv = np.asarray(X_valid, dtype=float)
    yt = np.asarray(y_train, dtype=float)
    yv = np.asarray(y_valid)
    if Xt.shape[1] != Xv.shape[1]:
        raise SchemaError("train and validation features differ")
    rows = []
    for kind, spec in searches.items():
        kind = ModelKind(kind)
        name = BASELINE_NAMES.get(kind, kind.value)
        try:
            best = tune(kind, Xt, yt, spec, seed=derive_seed(seed, "baseline-tune", name))
            model = fit_model(kind, Xt, yt, best.best, seed=derive_seed(seed, "baseline-fit", name))
        except AdvisorEnsembleError as exc:
            raise PipelineError(f"baseline {name}: {exc}", stage=f"baseline:{name}") from exc
        err = evaluate_excluding_burnin(model.classify(Xv), yv, burn_in)
        rows.append(ComparisonRow(name, err, dict(best.best)))
    return rows


def comparison_report(baseline_rows, online_error: float, online_params: dict, burn_in: int,
                      n_valid: int, features) -> ComparisonReport:
    rows = [*baseline_rows, ComparisonRow("OnlineEnsemble", online_error, dict(online_params))]
    return ComparisonReport(rows, burn_in, n_valid - burn_in, list(features))
