"""Online re-weighting of agent votes with decay and a diversity bias.

Agents vote with hard classes. Every ``f`` days each agent's score grows by
``1 / (1 + lam * k)`` for every day it was right while ``k`` other agents
were also right, older scores decay by ``gamma``, and weights are the
normalized scores.

Floating-point conventions (so that results do not depend on summation
order): all aggregate sums are correctly rounded via ``math.fsum``, and the
vote decision compares the weight mass behind class 1 with the mass behind
class 0 exactly. Comparing unnormalized scores is the same test as
``sum(w[n] for n voting 1) >= 0.5`` and makes exact ties resolve to 1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import EvaluationError, ParameterError, SchemaError


@dataclass(frozen=True)
class OnlineParams:
    f: int
    gamma: float = 0.8
    lam: float = 0.0

    def __post_init__(self):
        if isinstance(self.f, bool) or int(self.f) != self.f or self.f < 1:
            raise ParameterError(f"update frequency must be an integer >= 1, got {self.f!r}")
        object.__setattr__(self, "f", int(self.f))
        if not (0.0 <= self.gamma <= 1.0):
            raise ParameterError(f"decay rate must lie in [0, 1], got {self.gamma!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ParameterError(f"diversity bias must be finite and >= 0, got {self.lam!r}")


def agent_label(advisor: str, stacker: str) -> str:
    return f"{advisor}/{stacker}"


@dataclass(frozen=True)
class AgentMatrix:
    """Per-day scores and classes of N agents, columns named (advisor, stacker)."""

    dates: pd.DatetimeIndex
    scores: np.ndarray
    names: tuple[tuple[str, str], ...]
    classes: np.ndarray = field(init=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2 or scores.shape[1] < 1:
            raise SchemaError("agent scores must be a T x N matrix with N >= 1")
        if scores.shape[0] != len(self.dates):
            raise SchemaError("agent scores and dates differ in length")
        if scores.shape[1] != len(self.names):
            raise SchemaError("agent names do not match the number of columns")
        if len(set(self.names)) != len(self.names):
            raise SchemaError("duplicate agent names")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "classes", (scores >= 0.5).astype(np.int8))

    def __len__(self):
        return len(self.dates)

    @property
    def n_agents(self) -> int:
        return len(self.names)

    @property
    def labels(self) -> list[str]:
        return [agent_label(a, s) for a, s in self.names]

    def advisor_of(self) -> dict[str, str]:
        return {agent_label(a, s): a for a, s in self.names}

    def to_csv(self, path) -> None:
        """Date, one score column and one class column per agent."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *(f"score:{a}" for a in self.labels), *(f"class:{a}" for a in self.labels)])
            for d, row, cls in zip(self.dates, self.scores, self.classes):
                w.writerow([d.date().isoformat(), *map(repr, row.tolist()), *map(int, cls)])

    @classmethod
    def from_csv(cls, path) -> "AgentMatrix":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        score_cols = [i for i, h in enumerate(header) if h.startswith("score:")]
        names = tuple(tuple(header[i][len("score:"):].split("/", 1)) for i in score_cols)
        dates = pd.DatetimeIndex([r[0] for r in body])
        scores = np.array([[float(r[i]) for i in score_cols] for r in body]).reshape(len(body), len(names))
        return cls(dates, scores, names)


@dataclass
class WeightHistory:
    """Weights and scores per epoch; epoch 0 is the uniform start.

    ``start_days[e]`` is the first day index whose vote uses epoch ``e``.
    """

    agents: list[str]
    start_days: list[int]
    weights: list[list[float]]
    scores: list[list[float]]
    dates: pd.DatetimeIndex | None = None

    def __len__(self):
        return len(self.start_days)

    @property
    def start_dates(self) -> list:
        if self.dates is None:
            return list(self.start_days)
        return [self.dates[d] for d in self.start_days]

    def weight_matrix(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.weights, columns=self.agents)
        df.insert(0, "start_day", self.start_days)
        if self.dates is not None:
            df.insert(1, "start_date", [d.date().isoformat() for d in self.start_dates])
        df.index.name = "epoch"
        return df

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "start_day", "start_date",
                        *(f"weight:{a}" for a in self.agents), *(f"score:{a}" for a in self.agents)])
            for e, (day, wt, sc) in enumerate(zip(self.start_days, self.weights, self.scores)):
                when = self.dates[day].date().isoformat() if self.dates is not None else ""
                w.writerow([e, day, when, *map(repr, wt), *map(repr, sc)])


@dataclass
class OnlineResult:
    predictions: np.ndarray
    history: WeightHistory
    params: OnlineParams


def _check_classes(classes, truth):
    classes = np.asarray(classes)
    truth = np.asarray(truth).ravel()
    if classes.ndim != 2 or classes.shape[1] < 1:
        raise SchemaError("class matrix must be T x N with N >= 1")
    if classes.shape[0] != len(truth):
        raise SchemaError(f"{classes.shape[0]} prediction rows but {len(truth)} labels")
    if not (np.isin(classes, (0, 1)).all() and np.isin(truth, (0, 1)).all()):
        raise SchemaError("classes and labels must be 0 or 1")
    return classes.astype(np.int8), truth.astype(np.int8)


def day_increments(correct_row, lam: float) -> list[float]:
    """Score increment of each agent for one day."""
    k = int(sum(correct_row))
    inc = 1.0 / (1.0 + lam * (k - 1)) if k else 0.0
    return [inc if c else 0.0 for c in correct_row]


def update_weights(window_classes, window_truth, old_scores, gamma: float, lam: float):
    """One epoch: returns ``(weights, scores)`` as lists of floats."""
    if not 0.0 <= gamma <= 1.0:
        raise ParameterError(f"decay rate must lie in [0, 1], got {gamma!r}")
    if not (math.isfinite(lam) and lam >= 0):
        raise ParameterError(f"diversity bias must be finite and >= 0, got {lam!r}")
    classes, truth = _check_classes(window_classes, window_truth)
    n = classes.shape[1]
    if len(old_scores) != n:
        raise SchemaError("old scores do not match the number of agents")
    if any(s < 0 for s in old_scores):
        raise ParameterError("scores must be >= 0")
    correct = (classes == truth[:, None]).tolist()
    per_day = [day_increments(row, lam) for row in correct]
    window = [math.fsum(day[a] for day in per_day) for a in range(n)]
    scores = [window[a] + gamma * float(old_scores[a]) for a in range(n)]
    total = math.fsum(scores)
    if total == 0.0:
        weights = [1.0 / n] * n
    else:
        weights = [s / total for s in scores]
    return weights, scores


def vote(class_rows, mass) -> np.ndarray:
    """Class 1 where the mass voting 1 is at least the mass voting 0."""
    out = np.empty(len(class_rows), dtype=np.int8)
    for t, row in enumerate(np.asarray(class_rows).tolist()):
        margin = math.fsum(m if c else -m for c, m in zip(row, mass))
        out[t] = margin >= 0.0
    return out


def run_online(classes, truth, params: OnlineParams, agents: Sequence[str] | None = None,
               dates: pd.DatetimeIndex | None = None) -> OnlineResult:
    """Predict window by window, updating weights after each full window.

    Days of a window are voted with the weights in force when it starts.
    The loop runs while ``i + f < T``; the remaining days (between 1 and
    ``f`` of them) are voted with the last weights and trigger no update.
    """
    classes, truth = _check_classes(classes, truth)
    T, n = classes.shape
    f = params.f
    if f >= T:
        raise ParameterError(f"update frequency f={f} must be smaller than the {T} available days")
    names = list(agents) if agents is not None else [f"agent{a}" for a in range(n)]
    weights = [1.0 / n] * n
    scores = [0.0] * n
    mass = [1.0] * n
    history = WeightHistory(names, [0], [list(weights)], [list(scores)], dates)
    preds = np.empty(T, dtype=np.int8)
    i = 0
    while i + f < T:
        preds[i:i + f] = vote(classes[i:i + f], mass)
        weights, scores = update_weights(classes[i:i + f], truth[i:i + f], scores, params.gamma, params.lam)
        mass = scores if math.fsum(scores) > 0 else [1.0] * n
        i += f
        history.start_days.append(i)
        history.weights.append(weights)
        history.scores.append(scores)
    preds[i:] = vote(classes[i:], mass)
    return OnlineResult(preds, history, params)


def _truth_array(agents: AgentMatrix, truth) -> np.ndarray:
    if hasattr(truth, "dates") and hasattr(truth, "labels"):
        if not agents.dates.equals(pd.DatetimeIndex(truth.dates)):
            raise SchemaError("agent predictions and labels are on different dates")
        return np.asarray(truth.labels)
    if isinstance(truth, pd.Series):
        if not agents.dates.equals(pd.DatetimeIndex(truth.index)):
            raise SchemaError("agent predictions and labels are on different dates")
        return truth.to_numpy()
    return np.asarray(truth)


def online_update(agents: AgentMatrix, truth, params: OnlineParams) -> OnlineResult:
    return run_online(agents.classes, _truth_array(agents, truth), params, agents.labels, agents.dates)


def evaluate_excluding_burnin(predictions, truth, f: int) -> float:
    """Misclassification rate over days f+1..T (the first f days are burn-in)."""
    predictions = np.asarray(predictions).ravel()
    truth = np.asarray(truth).ravel()
    if len(predictions) != len(truth):
        raise SchemaError("predictions and labels differ in length")
    if f < 0 or len(truth) <= f:
        raise EvaluationError(f"no days left after excluding the first {f}")
    return float(np.mean(predictions[f:] != truth[f:]))


def cumulative_accuracy(predictions, truth, f: int) -> np.ndarray:
    """Running accuracy from day f+1 on; NaN during burn-in."""
    predictions = np.asarray(predictions).ravel()
    truth = np.asarray(truth).ravel()
    if len(truth) <= f:
        raise EvaluationError(f"no days left after excluding the first {f}")
    out = np.full(len(truth), np.nan)
    hits = np.cumsum(predictions[f:] == truth[f:])
    out[f:] = hits / np.arange(1, len(hits) + 1)
    return out


def accuracy_history(agents: AgentMatrix, truth, params: OnlineParams) -> pd.Series:
    y = _truth_array(agents, truth)
    res = online_update(agents, y, params)
    return pd.Series(cumulative_accuracy(res.predictions, y, params.f), index=agents.dates,
                     name="cumulative_accuracy")


def weight_history_by_advisor(history: WeightHistory, grouping: dict[str, str]) -> pd.DataFrame:
    """Per-epoch total weight of each advisor's agents."""
    missing = [a for a in history.agents if a not in grouping]
    if missing:
        raise SchemaError(f"agents without an advisor: {missing}")
    advisors = list(dict.fromkeys(grouping[a] for a in history.agents))
    cols = {adv: [i for i, a in enumerate(history.agents) if grouping[a] == adv] for adv in advisors}
    rows = [[math.fsum(w[i] for i in cols[adv]) for adv in advisors] for w in history.weights]
    df = pd.DataFrame(rows, columns=advisors)
    df.insert(0, "start_day", history.start_days)
    if history.dates is not None:
        df.insert(1, "start_date", history.start_dates)
    df.index.name = "epoch"
    return df


@dataclass(frozen=True)
class GridRow:
    f: int
    lam: float
    gamma: float
    error: float


def grid_search_online(classes, truth, f_values, lambda_values, gamma: float = 0.8) -> list[GridRow]:
    """Post-burn-in error for every (f, lambda) pair, sorted by error.

    This is a diagnostic sweep over the evaluation period itself: picking
    the best row afterwards is hindsight, not model selection.
    """
    f_values, lambda_values = list(f_values), list(lambda_values)
    if not f_values or not lambda_values:
        raise ParameterError("grid needs at least one f and one lambda value")
    classes, truth = _check_classes(classes, truth)
    rows = []
    for f in f_values:
        for lam in lambda_values:
            p = OnlineParams(f, gamma, lam)
            res = run_online(classes, truth, p)
            rows.append(GridRow(p.f, float(lam), float(gamma), evaluate_excluding_burnin(res.predictions, truth, p.f)))
    rows.sort(key=lambda r: (r.error, r.f, r.lam))
    return rows


def grid_to_csv(rows: Sequence[GridRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f", "lambda", "gamma", "error"])
        for r in rows:
            w.writerow([r.f, repr(r.lam), repr(r.gamma), repr(r.error)])


def accuracy_to_csv(dates, predictions, truth, curve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "prediction", "truth", "cumulative_accuracy"])
        for d, p, t, c in zip(dates, predictions, truth, curve):
            w.writerow([pd.Timestamp(d).date().isoformat(), int(p), int(t), "" if math.isnan(c) else repr(float(c))])
