"""End-to-end orchestration and the on-disk result bundle.

A bundle is one directory::

    manifest.json          config, provenance, protocol facts, stage status
    checksums.sha256       sha256 of every other file
    summary.txt            human-readable report (rendered from the CSVs)
    ingest/ selection/ ensemble/ online/ backtest/ compare/

Nothing time- or machine-dependent is written, so the same config and seed
give byte-identical bundles. Stage timings go to the log.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import shutil
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backtest import evaluate_strategy, plot_table, plot_table_to_csv, run_naive_strategy
from .baselines import comparison_report, run_baselines
from .config import PipelineConfig
from .ensemble import (
    AdvisorSpec,
    BaggingSettings,
    BaseSearch,
    Stacker,
    StackerSettings,
    build_all_advisors,
    default_base_searches,
    leakage_checks,
)
from .errors import AdvisorEnsembleError, IntegrityError, PipelineError, SchemaError
from .learners import HyperparamSearchSpec, ModelKind
from .online import (
    OnlineParams,
    accuracy_to_csv,
    cumulative_accuracy,
    evaluate_excluding_burnin,
    grid_search_online,
    grid_to_csv,
    online_update,
    run_online,
    weight_history_by_advisor,
)
from .seeding import derive_seed
from .selection import select_features
from .timeseries import (
    Dataset,
    FeatureFrame,
    SplitSpec,
    align_calendars,
    first_difference,
    lag_name,
    make_labels,
    make_lags,
    read_csv_frame,
    split,
    standardize,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "selection", "ensemble", "online", "backtest", "compare")
COMMAND_STAGES = {
    "ingest-check": ("ingest",),
    "select-features": ("ingest", "selection"),
    "train": ("ingest", "selection", "ensemble"),
    "online": ("ingest", "selection", "ensemble", "online"),
    "backtest": ("ingest", "selection", "ensemble", "online", "backtest"),
    "compare": ("ingest", "selection", "ensemble", "online", "compare"),
    "run": STAGES,
}
DEFAULT_GRID = {"f": [3, 5, 10, 20, 40], "lambda": [0.0, 1.0, 5.0, 10.0, 31.0]}
MANIFEST = "manifest.json"
CHECKSUMS = "checksums.sha256"
SUMMARY = "summary.txt"


# --- ingest ------------------------------------------------------------------

@dataclass
class Ingested:
    frame: FeatureFrame
    train: Dataset
    valid: Dataset
    pools: dict[str, list[str]]
    backtest_close: np.ndarray
    backtest_benchmark: np.ndarray | None
    backtest_dates: pd.DatetimeIndex
    provenance: dict


def _difference_columns(cfg: PipelineConfig, features: list[str]) -> list[str]:
    d = cfg.preprocessing.difference
    if d == "all":
        return list(features)
    if d == "none":
        return []
    unknown = [c for c in d if c not in features]
    if unknown:
        raise SchemaError(f"difference list names unknown features: {unknown}")
    return list(d)


def ingest(cfg: PipelineConfig) -> Ingested:
    frames = [read_csv_frame(s.path, s.close, s.benchmark) for s in cfg.data.sources]
    common = frames[0].dates
    for fr in frames[1:]:
        common = common.intersection(fr.dates)
    aligned = align_calendars(frames)

    available = set(aligned.feature_names)
    missing = sorted({f for a in cfg.advisors for f in a.features if f not in available})
    if missing:
        raise SchemaError(f"advisor features not found in the data: {missing}")

    diff_cols = _difference_columns(cfg, aligned.feature_names)
    diffed = first_difference(aligned, diff_cols)
    lagged = make_lags(diffed, cfg.preprocessing.max_lag)
    labels = make_labels(lagged)

    t0, t1 = (pd.Timestamp(d) for d in cfg.split.train)
    train_rows = labels.dates[(labels.dates >= t0) & (labels.dates <= t1)]
    if len(train_rows) == 0:
        raise SchemaError("training range selects no labelled rows")
    std, stats = standardize(lagged, train_rows)
    train, valid = split(std, labels, SplitSpec(cfg.split.train, cfg.split.valid))

    # the last validation signal trades into the next close
    pos = lagged.dates.get_indexer(valid.dates)
    if not (np.diff(pos) == 1).all():
        raise SchemaError("validation dates must be consecutive trading days")
    bt_rows = np.append(pos, pos[-1] + 1)
    bt_dates = lagged.dates[bt_rows]
    close = lagged.data[lagged.close].to_numpy()[bt_rows]
    bench = lagged.data[lagged.benchmark].to_numpy()[bt_rows] if lagged.benchmark else None

    lag = cfg.preprocessing.max_lag
    pools = {a.name: [lag_name(f, k) for f in a.features for k in range(lag + 1)] for a in cfg.advisors}
    source_of = {c: s.path.name for s, fr in zip(cfg.data.sources, frames) for c in fr.data.columns}
    lineage = [
        {"column": lag_name(f, k), "source": source_of[f], "raw": f,
         "differenced": f in set(diff_cols), "lag": k}
        for f in aligned.feature_names for k in range(lag + 1)
    ]
    provenance = {
        "source_rows": {s.path.name: len(fr) for s, fr in zip(cfg.data.sources, frames)},
        "calendar_intersection_rows": len(common),
        "dropped_before_first_observation": len(common) - len(aligned),
        "dropped_by_differencing": len(aligned) - len(diffed),
        "dropped_by_lagging": len(diffed) - len(lagged),
        "dropped_unlabelled_last_row": len(lagged) - len(labels),
        "labelled_rows": len(labels),
        "train_rows": len(train),
        "valid_rows": len(valid),
        "train_range": [train.dates[0].date().isoformat(), train.dates[-1].date().isoformat()],
        "valid_range": [valid.dates[0].date().isoformat(), valid.dates[-1].date().isoformat()],
        "degenerate_columns": list(stats.degenerate),
        "feature_columns": len(std.feature_names),
        "lineage": lineage,
    }
    return Ingested(std, train, valid, pools, close, bench, bt_dates, provenance)


# --- settings from config ----------------------------------------------------

def base_searches(cfg: PipelineConfig) -> list[BaseSearch]:
    lc = cfg.learners
    searches = default_base_searches(lc.cv_folds, lc.gbt_budget)
    out = []
    for s in searches:
        if s.kind in (ModelKind.ELASTIC_LINEAR, ModelKind.ELASTIC_LOGISTIC):
            s = BaseSearch(s.kind, HyperparamSearchSpec(
                grid={"alpha": lc.elastic_alphas, "lambda": lc.elastic_lambdas},
                cv_folds=lc.cv_folds, objective="mse"))
        elif s.kind is ModelKind.SVM_RBF:
            s = BaseSearch(s.kind, HyperparamSearchSpec(
                grid={"C": lc.svm_C, "gamma": lc.svm_gamma}, cv_folds=lc.cv_folds, objective="misclassification"))
        elif s.kind is ModelKind.GBT:
            spec = s.search
            s = BaseSearch(s.kind, HyperparamSearchSpec(
                distributions=spec.distributions, budget=lc.gbt_budget, cv_folds=lc.cv_folds,
                objective=spec.objective, fixed={"n_rounds": lc.gbt_rounds}))
        elif s.kind is ModelKind.ROTATION_FOREST:
            s = BaseSearch(s.kind, fixed={"n_trees": lc.rotation_trees, "subset_size": lc.rotation_subset})
        out.append(s)
    return out


def stacker_settings(cfg: PipelineConfig) -> StackerSettings:
    sc = cfg.stacking
    return StackerSettings(
        logistic_search=HyperparamSearchSpec(
            grid={"alpha": sc.logistic_alphas, "lambda": sc.logistic_lambdas},
            cv_folds=sc.logistic_cv_folds, objective="mse"),
        gbt_params={"max_depth": sc.gbt_max_depth, "eta": sc.gbt_eta, "n_rounds": sc.gbt_rounds},
        rotation_params={"n_trees": sc.rotation_trees, "subset_size": sc.rotation_subset},
    )


def bagging_settings(cfg: PipelineConfig) -> BaggingSettings:
    b = cfg.bagging
    return BaggingSettings(b.n_samples, b.sample_frac, b.replace, cfg.stacking.folds)


def baseline_searches(cfg: PipelineConfig) -> dict:
    bc = cfg.baselines
    return {
        ModelKind.SVM_RBF: HyperparamSearchSpec(
            grid={"C": bc.svm_C, "gamma": bc.svm_gamma}, cv_folds=bc.cv_folds, objective="misclassification"),
        ModelKind.MLP: HyperparamSearchSpec(
            grid={"lr": bc.mlp_lr, "momentum": bc.mlp_momentum}, cv_folds=bc.cv_folds,
            objective="misclassification",
            fixed={"hidden": 20, "epochs": bc.mlp_epochs, "batch_size": 16, "patience": 20}),
        ModelKind.RANDOM_FOREST: HyperparamSearchSpec(
            grid={"n_trees": bc.rf_trees, "mtry": bc.rf_mtry}, cv_folds=bc.cv_folds,
            objective="misclassification"),
    }


# --- writing helpers ---------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_checksums(root: Path) -> None:
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name != CHECKSUMS)
    lines = [f"{_sha256(p)}  {p.relative_to(root).as_posix()}" for p in files]
    (root / CHECKSUMS).write_text("\n".join(lines) + "\n")


def verify_bundle(root) -> None:
    root = Path(root)
    if not (root / CHECKSUMS).is_file() or not (root / MANIFEST).is_file():
        raise IntegrityError(f"{root}: not a result bundle (missing {MANIFEST} or {CHECKSUMS})")
    listed = {}
    for line in (root / CHECKSUMS).read_text().splitlines():
        digest, _, rel = line.partition("  ")
        listed[rel] = digest
    present = {p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file() and p.name != CHECKSUMS}
    for rel in sorted(set(listed) | present):
        if rel not in listed:
            raise IntegrityError(f"{rel}: file not covered by {CHECKSUMS}")
        if rel not in present:
            raise IntegrityError(f"{rel}: listed in {CHECKSUMS} but missing")
        if _sha256(root / rel) != listed[rel]:
            raise IntegrityError(f"{rel}: checksum mismatch")


# --- the run -----------------------------------------------------------------

@dataclass
class RunState:
    cfg: PipelineConfig
    out: Path
    grid: bool
    manifest: dict = field(default_factory=dict)
    data: Ingested | None = None
    advisors: list[AdvisorSpec] = field(default_factory=list)
    agents: object = None
    results: list = field(default_factory=list)
    eval_params: OnlineParams | None = None
    eval_predictions: np.ndarray | None = None
    timings: dict = field(default_factory=dict)


@contextmanager
def _stage(state: RunState, name: str):
    t = time.perf_counter()
    log.info("stage %s: start", name)
    try:
        yield
    except AdvisorEnsembleError as exc:
        state.manifest["stages"][name] = "failed"
        state.manifest["failure"] = {"stage": name, "error": f"{type(exc).__name__}: {exc}"}
        _finish(state)
        raise PipelineError(f"stage {name!r} failed: {exc}", stage=name) from exc
    if state.manifest["stages"][name] == "pending":
        state.manifest["stages"][name] = "done"
    state.timings[name] = time.perf_counter() - t
    log.info("stage %s: %s in %.2fs", name, state.manifest["stages"][name], state.timings[name])


def _stage_ingest(state: RunState) -> None:
    d = ingest(state.cfg)
    state.data = d
    state.manifest["provenance"] = {k: v for k, v in d.provenance.items() if k != "lineage"}
    _write_csv(state.out / "ingest" / "columns.csv", ["column", "source", "raw", "differenced", "lag"],
               [[r["column"], r["source"], r["raw"], int(r["differenced"]), r["lag"]] for r in d.provenance["lineage"]])
    _write_csv(state.out / "ingest" / "labels.csv", ["date", "partition", "label"],
               [[t.date().isoformat(), part, int(v)] for part, ds in (("train", d.train), ("valid", d.valid))
                for t, v in zip(ds.dates, ds.y)])


def _stage_selection(state: RunState) -> None:
    cfg, d = state.cfg, state.data
    sc = cfg.selection
    chosen = {}
    for adv in cfg.advisors:
        pool = d.pools[adv.name]
        sel = select_features(d.train.X[pool], d.train.y, sc.p_threshold, sc.keep_fraction, sc.relieff_k,
                              sc.relieff_iterations, sc.rf_trees, seed=derive_seed(cfg.seed, "selection", adv.name))
        (state.out / "selection").mkdir(parents=True, exist_ok=True)
        sel.to_csv(state.out / "selection" / f"{adv.name}.csv")
        state.advisors.append(AdvisorSpec(adv.name, tuple(pool), tuple(sel.selected)))
        chosen[adv.name] = {"pool": len(pool), "filtered": len(sel.filtered), "selected": list(sel.selected)}
    state.manifest["selection"] = chosen


def _stage_ensemble(state: RunState) -> None:
    cfg, d = state.cfg, state.data
    bag = bagging_settings(cfg)
    matrix, results = build_all_advisors(state.advisors, d.train.X, d.train.y, d.valid.X, d.valid.dates,
                                         base_searches(cfg), bag, stacker_settings(cfg),
                                         seed=derive_seed(cfg.seed, "ensemble"))
    state.agents, state.results = matrix, results
    out = state.out / "ensemble"
    out.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(out / "agents.csv")
    y = d.valid.y
    table = []
    for res in results:
        for name, tr in res.tuning.items():
            tr.to_csv(out / f"tuning_{res.advisor.name}_{name}.csv")
        for m, model in enumerate(res.base_models):
            errs = [float(np.mean((s.meta.valid[:, m] >= s.meta.thresholds[m]) != y)) for s in res.samples]
            table.append([res.advisor.name, model.name, "base_average", repr(float(np.mean(errs)))])
        for a in res.agents:
            table.append([res.advisor.name, a.stacker.value, "stacker", repr(float(np.mean(a.classes != y)))])
    _write_csv(out / "model_errors.csv", ["advisor", "model", "role", "error"], table)
    _write_csv(out / "bootstrap_samples.csv", ["advisor", "sample", "size", "distinct_rows", "draws", "folds"],
               [[r.advisor.name, s.index, len(s.rows), len(np.unique(s.rows)), s.attempts, len(s.meta.folds)]
                for r in results for s in r.samples])
    _write_json(out / "hyperparameters.json",
                {r.advisor.name: {m.name: m.params for m in r.base_models} for r in results})
    state.manifest["protocol"] = {
        "advisors": [a.name for a in state.advisors],
        "n_agents": matrix.n_agents,
        "agents": matrix.labels,
        "bootstrap_samples": {r.advisor.name: len(r.samples) for r in results},
        "bootstrap_sample_size": {r.advisor.name: sorted({len(s.rows) for s in r.samples}) for r in results},
        "train_rows": len(d.train),
        "sample_frac": bag.sample_frac,
        "stacking_folds": sorted({len(s.meta.folds) for r in results for s in r.samples}),
        "leakage_folds_checked": leakage_checks(results),
        "leakage_violations": 0,
    }


def _stage_online(state: RunState) -> None:
    cfg, d = state.cfg, state.data
    oc = cfg.online
    params = OnlineParams(oc.f, oc.gamma, oc.lam)
    res = online_update(state.agents, d.valid.y, params)
    out = state.out / "online"
    out.mkdir(parents=True, exist_ok=True)
    curve = cumulative_accuracy(res.predictions, d.valid.y, params.f)
    accuracy_to_csv(d.valid.dates, res.predictions, d.valid.y, curve, out / "predictions.csv")
    res.history.to_csv(out / "weights.csv")
    by_adv = weight_history_by_advisor(res.history, state.agents.advisor_of())
    by_adv.to_csv(out / "advisor_weights.csv", date_format="%Y-%m-%d", float_format=lambda x: repr(float(x)))
    online = {"f": params.f, "gamma": params.gamma, "lambda": params.lam,
              "error": evaluate_excluding_burnin(res.predictions, d.valid.y, params.f),
              "epochs": len(res.history)}
    state.eval_params, state.eval_predictions = params, res.predictions
    if state.grid:
        g = oc.grid
        fs, lams = (g.f, g.lam) if g else (DEFAULT_GRID["f"], DEFAULT_GRID["lambda"])
        rows = grid_search_online(state.agents.classes, d.valid.y, fs, lams, oc.gamma)
        grid_to_csv(rows, out / "grid.csv")
        best = rows[0]
        state.eval_params = OnlineParams(best.f, oc.gamma, best.lam)
        state.eval_predictions = run_online(state.agents.classes, d.valid.y, state.eval_params).predictions
        accuracy_to_csv(d.valid.dates, state.eval_predictions, d.valid.y,
                        cumulative_accuracy(state.eval_predictions, d.valid.y, best.f), out / "grid_best_predictions.csv")
        online["grid"] = {"cells": len(rows), "f_values": list(fs), "lambda_values": list(lams),
                          "best": {"f": best.f, "lambda": best.lam, "error": best.error}}
    state.manifest["online"] = online


def _stage_backtest(state: RunState) -> None:
    cfg, d = state.cfg, state.data
    p = state.eval_params
    curve = run_naive_strategy(d.backtest_close, state.eval_predictions, d.backtest_dates, cash_days=p.f)
    report = evaluate_strategy(curve, d.backtest_close, d.backtest_benchmark, cfg.backtest.risk_free,
                               cfg.backtest.trading_days)
    out = state.out / "backtest"
    out.mkdir(parents=True, exist_ok=True)
    plot_table_to_csv(plot_table(curve, d.backtest_close, d.backtest_benchmark), out / "curve.csv")
    report.to_csv(out / "report.csv")
    state.manifest["backtest"] = {"f": p.f, "lambda": p.lam, "cash_days": p.f}


def _stage_compare(state: RunState) -> None:
    cfg, d = state.cfg, state.data
    if not cfg.baselines.enabled:
        state.manifest["stages"]["compare"] = "skipped"
        return
    features = list(dict.fromkeys(f for a in state.advisors for f in a.selected_features))
    p = state.eval_params
    rows = run_baselines(d.train.X[features], d.train.y, d.valid.X[features], d.valid.y, p.f,
                         baseline_searches(cfg), seed=derive_seed(cfg.seed, "baselines"))
    err = evaluate_excluding_burnin(state.eval_predictions, d.valid.y, p.f)
    rep = comparison_report(rows, err, {"f": p.f, "lambda": p.lam, "gamma": p.gamma}, p.f, len(d.valid), features)
    if not state.grid:
        rep.note = "The online-ensemble row uses the configured (f, lambda); no grid search was run."
    out = state.out / "compare"
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / "comparison.csv")
    state.manifest["compare"] = {"features": features, "burn_in": p.f, "note": rep.note}


STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "selection": _stage_selection,
    "ensemble": _stage_ensemble,
    "online": _stage_online,
    "backtest": _stage_backtest,
    "compare": _stage_compare,
}


def _finish(state: RunState) -> None:
    _write_json(state.out / MANIFEST, state.manifest)
    summary = render_summary(state.out)
    (state.out / SUMMARY).write_text(summary)
    write_checksums(state.out)


def run_pipeline(cfg: PipelineConfig, out, command: str = "run", grid: bool | None = None,
                 timings: dict | None = None) -> Path:
    """Run the stages of ``command`` and write the bundle to ``out``.

    ``grid`` defaults to whether the config has a grid section. Stage wall
    times are stored into ``timings`` if given; they never enter the bundle.
    """
    if command not in COMMAND_STAGES:
        raise SchemaError(f"unknown command {command!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    # reusing a directory must not leave stale stage files inside the bundle
    for old in (MANIFEST, CHECKSUMS, SUMMARY):
        (out / old).unlink(missing_ok=True)
    for stage in STAGES:
        shutil.rmtree(out / stage, ignore_errors=True)
    if grid is None:
        grid = cfg.online.grid is not None
    stages = COMMAND_STAGES[command]
    state = RunState(cfg, out, grid)
    if timings is not None:
        state.timings = timings
    state.manifest = {
        "format": "advisor-ensemble-bundle",
        "version": 1,
        "package_version": __version__,
        "command": command,
        "seed": cfg.seed,
        "grid_mode": grid,
        "config": cfg.to_jsonable(),
        "stages": {s: ("pending" if s in stages else "not requested") for s in STAGES},
    }
    for name in stages:
        with _stage(state, name):
            STAGE_FUNCS[name](state)
    _finish(state)
    return out


# --- summary -----------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def _not_done(manifest: dict, stage: str) -> str:
    status = manifest["stages"].get(stage, "not requested")
    if stage == "compare" and status == "skipped":
        return "  skipped (baselines disabled in the config)\n"
    return f"  {status}\n"


def _advisor_order(manifest: dict) -> list[str]:
    return [a["name"] for a in manifest["config"]["advisors"]]


def render_summary(root) -> str:
    """Text report built from the bundle files (errors recomputed from the CSVs)."""
    root = Path(root)
    manifest = json.loads((root / MANIFEST).read_text())
    stages = manifest["stages"]
    buf = io.StringIO()
    w = buf.write
    w(f"command: {manifest['command']}   seed: {manifest['seed']}\n")
    if "failure" in manifest:
        f = manifest["failure"]
        w(f"FAILED in stage {f['stage']}: {f['error']}\n")
    if "provenance" in manifest:
        p = manifest["provenance"]
        w(f"rows: train {p['train_rows']} ({p['train_range'][0]}..{p['train_range'][1]}), "
          f"validation {p['valid_rows']} ({p['valid_range'][0]}..{p['valid_range'][1]})\n")
        w(f"calendar intersection {p['calendar_intersection_rows']} rows; dropped: "
          f"{p['dropped_before_first_observation']} before first observation, "
          f"{p['dropped_by_differencing']} by differencing, {p['dropped_by_lagging']} by lagging, "
          f"{p['dropped_unlabelled_last_row']} unlabelled\n")

    w("\n[1] selected features\n")
    if stages.get("selection") == "done":
        for name in _advisor_order(manifest):
            info = manifest["selection"][name]
            w(f"  {name}: {', '.join(info['selected'])}  ({len(info['selected'])} of {info['filtered']} "
              f"after the p-value filter, pool {info['pool']})\n")
    else:
        w(_not_done(manifest, "selection"))

    w("\n[2] per-advisor validation errors\n")
    if stages.get("ensemble") == "done":
        rows = _read_csv(root / "ensemble" / "model_errors.csv")
        labels = {r["date"]: int(r["label"]) for r in _read_csv(root / "ingest" / "labels.csv")
                  if r["partition"] == "valid"}
        agents = _read_csv(root / "ensemble" / "agents.csv")
        truth = np.array([labels[r["date"]] for r in agents])
        advisors = list(dict.fromkeys(r["advisor"] for r in rows))
        models = list(dict.fromkeys((r["model"], r["role"]) for r in rows))
        err = {(r["advisor"], r["model"]): float(r["error"]) for r in rows if r["role"] == "base_average"}
        for a in advisors:
            for s in Stacker:
                col = np.array([int(r[f"class:{a}/{s.value}"]) for r in agents])
                err[(a, s.value)] = float(np.mean(col != truth))
        width = max(len(m) + 12 for m, _ in models)
        w("  " + "model".ljust(width) + "".join(a.rjust(12) for a in advisors) + "\n")
        for m, role in models:
            label = f"{m} (average)" if role == "base_average" else f"{m} stacking"
            w("  " + label.ljust(width) + "".join(_pct(err[(a, m)]).rjust(12) for a in advisors) + "\n")
        w("  chosen base-model hyperparameters:\n")
        chosen = json.loads((root / "ensemble" / "hyperparameters.json").read_text())
        for a in _advisor_order(manifest):
            for m, params in chosen[a].items():
                shown = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in params.items())
                w(f"    {a}/{m}: {shown}\n")
    else:
        w(_not_done(manifest, "ensemble"))

    w("\n[3] online update\n")
    if stages.get("online") == "done":
        o = manifest["online"]
        preds = _read_csv(root / "online" / "predictions.csv")
        p = np.array([int(r["prediction"]) for r in preds])
        t = np.array([int(r["truth"]) for r in preds])
        e = evaluate_excluding_burnin(p, t, o["f"])
        w(f"  f={o['f']} gamma={o['gamma']} lambda={o['lambda']}: error {_pct(e)} "
          f"(first {o['f']} days excluded, {o['epochs']} weight epochs)\n")
        if "grid" in o:
            w("  grid (diagnostic, evaluated on the validation period itself):\n")
            w("    " + "f".rjust(5) + "lambda".rjust(9) + "error".rjust(10) + "\n")
            for r in _read_csv(root / "online" / "grid.csv"):
                w("    " + r["f"].rjust(5) + f"{float(r['lambda']):g}".rjust(9) + _pct(float(r["error"])).rjust(10) + "\n")
    else:
        w(_not_done(manifest, "online"))

    w("\n[4] baseline comparison\n")
    if stages.get("compare") == "done":
        rows = _read_csv(root / "compare" / "comparison.csv")
        for r in rows:
            w(f"  {r['model'].ljust(16)}{_pct(float(r['error'])).rjust(9)}   {r['params']}\n")
        w(f"  note: {manifest['compare']['note']}\n")
    else:
        w(_not_done(manifest, "compare"))

    w("\n[5] trading backtest\n")
    if stages.get("backtest") == "done":
        b = manifest["backtest"]
        w(f"  signals from f={b['f']} lambda={b['lambda']}; first {b['cash_days']} days held in cash\n")
        for r in _read_csv(root / "backtest" / "report.csv"):
            w(f"  {r['metric'].ljust(24)}{r['value'] or 'n/a'}\n")
    else:
        w(_not_done(manifest, "backtest"))
    return buf.getvalue()


def report(root) -> str:
    verify_bundle(root)
    return render_summary(root)
