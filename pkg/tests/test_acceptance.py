"""Acceptance suite: one verdict line per primary criterion.

Each test prints ``criterion N: PASS|FAIL ...`` (also repeated in the pytest
terminal summary) and then asserts the same verdict.
"""
import json
import math
import time

import numpy as np
import pandas as pd
import pytest
import yaml

from advisor_ensemble.backtest import annualized_return, evaluate_strategy, max_drawdown, run_naive_strategy, sharpe_ratio
from advisor_ensemble.config import load_config
from advisor_ensemble.ensemble import FoldRecord, MetaFeatures, stack_meta_features
from advisor_ensemble.errors import LeakageError
from advisor_ensemble.learners import fit_elastic_linear, fit_gbt, fit_svm_rbf
from advisor_ensemble.learners.linear import logistic_gradient, logistic_objective
from advisor_ensemble.learners.mlp import MLPParams, init_params, loss_and_grad
from advisor_ensemble.learners.svm import kkt_violation, rbf_kernel
from advisor_ensemble.online import OnlineParams, run_online
from advisor_ensemble.pipeline import run_pipeline
from advisor_ensemble.selection import pvalue_filter, select_features

import regime_switch
from acceptance_log import record
from conftest import DEMO_CONFIG, bundle_files
from online_oracle import brute_force_online, random_instance

pytestmark = pytest.mark.slow


# --- criteria 1 and 2: online update against the brute-force oracle ----------

@pytest.fixture(scope="module")
def oracle_runs():
    start = time.perf_counter()
    runs = []
    for seed in range(1000):
        classes, truth, f, gamma, lam = random_instance(np.random.default_rng(100_000 + seed))
        res = run_online(classes, truth, OnlineParams(f, gamma, lam))
        preds, weights, _ = brute_force_online(classes.tolist(), truth.tolist(), f, gamma, lam)
        runs.append((classes.shape, f, res, preds, np.array(weights)))
    return runs, time.perf_counter() - start


def test_criterion_1_oracle_equivalence(oracle_runs):
    runs, elapsed = oracle_runs
    class_mismatch = sum(res.predictions.tolist() != preds for _, _, res, preds, _ in runs)
    worst = max(float(np.abs(res.history.weight_matrix() - w).max()) for _, _, res, _, w in runs)
    shapes_ok = all(res.history.weight_matrix().shape == w.shape for _, _, res, _, w in runs)
    Ns = {shape[1] for shape, *_ in runs}
    Ts = [shape[0] for shape, *_ in runs]
    ok = class_mismatch == 0 and shapes_ok and worst <= 1e-12 and elapsed < 60
    assert record(1, ok, f"{len(runs)} instances (N {min(Ns)}..{max(Ns)}, T {min(Ts)}..{max(Ts)}): "
                         f"{class_mismatch} class mismatches, max weight diff {worst:.2e} (tol 1e-12), "
                         f"{elapsed:.1f}s (limit 60s)")


def test_criterion_2_weight_conservation(oracle_runs):
    runs, _ = oracle_runs
    epochs = 0
    min_w, max_dev = np.inf, 0.0
    for *_, res, _, _ in runs:
        W = res.history.weight_matrix()
        epochs += len(W)
        min_w = min(min_w, float(W.min()))
        max_dev = max(max_dev, float(np.abs(W.sum(axis=1) - 1.0).max()))
    ok = min_w >= 0 and max_dev <= 1e-12
    assert record(2, ok, f"{epochs} epochs: min weight {min_w:.3g}, max |sum - 1| {max_dev:.2e} (tol 1e-12)")


# --- criterion 3: regime switch through the pipeline -------------------------

def test_criterion_3_regime_switch(tmp_path):
    start = time.perf_counter()
    bundle = regime_switch.run(tmp_path, seed=0)
    elapsed = time.perf_counter() - start
    manifest = json.loads((bundle / "manifest.json").read_text())
    f = manifest["online"]["f"]
    assert (f, manifest["online"]["gamma"], manifest["online"]["lambda"]) == (5, 0.8, 0.0)

    preds = pd.read_csv(bundle / "online" / "predictions.csv")
    agents = pd.read_csv(bundle / "ensemble" / "agents.csv")
    truth = preds["truth"].to_numpy()
    online_err = float(np.mean(preds["prediction"].to_numpy()[f:] != truth[f:]))
    static = {}
    for col in (c for c in agents.columns if c.startswith("class:")):
        adv = col[len("class:"):].split("/")[0]
        err = float(np.mean(agents[col].to_numpy()[f:] != truth[f:]))
        static[adv] = min(static.get(adv, 1.0), err)
    best_static = min(static.values())
    ok_a = online_err <= best_static

    weights = pd.read_csv(bundle / "online" / "advisor_weights.csv")
    after = weights[weights["start_day"] >= regime_switch.SWITCH].reset_index(drop=True)
    overtaken = np.nonzero((after["B"] > after["A"]).to_numpy())[0]
    lag = int(overtaken[0]) if len(overtaken) else None
    ok_b = lag is not None and lag <= 10

    # dip: drop from the value at the switch to the later minimum;
    # recovery: the highest value after that minimum, measured from the minimum
    curve = preds["cumulative_accuracy"].to_numpy()
    at_switch = curve[regime_switch.SWITCH - 1]
    t_min = regime_switch.SWITCH + int(np.nanargmin(curve[regime_switch.SWITCH:]))
    dip = at_switch - curve[t_min]
    recovery = float(np.nanmax(curve[t_min:]) - curve[t_min])
    ok_c = dip > 0 and recovery >= 0.5 * dip

    ok = ok_a and ok_b and ok_c and elapsed < 600
    assert record(3, ok, f"(a) online {online_err:.4f} vs best static advisor {best_static:.4f} "
                         f"[{'ok' if ok_a else 'no'}]; (b) B overtakes A {lag} epochs after the switch "
                         f"[{'ok' if ok_b else 'no'}]; (c) dip {dip:.4f} at day {t_min + 1}, recovery "
                         f"{recovery:.4f} = {recovery / dip if dip > 0 else float('nan'):.2f} of dip "
                         f"[{'ok' if ok_c else 'no'}]; {elapsed:.0f}s (limit 600s)")


# --- shared demo bundle for criteria 4, 8 and 9 ------------------------------

@pytest.fixture(scope="module")
def demo_manifest(demo_bundle):
    return json.loads((demo_bundle / "manifest.json").read_text())


# --- criterion 4: stacking without leakage -----------------------------------

class _IdMemorizer:
    name = "memorizer"

    def fit(self, X, y, seed):
        ids, labels = X[:, 0].copy(), y.copy()

        class Fitted:
            def score(self, Xq):
                return labels[np.abs(Xq[:, :1] - ids[None, :]).argmin(axis=1)]

        return Fitted()


def _probe_error(y, ids, rng):
    X = np.column_stack([ids.astype(float), rng.normal(size=(len(y), 2))])
    meta = stack_meta_features([_IdMemorizer()], X, y, X[:3], folds=5, row_ids=ids)
    return float(np.mean((meta.train[:, 0] >= 0.5) != y))


def test_criterion_4_no_leakage(demo_manifest):
    proto = demo_manifest["protocol"]
    n_adv = len(proto["advisors"])
    expected_checks = sum(proto["bootstrap_samples"].values()) * proto["stacking_folds"][0]
    structural = proto["leakage_folds_checked"] == expected_checks and proto["leakage_violations"] == 0

    bad = MetaFeatures(np.zeros((4, 1)), np.zeros((1, 1)), ["m"], np.arange(4),
                       [FoldRecord(0, (0, 1), frozenset({1, 2, 3})), FoldRecord(1, (2, 3), frozenset({0, 1}))])
    try:
        bad.check_no_leakage()
        detects = False
    except LeakageError:
        detects = True

    rng = np.random.default_rng(2024)
    n = 400
    y = rng.integers(0, 2, n).astype(float)
    plain = _probe_error(y, np.arange(n), rng)
    rows = np.sort(rng.integers(0, n, int(0.8 * n)))
    boot = _probe_error(y[rows], rows, rng)
    probe_ok = 0.4 <= plain <= 0.6 and 0.4 <= boot <= 0.6
    ok = structural and detects and probe_ok
    assert record(4, ok, f"demo run checked {proto['leakage_folds_checked']} folds over {n_adv} advisors "
                         f"(expected {expected_checks}), 0 violations; corrupted fold detected: {detects}; "
                         f"memorizer probe error {plain:.3f} plain / {boot:.3f} bootstrap (band [0.4, 0.6])")


# --- criterion 5: learner numerics -------------------------------------------

def _central_diff(fun, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g


def test_criterion_5_learner_numerics():
    rng = np.random.default_rng(55)
    X = rng.normal(size=(150, 4))
    y = (X[:, 0] - 0.7 * X[:, 2] + 0.4 * rng.normal(size=150) > 0).astype(float)
    yr = X @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.3 * rng.normal(size=150)

    ridge_err = 0.0
    for lam in (0.1, 1.0, 10.0):
        m = fit_elastic_linear(X, yr, alpha=1.0, lam=lam, fit_intercept=False)
        closed = np.linalg.solve(X.T @ X + lam * np.eye(4), X.T @ yr)
        ridge_err = max(ridge_err, float(np.abs(m.coef - closed).max()))

    worst_rise = -np.inf
    for alpha in (0.0, 0.3, 1.0):
        hist = np.array(fit_elastic_linear(X, yr, alpha, 3.0).objective_history)
        worst_rise = max(worst_rise, float(np.max(np.diff(hist)) / hist[0]))

    gbt_rise = -np.inf
    for params in ({"max_depth": 3, "eta": 0.3}, {"max_depth": 2, "eta": 0.1, "alpha": 1.0, "lambda": 2.0}):
        m = fit_gbt(X, y, {**params, "n_rounds": 40}, seed=3)
        gbt_rise = max(gbt_rise, float(np.max(np.diff(m.loss_history))))

    kkt, box = 0.0, True
    for C, gamma in ((0.1, 0.1), (1.0, 1.0), (100.0, 0.5)):
        m = fit_svm_rbf(X, y, C=C, gamma=gamma)
        box &= bool(np.all(m.alpha >= 0) and np.all(m.alpha <= C))
        kkt = max(kkt, kkt_violation(m.alpha, rbf_kernel(X, X, gamma), y, C))

    grad_rel = 0.0
    for seed in range(10):
        r = np.random.default_rng(seed)
        Xs = r.normal(size=(6, 3))
        ys = (r.random(6) < 0.5).astype(float)
        params = init_params(3, 20, r)
        fun = lambda th: loss_and_grad(MLPParams.unflat(th, 3, 20), Xs, ys)[0]
        num, ana = _central_diff(fun, params.flat()), loss_and_grad(params, Xs, ys)[1]
        grad_rel = max(grad_rel, float(np.linalg.norm(num - ana) / np.linalg.norm(ana)))
        beta = r.normal(size=3) + 0.5 * np.sign(r.normal(size=3))
        b = float(r.normal())
        lfun = lambda th: logistic_objective(th[:-1], th[-1], Xs, ys, 0.5, 1.0)
        lnum = _central_diff(lfun, np.append(beta, b))
        lana = np.append(*logistic_gradient(beta, b, Xs, ys, 0.5, 1.0))
        grad_rel = max(grad_rel, float(np.linalg.norm(lnum - lana) / np.linalg.norm(lana)))

    ok = (ridge_err <= 1e-6 and worst_rise <= 1e-12 and gbt_rise <= 0.0 and kkt <= 1e-3 and box
          and grad_rel <= 1e-5)
    assert record(5, ok, f"ridge diff {ridge_err:.1e} (tol 1e-6); CD objective max rise {worst_rise:.1e} "
                         f"relative (rounding tol 1e-12); GBT loss max rise {gbt_rise:.1e}; SVM KKT "
                         f"{kkt:.1e} (tol 1e-3), box ok {box}; MLP/logistic FD gradient rel {grad_rel:.1e} "
                         f"(tol 1e-5)")


# --- criterion 6: feature selection ------------------------------------------

def _fifty_feature_problem(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(250, 50))
    y = (X[:, :5] @ np.array([1.0, 0.9, 0.8, 0.7, 0.6]) + rng.normal(size=250) > 0).astype(int)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return pd.DataFrame(X, columns=[f"x{i:02d}" for i in range(50)]), y


def test_criterion_6_feature_selection():
    informative = {f"x{i:02d}" for i in range(5)}
    hits = []
    for seed in range(10):
        X, y = _fifty_feature_problem(seed)
        sel = select_features(X, y, seed=seed)
        hits.append(informative <= set(sel.selected))
    rng = np.random.default_rng(6)
    monotone = True
    for _ in range(200):
        X, y = _fifty_feature_problem(int(rng.integers(1000, 2000)))
        X = X.iloc[:40, :12]
        y = y[:40]
        t1, t2 = np.sort(rng.random(2))
        monotone &= set(pvalue_filter(X, y, t1)) <= set(pvalue_filter(X, y, t2))
    ok = sum(hits) >= 9 and monotone
    misses = [s for s, h in enumerate(hits) if not h]
    assert record(6, ok, f"all 5 informative features selected in {sum(hits)}/10 seeds (need 9; missed seeds "
                         f"{misses}); p-value filter monotone on 200 random threshold pairs: {monotone}")


# --- criterion 7: backtest metrics -------------------------------------------

def test_criterion_7_backtest_metrics():
    dd = max_drawdown([100, 120, 90, 110])
    doubling = np.linspace(1.0, 2.0, 501)
    ann_err = abs(annualized_return(doubling) - (2 ** 0.5 - 1))

    values = [100.0, 102.0, 101.0, 104.0, 103.5, 106.0]
    r = [values[i + 1] / values[i] - 1 for i in range(5)]
    rfd = (1 + 0.02) ** (1 / 250) - 1
    ex = [x - rfd for x in r]
    mean = sum(ex) / 5
    oracle = mean / math.sqrt(sum((x - mean) ** 2 for x in ex) / 4) * math.sqrt(250)
    sharpe_err = abs(sharpe_ratio(values, 0.02) - oracle)

    rng = np.random.default_rng(77)
    identity = True
    for _ in range(100):
        closes = 10 * np.exp(np.cumsum(rng.normal(0, 0.02, 260)))
        curve = run_naive_strategy(closes, rng.integers(0, 2, 259), cash_days=int(rng.integers(0, 20)))
        row = evaluate_strategy(curve, closes).percent_row()
        identity &= row["annualized_return_pct"] - row["excess_vs_stock_pct"] == row["stock_return_pct"]
    ok = dd == 0.25 and ann_err <= 1e-12 and sharpe_err <= 1e-9 and identity
    assert record(7, ok, f"max_drawdown {dd!r} (exact 0.25); 500-day doubling off by {ann_err:.1e} (tol 1e-12); "
                         f"Sharpe off by {sharpe_err:.1e} (tol 1e-9); absolute - excess == stock exactly on "
                         f"100 reports: {identity}")


# --- criterion 8: determinism and grid size ----------------------------------

def test_criterion_8_end_to_end_determinism(demo_bundle, tmp_path):
    cfg = load_config(DEMO_CONFIG)
    again = run_pipeline(cfg, tmp_path / "again")
    a, b = bundle_files(demo_bundle), bundle_files(again)
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    grid = yaml.safe_load(DEMO_CONFIG.read_text())["online"]["grid"]
    expected_rows = len(grid["f"]) * len(grid["lambda"])
    rows = len(pd.read_csv(demo_bundle / "online" / "grid.csv"))
    ok = not differing and rows == expected_rows
    assert record(8, ok, f"two runs of the demo config: {len(a)} files, {len(differing)} differ {differing[:3]}; "
                         f"grid CSV {rows} rows for a {len(grid['f'])}x{len(grid['lambda'])} grid")


# --- criterion 9: protocol fidelity ------------------------------------------

def test_criterion_9_protocol_from_manifest(demo_manifest):
    proto = demo_manifest["protocol"]
    cfg_text = yaml.safe_load(DEMO_CONFIG.read_text())
    n_train = proto["train_rows"]
    sizes = {s for v in proto["bootstrap_sample_size"].values() for s in v}
    checks = {
        "3 advisors": len(proto["advisors"]) == 3,
        "12 agents": proto["n_agents"] == 12 and len(proto["agents"]) == 12,
        "B=10 each": set(proto["bootstrap_samples"].values()) == {10},
        "80% size": sizes == {round(0.8 * n_train)} and proto["sample_frac"] == 0.8,
        "5 folds": proto["stacking_folds"] == [5],
        "gamma default 0.8": "gamma" not in cfg_text["online"] and demo_manifest["online"]["gamma"] == 0.8,
    }
    failed = [k for k, v in checks.items() if not v]
    assert record(9, not failed, f"{proto['n_agents']} agents from {len(proto['advisors'])} advisors; "
                                 f"samples per advisor {sorted(set(proto['bootstrap_samples'].values()))} of size "
                                 f"{sorted(sizes)} from {n_train} rows; stacking folds {proto['stacking_folds']}; "
                                 f"gamma {demo_manifest['online']['gamma']} (not set in config); "
                                 f"failed checks: {failed or 'none'}")
