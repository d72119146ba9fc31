from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from advisor_ensemble.config import load_config
from advisor_ensemble.pipeline import run_pipeline

ROOT = Path(__file__).resolve().parents[1]
DEMO_CONFIG = ROOT / "demo" / "config.yaml"


def write_small_dataset(folder: Path, n: int = 200, seed: int = 0) -> dict:
    """Two sources; the stock's next move follows the sign of ``signal``."""
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range("2020-01-01", periods=n)
    signal = rng.normal(size=n)
    step = np.where(signal > 0, 1.0, -1.0) * 0.5 + 0.1 * rng.normal(size=n)
    close = 50.0 + np.concatenate([[0.0], np.cumsum(step[:-1])]) + 0.0
    close = close - close.min() + 10.0
    a = pd.DataFrame({"close": close, "signal": np.cumsum(signal), "noise": np.cumsum(rng.normal(size=n)),
                      "flat": 3.0}, index=dates)
    b = pd.DataFrame({"other": np.cumsum(rng.normal(size=n)), "index": 100 + np.cumsum(rng.normal(size=n))},
                     index=dates)
    for name, frame in (("a", a), ("b", b)):
        frame.index.name = "date"
        frame.to_csv(folder / f"{name}.csv", date_format="%Y-%m-%d")
    return {"dates": dates}


def small_config(folder: Path, **overrides) -> dict:
    """A light config over :func:`write_small_dataset` (runs in a few seconds)."""
    cfg = {
        "seed": 3,
        "data": {"sources": [{"path": "a.csv", "close": "close"}, {"path": "b.csv", "benchmark": "index"}]},
        "advisors": [{"name": "sig", "features": ["signal", "noise"]}, {"name": "oth", "features": ["other"]}],
        "preprocessing": {"max_lag": 2},
        "split": {"train": ["2020-01-01", "2020-06-30"], "valid": ["2020-07-01", "2020-12-31"]},
        "selection": {"rf_trees": 20, "relieff_k": 5},
        "learners": {"cv_folds": 2, "elastic_alphas": [0.5], "elastic_lambdas": [0.1], "svm_C": [1.0],
                     "svm_gamma": [0.5], "gbt_budget": 1, "gbt_rounds": 5, "rotation_trees": 2},
        "stacking": {"folds": 3, "logistic_alphas": [1.0], "logistic_lambdas": [1.0], "logistic_cv_folds": 2,
                     "gbt_rounds": 5, "rotation_trees": 2},
        "bagging": {"n_samples": 2},
        "online": {"f": 3},
        "baselines": {"cv_folds": 2, "svm_C": [1.0], "svm_gamma": [0.5], "mlp_lr": [0.1], "mlp_momentum": [0.5],
                      "mlp_epochs": 5, "rf_trees": [10], "rf_mtry": [1]},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    return cfg


def write_config(folder: Path, cfg: dict, name: str = "config.yaml") -> Path:
    path = folder / name
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path


def bundle_files(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture
def small_setup(tmp_path):
    write_small_dataset(tmp_path)
    return tmp_path


@pytest.fixture(scope="session")
def demo_bundle(tmp_path_factory) -> Path:
    """The bundled demo config run once per session with the full `run` command."""
    out = tmp_path_factory.mktemp("demo") / "bundle"
    run_pipeline(load_config(DEMO_CONFIG), out)
    return out
