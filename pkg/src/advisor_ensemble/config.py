"""Pipeline configuration: a YAML file validated against a strict schema.

Unknown keys anywhere are errors. Relative data paths resolve against the
directory of the config file.
"""
from __future__ import annotations

from datetime import date
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import SpecError


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Source(Strict):
    path: Path
    close: str | None = None
    benchmark: str | None = None


class DataConfig(Strict):
    sources: list[Source] = Field(min_length=1)

    @model_validator(mode="after")
    def _one_close(self):
        closes = [s.close for s in self.sources if s.close]
        if len(closes) != 1:
            raise ValueError(f"exactly one source must name the close column, found {len(closes)}")
        if sum(1 for s in self.sources if s.benchmark) > 1:
            raise ValueError("at most one benchmark column")
        return self


class AdvisorConfig(Strict):
    name: str = Field(min_length=1)
    features: list[str] = Field(min_length=1)


class Preprocessing(Strict):
    difference: Literal["all", "none"] | list[str] = "all"
    max_lag: int = Field(5, ge=1)


class SplitConfig(Strict):
    train: tuple[date, date]
    valid: tuple[date, date]

    @model_validator(mode="after")
    def _ordered(self):
        if self.train[0] > self.train[1] or self.valid[0] > self.valid[1]:
            raise ValueError("range start after range end")
        if self.train[1] >= self.valid[0]:
            raise ValueError("training range must end before the validation range starts")
        return self


class SelectionConfig(Strict):
    p_threshold: float = Field(0.5, ge=0, le=1)
    keep_fraction: float = Field(0.2, gt=0, le=1)
    relieff_k: int = Field(10, ge=1)
    relieff_iterations: int | None = Field(None, ge=1)
    rf_trees: int = Field(200, ge=1)


class LearnerConfig(Strict):
    cv_folds: int = Field(10, ge=2)
    elastic_alphas: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)], min_length=1)
    elastic_lambdas: list[float] = Field(default_factory=lambda: [0.001, 0.01, 0.1, 1.0, 10.0], min_length=1)
    svm_C: list[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0], min_length=1)
    svm_gamma: list[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0], min_length=1)
    gbt_budget: int = Field(60, ge=1)
    gbt_rounds: int = Field(100, ge=1)
    rotation_trees: int = Field(10, ge=1)
    rotation_subset: int = Field(3, ge=1)

    @field_validator("elastic_alphas")
    @classmethod
    def _alpha_range(cls, v):
        if any(not 0 <= a <= 1 for a in v):
            raise ValueError("elastic-net alphas must lie in [0, 1]")
        return v


class StackingConfig(Strict):
    folds: int = Field(5, ge=2)
    logistic_alphas: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0], min_length=1)
    logistic_lambdas: list[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0], min_length=1)
    logistic_cv_folds: int = Field(5, ge=2)
    gbt_max_depth: int = Field(2, ge=1)
    gbt_eta: float = Field(0.1, gt=0, le=1)
    gbt_rounds: int = Field(100, ge=1)
    rotation_trees: int = Field(10, ge=1)
    rotation_subset: int = Field(3, ge=1)


class BaggingConfig(Strict):
    n_samples: int = Field(10, ge=1)
    sample_frac: float = Field(0.8, gt=0, le=1)
    replace: bool = True


class GridConfig(Strict):
    f: list[int] = Field(min_length=1)
    lam: list[float] = Field(alias="lambda", min_length=1)


class OnlineConfig(Strict):
    f: int = Field(5, ge=1)
    gamma: float = Field(0.8, ge=0, le=1)
    lam: float = Field(0.0, alias="lambda", ge=0)
    grid: GridConfig | None = None


class BacktestConfig(Strict):
    risk_free: float = 0.0
    trading_days: int = Field(250, ge=1)


class BaselineConfig(Strict):
    enabled: bool = True
    cv_folds: int = Field(10, ge=2)
    svm_C: list[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0], min_length=1)
    svm_gamma: list[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0], min_length=1)
    mlp_lr: list[float] = Field(default_factory=lambda: [0.01, 0.1], min_length=1)
    mlp_momentum: list[float] = Field(default_factory=lambda: [0.5, 0.9], min_length=1)
    mlp_epochs: int = Field(200, ge=0)
    rf_trees: list[int] = Field(default_factory=lambda: [100, 300], min_length=1)
    rf_mtry: list[int] = Field(default_factory=lambda: [1, 2, 4], min_length=1)


class PipelineConfig(Strict):
    seed: int = Field(0, ge=0)
    output_dir: Path | None = None
    data: DataConfig
    advisors: list[AdvisorConfig] = Field(min_length=1)
    preprocessing: Preprocessing = Preprocessing()
    split: SplitConfig
    selection: SelectionConfig = SelectionConfig()
    learners: LearnerConfig = LearnerConfig()
    stacking: StackingConfig = StackingConfig()
    bagging: BaggingConfig = BaggingConfig()
    online: OnlineConfig = OnlineConfig()
    backtest: BacktestConfig = BacktestConfig()
    baselines: BaselineConfig = BaselineConfig()

    @field_validator("advisors")
    @classmethod
    def _unique_names(cls, v):
        names = [a.name for a in v]
        if len(set(names)) != len(names):
            raise ValueError("advisor names must be unique")
        return v

    def resolve_paths(self, base: Path) -> "PipelineConfig":
        sources = [s.model_copy(update={"path": (base / s.path) if not s.path.is_absolute() else s.path})
                   for s in self.data.sources]
        return self.model_copy(update={"data": self.data.model_copy(update={"sources": sources})})

    def to_jsonable(self) -> dict:
        """Config as plain JSON data, with paths shown as given (file names only)."""
        d = self.model_dump(mode="json", by_alias=True)
        for src in d["data"]["sources"]:
            src["path"] = Path(src["path"]).name
        d.pop("output_dir", None)
        return d


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise SpecError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise SpecError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError(f"{path}: top level must be a mapping")
    try:
        cfg = PipelineConfig.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
        )
        raise SpecError(f"{path}: {problems}") from None
    return cfg.resolve_paths(path.parent)
