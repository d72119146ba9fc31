"""Date-aligned feature frames and the preprocessing chain.

Raw sources are aligned on a common trading calendar, optionally first
differenced, lagged, labelled with the next-day trend of the close price,
split into train / validation ranges and standardized with training
statistics only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    DataError,
    InsufficientDataError,
    SchemaError,
    SpecError,
)

LAG_SEPARATOR = "_"


@dataclass(frozen=True)
class FeatureFrame:
    """Named real-valued columns indexed by strictly increasing dates.

    ``close`` names the column with the target stock's closing price and
    ``benchmark`` an optional index price column. Both are carried along
    but never treated as features.
    """

    data: pd.DataFrame
    close: str | None = None
    benchmark: str | None = None

    def __post_init__(self):
        idx = self.data.index
        if not isinstance(idx, pd.DatetimeIndex):
            raise SchemaError("FeatureFrame index must be a DatetimeIndex")
        if idx.has_duplicates:
            raise SchemaError("duplicate dates in frame")
        if not idx.is_monotonic_increasing:
            raise SchemaError("dates must be strictly increasing")
        if self.data.columns.has_duplicates:
            dupes = sorted(set(self.data.columns[self.data.columns.duplicated()]))
            raise SchemaError(f"duplicate column names: {dupes}")
        for role, name in (("close", self.close), ("benchmark", self.benchmark)):
            if name is not None and name not in self.data.columns:
                raise SchemaError(f"{role} column {name!r} not in frame")

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def reserved(self) -> tuple[str, ...]:
        return tuple(c for c in (self.close, self.benchmark) if c is not None)

    @property
    def feature_names(self) -> list[str]:
        reserved = set(self.reserved)
        return [c for c in self.data.columns if c not in reserved]

    @property
    def features(self) -> pd.DataFrame:
        return self.data[self.feature_names]

    def __len__(self):
        return len(self.data)

    def with_data(self, data: pd.DataFrame) -> "FeatureFrame":
        return FeatureFrame(data, close=self.close, benchmark=self.benchmark)

    def is_complete(self) -> bool:
        return not self.data.isna().to_numpy().any()


@dataclass(frozen=True)
class TrendLabels:
    """Binary next-day direction (1 = next close strictly higher)."""

    dates: pd.DatetimeIndex
    labels: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.labels):
            raise SchemaError("labels and dates differ in length")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive train and validation date ranges; train precedes validation."""

    train_range: tuple[date, date]
    valid_range: tuple[date, date]

    def __post_init__(self):
        t0, t1 = (pd.Timestamp(d) for d in self.train_range)
        v0, v1 = (pd.Timestamp(d) for d in self.valid_range)
        if t0 > t1 or v0 > v1:
            raise SpecError("range start after range end")
        if t1 >= v0:
            raise SpecError(
                f"train range {t0.date()}..{t1.date()} must end before "
                f"validation range {v0.date()}..{v1.date()} begins"
            )


@dataclass(frozen=True)
class Dataset:
    """One partition ready for modelling: features, labels and prices."""

    dates: pd.DatetimeIndex
    X: pd.DataFrame
    y: np.ndarray
    close: pd.Series
    benchmark: pd.Series | None = None

    def __len__(self):
        return len(self.y)

    @property
    def feature_names(self) -> list[str]:
        return list(self.X.columns)

    def select(self, names: Sequence[str]) -> "Dataset":
        missing = [n for n in names if n not in self.X.columns]
        if missing:
            raise SchemaError(f"unknown features: {missing}")
        return Dataset(self.dates, self.X[list(names)], self.y, self.close, self.benchmark)


@dataclass
class StandardizationStats:
    mean: pd.Series
    std: pd.Series
    degenerate: list[str] = field(default_factory=list)


def read_csv_frame(path, close: str | None = None, benchmark: str | None = None) -> FeatureFrame:
    """Read one source CSV: ISO date first column, numeric columns after it.

    Empty cells are missing values. Errors report the file and line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        if len(header) < 2:
            raise DataError(f"{path}:1: need a date column and at least one value column")
        names = [h.strip() for h in header[1:]]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                dates.append(date.fromisoformat(row[0].strip()))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad ISO-8601 date {row[0]!r}") from None
            values = []
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if not cell:
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {name!r} has non-numeric value {cell!r}"
                    ) from None
            rows.append(values)
    data = pd.DataFrame(rows, index=pd.DatetimeIndex(dates, name="date"), columns=names, dtype=float)
    try:
        return FeatureFrame(data, close=close, benchmark=benchmark)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def align_calendars(frames: Sequence[FeatureFrame]) -> FeatureFrame:
    """Join frames on the intersection of their calendars.

    Each source is forward-filled along its own calendar first, so a value
    missing on a retained date carries the last observation of that source.
    Leading rows where some column has not been observed yet are dropped.
    """
    if not frames:
        raise AlignmentError("no frames to align")
    seen: dict[str, int] = {}
    for i, fr in enumerate(frames):
        for c in fr.data.columns:
            if c in seen:
                raise SchemaError(f"column {c!r} appears in frames {seen[c]} and {i}")
            seen[c] = i
    closes = [fr.close for fr in frames if fr.close is not None]
    benches = [fr.benchmark for fr in frames if fr.benchmark is not None]
    if len(closes) > 1 or len(benches) > 1:
        raise SchemaError("more than one close/benchmark column designated")

    common = frames[0].dates
    for fr in frames[1:]:
        common = common.intersection(fr.dates)
    if len(common) == 0:
        raise AlignmentError("calendars have an empty intersection")

    parts = [fr.data.ffill().loc[common] for fr in frames]
    data = pd.concat(parts, axis=1)
    first_valid = [data[c].first_valid_index() for c in data.columns]
    if any(v is None for v in first_valid):
        empty = [c for c, v in zip(data.columns, first_valid) if v is None]
        raise AlignmentError(f"columns never observed on common dates: {empty}")
    data = data.loc[max(first_valid):]
    return FeatureFrame(
        data,
        close=closes[0] if closes else None,
        benchmark=benches[0] if benches else None,
    )


def first_difference(frame: FeatureFrame, columns: Iterable[str] | None = None) -> FeatureFrame:
    """Replace the chosen feature columns by x[t] - x[t-1] and drop row one.

    ``columns=None`` differences every feature. The close and benchmark
    columns keep their price levels. An empty selection is a no-op.
    """
    cols = frame.feature_names if columns is None else list(columns)
    unknown = [c for c in cols if c not in frame.data.columns]
    if unknown:
        raise SchemaError(f"unknown columns: {unknown}")
    reserved = [c for c in cols if c in frame.reserved]
    if reserved:
        raise SchemaError(f"price columns are never differenced: {reserved}")
    if not cols:
        return frame
    if len(frame) < 2:
        raise InsufficientDataError("differencing needs at least 2 rows")
    data = frame.data.copy()
    data[cols] = data[cols].diff()
    return frame.with_data(data.iloc[1:])


def lag_name(feature: str, lag: int) -> str:
    return feature if lag == 0 else f"{feature}{LAG_SEPARATOR}{lag}"


def make_lags(frame: FeatureFrame, max_lag: int = 5) -> FeatureFrame:
    """Emit f, f_1, ..., f_max_lag per feature with f_k[t] = f[t-k].

    The first ``max_lag`` rows have incomplete history and are dropped.
    """
    if max_lag < 1:
        raise SpecError(f"max_lag must be >= 1, got {max_lag}")
    if max_lag >= len(frame):
        raise InsufficientDataError(f"max_lag={max_lag} needs more than {len(frame)} rows")
    src = frame.data
    out = {}
    for f in frame.feature_names:
        for k in range(max_lag + 1):
            out[lag_name(f, k)] = src[f].shift(k)
    for c in frame.reserved:
        out[c] = src[c]
    data = pd.DataFrame(out, index=src.index)
    return frame.with_data(data.iloc[max_lag:])


def make_labels(frame: FeatureFrame) -> TrendLabels:
    """label[t] = 1 iff close[t+1] > close[t]; the last date gets no label.

    A flat next close counts as down.
    """
    if frame.close is None:
        raise SchemaError("frame has no close column")
    close = frame.data[frame.close].to_numpy(dtype=float)
    if len(close) < 2:
        raise InsufficientDataError("labelling needs at least 2 closes")
    if not np.isfinite(close).all() or (close <= 0).any():
        raise DataError("close prices must be finite and positive")
    labels = (close[1:] > close[:-1]).astype(np.int8)
    return TrendLabels(frame.dates[:-1], labels)


def _row_mask(frame: FeatureFrame, rows) -> np.ndarray:
    if isinstance(rows, slice):
        mask = np.zeros(len(frame), dtype=bool)
        mask[rows] = True
        return mask
    arr = np.asarray(rows)
    if arr.dtype == bool:
        if len(arr) != len(frame):
            raise SchemaError("boolean row mask has the wrong length")
        return arr
    return frame.dates.isin(pd.DatetimeIndex(rows))


def standardize(frame: FeatureFrame, stats_from) -> tuple[FeatureFrame, StandardizationStats]:
    """Z-score every feature column with statistics of the training rows.

    ``stats_from`` selects the training rows (boolean mask, slice or dates).
    Zero-variance columns become all-zero and are listed as degenerate.
    """
    mask = _row_mask(frame, stats_from)
    if not mask.any():
        raise InsufficientDataError("no training rows to compute statistics from")
    names = frame.feature_names
    train = frame.data.loc[mask, names]
    mean = train.mean(axis=0)
    std = train.std(axis=0, ddof=0)
    degenerate = [c for c in names if not std[c] > 0]
    safe_std = std.replace(0.0, 1.0)
    data = frame.data.copy()
    data[names] = (frame.data[names] - mean) / safe_std
    if degenerate:
        data[degenerate] = 0.0
    return frame.with_data(data), StandardizationStats(mean, std, degenerate)


def _range_mask(dates: pd.DatetimeIndex, rng) -> np.ndarray:
    lo, hi = (pd.Timestamp(d) for d in rng)
    return np.asarray((dates >= lo) & (dates <= hi))


def split(frame: FeatureFrame, labels: TrendLabels, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Cut the labelled rows into disjoint train and validation partitions."""
    missing = labels.dates.difference(frame.dates)
    if len(missing):
        raise SchemaError(f"{len(missing)} label dates are absent from the frame")
    dates = labels.dates
    parts = []
    for name, rng in (("train", spec.train_range), ("validation", spec.valid_range)):
        mask = _range_mask(dates, rng)
        if not mask.any():
            raise SpecError(f"{name} range selects no labelled rows")
        sub_dates = dates[mask]
        rows = frame.data.loc[sub_dates]
        parts.append(
            Dataset(
                dates=sub_dates,
                X=rows[frame.feature_names],
                y=labels.labels[mask].astype(np.int8),
                close=rows[frame.close] if frame.close else None,
                benchmark=rows[frame.benchmark] if frame.benchmark else None,
            )
        )
    return parts[0], parts[1]
