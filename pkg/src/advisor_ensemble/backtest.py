"""Long-or-cash trading on predicted trends, and the usual performance metrics."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, EvaluationError, SchemaError

TRADING_DAYS = 250
# report precision for percentages (six decimals)
PERCENT_QUANTUM = Decimal("0.000001")


class Position(str, enum.Enum):
    CASH = "CASH"
    LONG = "LONG"


@dataclass(frozen=True)
class AssetCurve:
    """Portfolio value per date and the position held from that close on."""

    dates: pd.DatetimeIndex
    values: np.ndarray
    positions: tuple[Position, ...]

    def __len__(self):
        return len(self.values)

    def as_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.dates, name="strategy")


def _prices(closes) -> np.ndarray:
    arr = np.asarray(closes, dtype=float).ravel()
    if not np.isfinite(arr).all() or (arr <= 0).any():
        raise DataError("prices must be finite and positive")
    return arr


def run_naive_strategy(closes, signals, dates=None, cash_days: int = 0, start_value: float = 1.0) -> AssetCurve:
    """All-in on an up signal, all-out on a down signal, at each close.

    ``signals[t]`` is the predicted direction from close t to close t+1, so
    there is one signal fewer than closes. The first ``cash_days`` signals
    are ignored and the strategy stays in cash. While long, the value is
    ``entry_value * close[t] / entry_close`` (fractional shares, no costs).
    """
    c = _prices(closes)
    s = np.asarray(signals).ravel()
    if len(s) != len(c) - 1:
        raise SchemaError(f"need {len(c) - 1} signals for {len(c)} closes, got {len(s)}")
    if dates is None:
        dates = pd.RangeIndex(len(c))
    elif len(dates) != len(c):
        raise SchemaError("dates and closes differ in length")
    values = np.empty(len(c))
    values[0] = start_value
    positions = []
    entry_value = entry_close = None
    for t in range(len(c) - 1):
        long = bool(s[t]) and t >= cash_days
        positions.append(Position.LONG if long else Position.CASH)
        if long:
            if entry_value is None:
                entry_value, entry_close = values[t], c[t]
            values[t + 1] = entry_value * (c[t + 1] / entry_close)
        else:
            entry_value = entry_close = None
            values[t + 1] = values[t]
    positions.append(Position.CASH)
    return AssetCurve(pd.Index(dates), values, tuple(positions))


def _curve_values(curve) -> np.ndarray:
    if isinstance(curve, AssetCurve):
        return curve.values
    return _prices(curve)


def annualized_return(curve, trading_days_per_year: int = TRADING_DAYS) -> float:
    """Compound annualization over the number of close-to-close intervals."""
    v = _curve_values(curve)
    intervals = len(v) - 1
    if intervals < 1:
        raise EvaluationError("annualized return needs at least two points")
    return float((v[-1] / v[0]) ** (trading_days_per_year / intervals) - 1.0)


def excess_return(strategy, benchmark, trading_days_per_year: int = TRADING_DAYS) -> float:
    """Strategy minus benchmark annualized return.

    Accepts two annualized fractions, or two date-indexed value series that
    must cover the same dates.
    """
    if isinstance(strategy, pd.Series) or isinstance(benchmark, pd.Series):
        if not (isinstance(strategy, pd.Series) and isinstance(benchmark, pd.Series)):
            raise SchemaError("compare two curves or two annualized returns, not a mix")
        if not strategy.index.equals(benchmark.index):
            raise SchemaError("strategy and benchmark cover different dates")
        strategy = annualized_return(strategy.to_numpy(), trading_days_per_year)
        benchmark = annualized_return(benchmark.to_numpy(), trading_days_per_year)
    return float(strategy) - float(benchmark)


def daily_returns(curve) -> np.ndarray:
    v = _curve_values(curve)
    return v[1:] / v[:-1] - 1.0


def sharpe_from_returns(returns, risk_free_annual: float = 0.0,
                        trading_days_per_year: int = TRADING_DAYS) -> float:
    r = np.asarray(returns, dtype=float)
    if len(r) < 2:
        raise EvaluationError("Sharpe ratio needs at least two daily returns")
    rf_daily = (1.0 + risk_free_annual) ** (1.0 / trading_days_per_year) - 1.0
    excess = r - rf_daily
    sd = float(np.std(excess, ddof=1))
    if not sd > 0:
        raise EvaluationError("Sharpe ratio undefined: daily returns have zero variance")
    return float(np.mean(excess) / sd * math.sqrt(trading_days_per_year))


def sharpe_ratio(curve, risk_free_annual: float = 0.0, trading_days_per_year: int = TRADING_DAYS) -> float:
    """Annualized Sharpe ratio of daily returns (sample standard deviation)."""
    return sharpe_from_returns(daily_returns(curve), risk_free_annual, trading_days_per_year)


def max_drawdown(curve) -> float:
    """Largest peak-to-trough loss as a fraction of the peak."""
    v = _curve_values(curve)
    if len(v) == 0:
        raise EvaluationError("empty curve")
    peak = np.maximum.accumulate(v)
    return float(((peak - v) / peak).max())


def percent(x: float) -> Decimal:
    return (Decimal(x) * 100).quantize(PERCENT_QUANTUM)


@dataclass(frozen=True)
class PerformanceReport:
    """Strategy metrics; returns are fractions (0.1 = 10%)."""

    annualized_return: float
    stock_return: float
    index_return: float | None
    sharpe: float
    max_drawdown: float
    n_days: int

    @property
    def excess_vs_stock(self) -> float:
        return excess_return(self.annualized_return, self.stock_return)

    @property
    def excess_vs_index(self) -> float | None:
        if self.index_return is None:
            return None
        return excess_return(self.annualized_return, self.index_return)

    def percent_row(self) -> dict[str, Decimal | None]:
        """Report percentages at fixed precision.

        Excess returns are differences of the rounded figures, so
        absolute minus excess reproduces the stock (index) figure exactly.
        """
        absolute = percent(self.annualized_return)
        stock = percent(self.stock_return)
        index = percent(self.index_return) if self.index_return is not None else None
        return {
            "annualized_return_pct": absolute,
            "stock_return_pct": stock,
            "excess_vs_stock_pct": absolute - stock,
            "index_return_pct": index,
            "excess_vs_index_pct": absolute - index if index is not None else None,
        }

    def as_rows(self) -> list[tuple[str, str]]:
        row = self.percent_row()
        out = [(k, "" if v is None else str(v)) for k, v in row.items()]
        out.append(("sharpe_ratio", repr(self.sharpe)))
        out.append(("max_drawdown", repr(self.max_drawdown)))
        out.append(("trading_days", str(self.n_days)))
        return out

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            w.writerows(self.as_rows())

    def to_text(self) -> str:
        width = max(len(k) for k, _ in self.as_rows())
        return "\n".join(f"{k.ljust(width)}  {v or 'n/a'}" for k, v in self.as_rows()) + "\n"


def evaluate_strategy(curve: AssetCurve, closes, index_closes=None, risk_free_annual: float = 0.0,
                      trading_days_per_year: int = TRADING_DAYS) -> PerformanceReport:
    """Metrics of ``curve`` against buy-and-hold of the stock and the index."""
    stock = _prices(closes)
    if len(stock) != len(curve):
        raise SchemaError("stock prices and strategy curve cover different dates")
    index_ret = None
    if index_closes is not None:
        idx = _prices(index_closes)
        if len(idx) != len(curve):
            raise SchemaError("index prices and strategy curve cover different dates")
        index_ret = annualized_return(idx, trading_days_per_year)
    return PerformanceReport(
        annualized_return=annualized_return(curve, trading_days_per_year),
        stock_return=annualized_return(stock, trading_days_per_year),
        index_return=index_ret,
        sharpe=sharpe_ratio(curve, risk_free_annual, trading_days_per_year),
        max_drawdown=max_drawdown(curve),
        n_days=len(curve) - 1,
    )


def plot_table(curve: AssetCurve, closes, index_closes=None) -> pd.DataFrame:
    """Date, strategy value, buy-and-hold value and index value, all starting at 1."""
    stock = _prices(closes)
    df = pd.DataFrame({
        "position": [p.value for p in curve.positions],
        "strategy": curve.values / curve.values[0],
        "stock": stock / stock[0],
    }, index=curve.dates)
    if index_closes is not None:
        idx = _prices(index_closes)
        df["index"] = idx / idx[0]
    df.index.name = "date"
    return df


def plot_table_to_csv(table: pd.DataFrame, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([table.index.name or "date", *table.columns])
        for d, row in zip(table.index, table.itertuples(index=False)):
            day = d.date().isoformat() if isinstance(d, pd.Timestamp) else str(d)
            w.writerow([day, *(v if isinstance(v, str) else repr(float(v)) for v in row)])
