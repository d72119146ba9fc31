import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advisor_ensemble.errors import (
    AlignmentError,
    DataError,
    InsufficientDataError,
    SchemaError,
    SpecError,
)
from advisor_ensemble.timeseries import (
    FeatureFrame,
    SplitSpec,
    align_calendars,
    first_difference,
    make_labels,
    make_lags,
    read_csv_frame,
    split,
    standardize,
)


def frame(cols, start="2020-01-01", dates=None, close=None):
    n = len(next(iter(cols.values())))
    idx = pd.DatetimeIndex(dates) if dates is not None else pd.bdate_range(start, periods=n)
    return FeatureFrame(pd.DataFrame(cols, index=idx, dtype=float), close=close)


# --- alignment ---------------------------------------------------------------

def test_align_single_frame_is_identity():
    fr = frame({"a": [1, 2, 3], "b": [4, 5, 6]})
    out = align_calendars([fr])
    pd.testing.assert_frame_equal(out.data, fr.data)


def test_align_intersects_dates():
    a = frame({"a": [1, 2, 3]}, dates=["2020-01-01", "2020-01-02", "2020-01-03"])
    b = frame({"b": [4, 5, 6]}, dates=["2020-01-02", "2020-01-03", "2020-01-04"])
    out = align_calendars([a, b])
    assert list(out.dates.strftime("%Y-%m-%d")) == ["2020-01-02", "2020-01-03"]
    assert out.data.columns.tolist() == ["a", "b"]


def test_align_forward_fills_missing_value():
    a = frame({"a": [1, 2, 3]})
    b = frame({"b": [7.5, 9.0, math.nan]})
    out = align_calendars([a, b])
    # hand-built oracle: the d3 cell takes the d2 observation
    assert out.data["b"].tolist() == [7.5, 9.0, 9.0]
    assert out.is_complete()


def test_align_drops_rows_before_first_observation():
    a = frame({"a": [1, 2, 3]})
    b = frame({"b": [math.nan, 2.0, 3.0]})
    out = align_calendars([a, b])
    assert len(out) == 2 and out.is_complete()


def test_align_errors():
    a = frame({"a": [1, 2]}, dates=["2020-01-01", "2020-01-02"])
    b = frame({"b": [1, 2]}, dates=["2021-01-01", "2021-01-02"])
    with pytest.raises(AlignmentError):
        align_calendars([a, b])
    with pytest.raises(SchemaError):
        align_calendars([a, frame({"a": [3, 4]}, dates=["2020-01-01", "2020-01-02"])])
    with pytest.raises(AlignmentError):
        align_calendars([])


def test_frame_rejects_bad_dates():
    with pytest.raises(SchemaError):
        frame({"a": [1, 2]}, dates=["2020-01-02", "2020-01-01"])
    with pytest.raises(SchemaError):
        frame({"a": [1, 2]}, dates=["2020-01-02", "2020-01-02"])


# --- differencing ------------------------------------------------------------

def test_first_difference_examples():
    fr = frame({"x": [3, 5, 4], "c": [7, 7, 7], "p": [10, 11, 12]}, close="p")
    out = first_difference(fr)
    assert out.data["x"].tolist() == [2, -1]
    assert out.data["c"].tolist() == [0, 0]
    assert out.data["p"].tolist() == [11, 12]


def test_first_difference_empty_selection_is_noop():
    fr = frame({"x": [3, 5, 4]})
    assert first_difference(fr, []) is fr


def test_first_difference_unknown_column():
    with pytest.raises(SchemaError):
        first_difference(frame({"x": [1, 2]}), ["nope"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
def test_difference_then_cumsum_reconstructs(values):
    fr = frame({"x": values})
    d = first_difference(fr).data["x"].to_numpy()
    rebuilt = np.concatenate([[values[0]], values[0] + np.cumsum(d)])
    np.testing.assert_allclose(rebuilt, values, atol=1e-9 * max(1.0, max(map(abs, values))) * len(values))


# --- lags --------------------------------------------------------------------

def test_make_lags_example():
    out = make_lags(frame({"x": [1, 2, 3]}), max_lag=1)
    assert out.data["x"].tolist() == [2, 3]
    assert out.data["x_1"].tolist() == [1, 2]


def test_make_lags_column_count():
    fr = frame({f"f{i}": np.arange(10.0) for i in range(4)} | {"p": np.arange(1.0, 11.0)}, close="p")
    out = make_lags(fr, 5)
    assert len(out.feature_names) == 4 * 6
    assert "p" in out.data.columns and "p_1" not in out.data.columns


def test_make_lags_preconditions():
    fr = frame({"x": [1, 2, 3]})
    with pytest.raises(SpecError):
        make_lags(fr, 0)
    with pytest.raises(InsufficientDataError):
        make_lags(fr, 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=7, max_size=30), st.integers(1, 5))
def test_lag_identity(values, max_lag):
    out = make_lags(frame({"x": values}), max_lag)
    for k in range(max_lag + 1):
        col = out.data["x" if k == 0 else f"x_{k}"].to_numpy()
        for r in range(len(col)):
            t = r + max_lag
            assert col[r] == values[t - k]


# --- labels ------------------------------------------------------------------

def test_make_labels_examples():
    lab = make_labels(frame({"p": [10, 11, 10.5]}, close="p"))
    assert lab.labels.tolist() == [1, 0]
    assert make_labels(frame({"p": [10, 10]}, close="p")).labels.tolist() == [0]
    assert make_labels(frame({"p": np.arange(1.0, 9.0)}, close="p")).labels.sum() == 7


def test_make_labels_rejects_nonpositive_close():
    with pytest.raises(DataError):
        make_labels(frame({"p": [10, 0, 3]}, close="p"))


# --- standardize -------------------------------------------------------------

def test_standardize_examples():
    fr = frame({"x": [1, 3, 2], "k": [5, 5, 5], "p": [1, 2, 3]}, close="p")
    out, stats = standardize(fr, slice(0, 2))
    assert stats.mean["x"] == 2
    assert out.data["x"].iloc[0] == -out.data["x"].iloc[1]
    assert out.data["x"].iloc[2] == 0.0  # validation value at the train mean
    assert stats.degenerate == ["k"]
    assert (out.data["k"] == 0).all()
    assert out.data["p"].tolist() == [1, 2, 3]


def test_standardize_idempotent():
    rng = np.random.default_rng(3)
    fr = frame({"a": rng.normal(5, 3, 50), "b": rng.exponential(2, 50)})
    once, _ = standardize(fr, slice(0, 30))
    twice, _ = standardize(once, slice(0, 30))
    np.testing.assert_allclose(twice.data.to_numpy(), once.data.to_numpy(), atol=1e-9)


# --- split -------------------------------------------------------------------

def test_split_sizes_and_disjointness():
    idx = pd.bdate_range("2020-01-01", periods=501)
    fr = FeatureFrame(pd.DataFrame({"x": np.arange(501.0), "p": np.arange(1.0, 502.0)}, index=idx), close="p")
    labels = make_labels(fr)
    spec = SplitSpec((idx[0], idx[249]), (idx[250], idx[499]))
    train, valid = split(fr, labels, spec)
    assert (len(train), len(valid)) == (250, 250)
    assert not set(train.dates) & set(valid.dates)


def test_split_rejects_reversed_ranges():
    with pytest.raises(SpecError):
        SplitSpec(("2021-01-01", "2021-12-31"), ("2020-01-01", "2020-12-31"))
    with pytest.raises(SpecError):
        SplitSpec(("2020-01-01", "2020-06-30"), ("2020-06-30", "2020-12-31"))


# --- csv ---------------------------------------------------------------------

def test_read_csv_frame(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("date,a,close\n2020-01-02,1.5,10\n2020-01-03,,11\n")
    fr = read_csv_frame(p, close="close")
    assert fr.close == "close" and fr.feature_names == ["a"]
    assert math.isnan(fr.data["a"].iloc[1])


def test_read_csv_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("date,a\n2020-01-02,1\n2020-01-03,x\n")
    with pytest.raises(DataError, match=r"bad.csv:3"):
        read_csv_frame(p)
