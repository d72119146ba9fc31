"""Regenerate the synthetic demo CSVs (deterministic; run from any directory).

Three sources on slightly different calendars. The stock's next-day return
depends on metal prices in the first part of the sample and on oil in the
second, so the online reweighting has something to track.
"""
from pathlib import Path

import numpy as np
import pandas as pd

HERE = Path(__file__).resolve().parent


def main(seed: int = 20160104, n: int = 520) -> None:
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range("2016-01-04", periods=n)
    names = ["copper", "zinc", "nickel", "rate", "usd", "pmi", "oil", "gold", "sentiment"]
    steps = pd.DataFrame(rng.normal(size=(n, len(names))), index=dates, columns=names)

    switch = int(n * 0.75)
    drive = np.where(np.arange(n) < switch,
                     steps["copper"] + 0.5 * steps["rate"].shift(1, fill_value=0.0),
                     steps["oil"] - 0.5 * steps["gold"])
    ret = np.empty(n)
    ret[0] = 0.0
    ret[1:] = 0.004 * drive[:-1] + 0.008 * rng.normal(size=n - 1)
    close = 100.0 * np.exp(np.cumsum(ret))
    index = 2500.0 * np.exp(np.cumsum(0.5 * ret + 0.006 * rng.normal(size=n)))
    levels = 50.0 + steps.cumsum()

    stock = pd.DataFrame({"close": close, **{c: levels[c] for c in ("copper", "zinc", "nickel")}}, index=dates)

    macro = pd.DataFrame({"index": index, **{c: levels[c] for c in ("rate", "usd", "pmi")}}, index=dates)
    macro.loc[dates[:3], "pmi"] = np.nan
    macro.loc[dates[rng.choice(n, 25, replace=False)], "usd"] = np.nan
    macro = macro.drop(dates[rng.choice(np.arange(10, n - 10), 8, replace=False)])

    markets = pd.DataFrame({c: levels[c] for c in ("oil", "gold", "sentiment")}, index=dates).iloc[2:]
    markets = markets.drop(markets.index[rng.choice(np.arange(10, len(markets) - 10), 6, replace=False)])

    for name, frame in (("stock", stock), ("macro", macro), ("markets", markets)):
        frame.index.name = "date"
        frame.to_csv(HERE / f"{name}.csv", float_format="%.6f", date_format="%Y-%m-%d")


if __name__ == "__main__":
    main()
