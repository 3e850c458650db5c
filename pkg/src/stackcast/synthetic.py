"""Deterministic synthetic fixtures: a structured daily price series for
end-to-end checks and a hash-rate-style feature table for ingestion tests.
"""

from __future__ import annotations

import csv
import datetime as _dt

import numpy as np

from .frame import FeatureFrame

__all__ = ["make_price_series", "make_price_frame", "make_hashrate_table", "write_frame_csv"]

# Column names mirroring the reference hash-rate feature table.
HASHRATE_COLUMNS = [
    "MTF30", "MTF7", "P90EMA", "S90", "Tran", "P30w", "P3w", "P7", "MTF7R",
    "D30R", "MP", "P30S", "S90E", "TVU", "T100C", "D90M", "H90V", "P90W",
    "S90S", "MTF",
]


def make_price_series(n_days: int = 1000, seed: int = 0, start=_dt.date(2020, 1, 1)):
    """Trend + two seasonal cycles + seeded Gaussian noise, always positive.

    Returns (dates, prices). The long cycle dominates, which makes the
    medium-horizon direction learnable while next-day moves stay noisy.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_days, dtype=np.float64)
    prices = (
        150.0
        + 0.03 * t
        + 28.0 * np.sin(2.0 * np.pi * t / 100.0)
        + 5.0 * np.sin(2.0 * np.pi * t / 37.0)
        + rng.normal(0.0, 0.8, n_days)
    )
    dates = np.datetime64(start, "D") + np.arange(n_days)
    return dates, prices


def make_price_frame(n_days: int = 1000, seed: int = 0) -> FeatureFrame:
    """Price series plus two auxiliary positive columns, target 'close'."""
    dates, prices = make_price_series(n_days, seed)
    rng = np.random.default_rng(seed + 1)
    volume = 1000.0 + 4.0 * prices + np.cumsum(rng.normal(0.0, 6.0, n_days))
    volume = np.maximum(volume, 50.0)
    activity = 500.0 + np.cumsum(rng.normal(0.0, 2.0, n_days))
    activity = np.maximum(activity, 20.0)
    data = np.column_stack([prices, volume, activity])
    return FeatureFrame(dates, data, ["close", "volume", "activity"], target="close")


def make_hashrate_table(
    rows: int = 100, seed: int = 7, missing_cells: int = 2, start=_dt.date(2013, 4, 1)
) -> FeatureFrame:
    """Smooth positive random walks under the reference table's 20 names.

    A few interior cells are left missing so ingestion fixtures exercise
    imputation.
    """
    rng = np.random.default_rng(seed)
    dates = np.datetime64(start, "D") + np.arange(rows)
    data = np.empty((rows, len(HASHRATE_COLUMNS)))
    for j in range(len(HASHRATE_COLUMNS)):
        level = rng.uniform(10.0, 500.0)
        walk = np.cumsum(rng.normal(0.0, level * 0.01, rows))
        data[:, j] = np.maximum(level + walk, level * 0.05)
    for _ in range(missing_cells):
        i = int(rng.integers(1, rows - 1))
        j = int(rng.integers(0, len(HASHRATE_COLUMNS)))
        data[i, j] = np.nan
    return FeatureFrame(dates, data, list(HASHRATE_COLUMNS))


def write_frame_csv(frame: FeatureFrame, path) -> None:
    """Write a frame in the package's CSV contract (empty cell = missing).

    Floats are written with repr, which round-trips exactly through
    :func:`stackcast.frame.load_csv`.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(frame.columns))
        for i in range(frame.n_rows):
            row = [str(frame.dates[i])]
            for v in frame.data[i]:
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)
