"""Feature-table ingestion: loading, imputation, labeling and splitting.

The two core containers are :class:`TimeSeries` (one named daily series)
and :class:`FeatureFrame` (aligned named columns plus an optional target
column). Both are immutable after construction; every operation returns a
new value, which keeps them safe to share between threads.

CSV contract: UTF-8, comma separated, header row, first column ``date`` in
``YYYY-MM-DD``, decimal point ``.``, empty string for a missing cell.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import (
    ImputationError,
    ParseError,
    SchemaError,
    SizeError,
)

__all__ = [
    "TimeSeries",
    "FeatureFrame",
    "SplitSpec",
    "INTERVALS",
    "load_csv",
    "interpolate_missing",
    "make_labels",
    "make_regression_targets",
    "chronological_split",
]

# Named chronological dataset ranges (inclusive start/end).
INTERVALS = {
    "I": (_dt.date(2013, 4, 1), _dt.date(2016, 4, 1)),
    "II": (_dt.date(2013, 4, 1), _dt.date(2017, 4, 1)),
    "III": (_dt.date(2013, 4, 1), _dt.date(2019, 12, 31)),
}


def _freeze(arr: np.ndarray) -> np.ndarray:
    # copy so freezing never flips the writeable flag on a caller's array
    arr = np.array(arr, order="C", copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """A named daily series: one value per strictly increasing date."""

    dates: np.ndarray  # datetime64[D]
    values: np.ndarray  # float64, NaN marks a missing observation
    name: str = "series"

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape or dates.ndim != 1:
            raise SchemaError(
                f"series '{self.name}': dates and values must be equal-length "
                f"1-D arrays, got {dates.shape} vs {values.shape}"
            )
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise SchemaError(f"series '{self.name}': dates must be strictly increasing")
        object.__setattr__(self, "dates", _freeze(dates))
        object.__setattr__(self, "values", _freeze(values))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FeatureFrame:
    """Aligned feature columns over one daily date axis.

    ``data`` is an (n_rows, n_cols) float64 matrix, NaN marking missing
    cells. ``target`` names the price column used for labels and targets;
    it may be None for frames that are never used to build targets.
    """

    dates: np.ndarray
    data: np.ndarray
    columns: list[str]
    target: str | None = None

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise SchemaError(f"frame data must be 2-D, got shape {data.shape}")
        if dates.ndim != 1 or dates.size != data.shape[0]:
            raise SchemaError(
                f"date axis ({dates.size}) does not match row count ({data.shape[0]})"
            )
        if len(self.columns) != data.shape[1]:
            raise SchemaError(
                f"{len(self.columns)} column names for {data.shape[1]} data columns"
            )
        if len(set(self.columns)) != len(self.columns):
            dupes = sorted({c for c in self.columns if self.columns.count(c) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise SchemaError("frame dates must be strictly increasing")
        if self.target is not None and self.target not in self.columns:
            raise SchemaError(f"target column '{self.target}' not in frame")
        object.__setattr__(self, "dates", _freeze(dates))
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "columns", list(self.columns))

    # -- basic accessors -------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"unknown column '{name}'") from None

    def column(self, name: str) -> TimeSeries:
        return TimeSeries(self.dates, self.data[:, self.column_index(name)], name)

    def target_series(self) -> TimeSeries:
        if self.target is None:
            raise SchemaError("frame has no target column set")
        return self.column(self.target)

    def has_missing(self) -> bool:
        return bool(np.isnan(self.data).any())

    # -- derivation helpers ----------------------------------------------

    def with_target(self, target: str) -> "FeatureFrame":
        return FeatureFrame(self.dates, self.data, self.columns, target)

    def select(self, names: list[str], keep_target: bool = True) -> "FeatureFrame":
        """Restrict to the given columns (appending the target if asked)."""
        names = list(names)
        if keep_target and self.target is not None and self.target not in names:
            names = names + [self.target]
        idx = [self.column_index(n) for n in names]
        return FeatureFrame(self.dates, self.data[:, idx], names, self.target)

    def slice_rows(self, start: int, stop: int) -> "FeatureFrame":
        return FeatureFrame(
            self.dates[start:stop], self.data[start:stop], self.columns, self.target
        )

    def restrict_dates(self, start: _dt.date, end: _dt.date) -> "FeatureFrame":
        lo = np.datetime64(start, "D")
        hi = np.datetime64(end, "D")
        mask = (self.dates >= lo) & (self.dates <= hi)
        return FeatureFrame(self.dates[mask], self.data[mask], self.columns, self.target)

    # -- pandas interop ----------------------------------------------------

    def to_pandas(self) -> pd.DataFrame:
        df = pd.DataFrame(self.data.copy(), columns=self.columns)
        df.insert(0, "date", pd.to_datetime(self.dates))
        return df.set_index("date")

    @classmethod
    def from_pandas(cls, df: pd.DataFrame, target: str | None = None) -> "FeatureFrame":
        idx = pd.to_datetime(df.index)
        dates = idx.values.astype("datetime64[D]")
        return cls(dates, df.to_numpy(dtype=np.float64), list(df.columns), target)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/test split description.

    ``interval`` may be one of the named ranges ("I", "II", "III"), a
    ``(start, end)`` date pair, or None for the full frame. The split is
    always chronological: the first ``train_fraction`` of rows train, the
    remainder test.
    """

    train_fraction: float = 0.8
    interval: object = None
    horizon_days: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise SizeError(
                f"train_fraction must lie in (0, 1], got {self.train_fraction}"
            )
        if self.horizon_days < 1:
            raise SizeError(f"horizon_days must be >= 1, got {self.horizon_days}")

    def interval_range(self):
        if self.interval is None:
            return None
        if isinstance(self.interval, str):
            try:
                return INTERVALS[self.interval]
            except KeyError:
                raise SchemaError(
                    f"unknown interval '{self.interval}'; named intervals are "
                    f"{sorted(INTERVALS)}"
                ) from None
        start, end = self.interval
        if isinstance(start, str):
            start = _dt.date.fromisoformat(start)
        if isinstance(end, str):
            end = _dt.date.fromisoformat(end)
        return start, end


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def load_csv(path, schema: list[str] | None = None, target: str | None = None) -> FeatureFrame:
    """Read a daily feature table from CSV.

    Rows are sorted by date. Empty cells become missing values. Duplicate
    dates are rejected, as are malformed dates or non-numeric cells (the
    error names the offending row and column).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError(f"{path}: no such file") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        rows = list(reader)

    if not header or header[0].strip().lower() != "date":
        raise SchemaError(f"{path}: first column must be 'date', got {header[:1]}")
    columns = [c.strip() for c in header[1:]]
    if not columns:
        raise SchemaError(f"{path}: no feature columns after the date column")
    if schema is not None and columns != list(schema):
        raise SchemaError(
            f"{path}: columns {columns} do not match the expected schema {list(schema)}"
        )

    n = len(rows)
    dates = np.empty(n, dtype="datetime64[D]")
    data = np.full((n, len(columns)), np.nan)
    for i, row in enumerate(rows):
        line = i + 2  # 1-based file line, after the header
        if len(row) != len(columns) + 1:
            raise ParseError(
                f"{path}: line {line} has {len(row)} fields, expected {len(columns) + 1}"
            )
        try:
            day = _dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(
                f"{path}: line {line}, column 'date': bad date {row[0]!r} "
                "(expected YYYY-MM-DD)"
            ) from None
        dates[i] = np.datetime64(day, "D")
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {line}, column '{columns[j]}': "
                    f"non-numeric cell {cell!r}"
                ) from None

    order = np.argsort(dates, kind="stable")
    dates, data = dates[order], data[order]
    if n > 1:
        dup = np.nonzero(dates[1:] == dates[:-1])[0]
        if dup.size:
            raise SchemaError(f"{path}: duplicate date {dates[dup[0]]}")
    return FeatureFrame(dates, data, columns, target)


# ---------------------------------------------------------------------------
# imputation
# ---------------------------------------------------------------------------

def _interpolate_column(values: np.ndarray, name: str) -> np.ndarray:
    present = np.isfinite(values)
    n_present = int(present.sum())
    if n_present == values.size:
        return values.copy()
    if n_present == 0:
        raise ImputationError(f"column '{name}' has no present values to impute from")
    idx = np.arange(values.size, dtype=np.float64)
    # np.interp is linear between neighbors and flat beyond the ends,
    # exactly the interior/edge policy wanted here. A single present
    # value degenerates to a constant fill.
    return np.interp(idx, idx[present], values[present])


def interpolate_missing(frame: FeatureFrame) -> FeatureFrame:
    """Fill missing cells column by column.

    Interior gaps are linearly interpolated between the nearest present
    neighbors; leading and trailing gaps take the nearest present value.
    Present values are preserved exactly, so the operation is idempotent.
    """
    filled = np.column_stack(
        [
            _interpolate_column(frame.data[:, j], frame.columns[j])
            for j in range(frame.n_cols)
        ]
    )
    return FeatureFrame(frame.dates, filled, frame.columns, frame.target)


# ---------------------------------------------------------------------------
# labels and targets
# ---------------------------------------------------------------------------

def make_labels(prices: TimeSeries | np.ndarray, horizon_days: int) -> np.ndarray:
    """Binary up/down labels: 1 where the price ``horizon_days`` ahead is
    strictly higher than today's, 0 otherwise (ties count as 0). The last
    ``horizon_days`` positions have no lookahead and are excluded."""
    values = prices.values if isinstance(prices, TimeSeries) else np.asarray(prices, float)
    if horizon_days < 1:
        raise SizeError(f"horizon must be >= 1, got {horizon_days}")
    if values.size < horizon_days + 1:
        raise SizeError(
            f"series of length {values.size} is too short for horizon {horizon_days}"
        )
    return (values[horizon_days:] > values[:-horizon_days]).astype(np.int64)


def make_regression_targets(prices: TimeSeries | np.ndarray, horizon_days: int) -> np.ndarray:
    """Regression targets: the raw price ``horizon_days`` ahead."""
    values = prices.values if isinstance(prices, TimeSeries) else np.asarray(prices, float)
    if horizon_days < 1:
        raise SizeError(f"horizon must be >= 1, got {horizon_days}")
    if values.size < horizon_days + 1:
        raise SizeError(
            f"series of length {values.size} is too short for horizon {horizon_days}"
        )
    return values[horizon_days:].copy()


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def chronological_split(frame: FeatureFrame, spec: SplitSpec):
    """Split into train/test by time: first floor(fraction * n) rows train.

    If the split spec names an interval, the frame is first restricted to that
    date range. Raises :class:`SizeError` when either partition is empty.
    """
    rng = spec.interval_range()
    if rng is not None:
        start, end = rng
        clipped = frame.restrict_dates(start, end)
        if clipped.n_rows == 0:
            raise SizeError(f"no rows fall inside interval {start}..{end}")
        frame = clipped
    n_train = int(np.floor(spec.train_fraction * frame.n_rows))
    if n_train == 0 or n_train == frame.n_rows:
        raise SizeError(
            f"split of {frame.n_rows} rows at fraction {spec.train_fraction} "
            f"leaves an empty partition ({n_train} train rows)"
        )
    return frame.slice_rows(0, n_train), frame.slice_rows(n_train, frame.n_rows)
