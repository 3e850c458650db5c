"""Rolling technical indicators over daily series.

Every function returns an array the same length as its input with NaN at
positions where the indicator is undefined (warm-up prefix, division
guards). :func:`expand` appends indicator columns to a frame and then
trims the common warm-up head so the result is rectangular again.

All indicators are strictly causal: position t only ever reads x[:t+1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigurationError, DomainError, SchemaError, SizeError
from .frame import FeatureFrame
from .validation import as_float_vector

__all__ = [
    "IndicatorSpec",
    "KINDS",
    "sma",
    "ema",
    "wma",
    "rsi",
    "rolling_std",
    "rolling_var",
    "trix",
    "roc",
    "mom",
    "warmup",
    "default_grid",
    "expand",
    "IndicatorExpander",
]

KINDS = ("SMA", "EMA", "WMA", "RSI", "STD", "VAR", "TRIX", "ROC", "MOM")

# Windows appearing in the reference hash-rate table's column names.
DEFAULT_WINDOWS = (3, 7, 30, 90)
# RSI keeps its own fixed default window and is not part of the grid.
GRID_KINDS = ("SMA", "EMA", "WMA", "STD", "VAR", "TRIX", "ROC", "MOM")


@dataclass(frozen=True)
class IndicatorSpec:
    """One indicator column request: kind, window and source column."""

    kind: str
    window: int
    source: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(
                f"unknown indicator kind '{self.kind}'; valid kinds: {KINDS}"
            )
        if self.window < 1:
            raise ConfigurationError(f"window must be >= 1, got {self.window}")

    @property
    def column_name(self) -> str:
        return f"{self.source}_{self.kind}({self.window})"


def _check_window(x: np.ndarray, n: int, need: int, what: str) -> None:
    if n < 1:
        raise ConfigurationError(f"{what}: window must be >= 1, got {n}")
    if x.size < need:
        raise SizeError(
            f"{what}: series of length {x.size} is shorter than the "
            f"{need} samples the window needs"
        )


def sma(x, n: int) -> np.ndarray:
    """Simple moving average: mean of the trailing n samples."""
    x = as_float_vector(x)
    _check_window(x, n, n, "sma")
    out = np.full(x.size, np.nan)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    out[n - 1:] = (csum[n:] - csum[:-n]) / n
    return out


def ema(x, n: int) -> np.ndarray:
    """Exponential moving average seeded at x[0], k = 2 / (n + 1)."""
    x = as_float_vector(x)
    if n < 1:
        raise ConfigurationError(f"ema: window must be >= 1, got {n}")
    k = 2.0 / (n + 1.0)
    out = np.empty(x.size)
    out[0] = x[0]
    for t in range(1, x.size):
        out[t] = k * x[t] + (1.0 - k) * out[t - 1]
    return out


def wma(x, n: int) -> np.ndarray:
    """Weighted moving average: weights n..1, newest sample weighted n."""
    x = as_float_vector(x)
    _check_window(x, n, n, "wma")
    weights = np.arange(1, n + 1, dtype=np.float64)  # oldest -> newest
    denom = n * (n + 1) / 2.0
    out = np.full(x.size, np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(x, n)
    out[n - 1:] = windows @ weights / denom
    return out


def rsi(x, n: int = 15) -> np.ndarray:
    """Relative strength index with simple n-day up/down averages.

    RSI = 100 - 100 / (1 + up / down); a window with no down moves scores
    100, one with no up moves scores 0.
    """
    x = as_float_vector(x)
    _check_window(x, n, n + 1, "rsi")
    diffs = np.diff(x)
    ups = np.maximum(diffs, 0.0)
    downs = np.maximum(-diffs, 0.0)
    win_up = np.lib.stride_tricks.sliding_window_view(ups, n).mean(axis=1)
    win_down = np.lib.stride_tricks.sliding_window_view(downs, n).mean(axis=1)
    out = np.full(x.size, np.nan)
    zero_down = win_down == 0.0
    zero_up = win_up == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        body = 100.0 - 100.0 / (1.0 + win_up / win_down)
    body[zero_down] = 100.0
    body[zero_up & ~zero_down] = 0.0
    out[n:] = body
    return out


def rolling_var(x, n: int) -> np.ndarray:
    """Rolling population variance (divisor n)."""
    x = as_float_vector(x)
    _check_window(x, n, n, "var")
    out = np.full(x.size, np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(x, n)
    mean = windows.mean(axis=1)
    out[n - 1:] = np.maximum(((windows - mean[:, None]) ** 2).mean(axis=1), 0.0)
    return out


def rolling_std(x, n: int) -> np.ndarray:
    """Rolling population standard deviation."""
    return np.sqrt(rolling_var(x, n))


def trix(x, n: int) -> np.ndarray:
    """Percent rate of change of the triple EMA.

    trix[t] = 100 * (e3[t] - e3[t-1]) / e3[t-1] with e3 the EMA applied
    three times. Positions where e3[t-1] is zero are left undefined.
    """
    x = as_float_vector(x)
    e3 = ema(ema(ema(x, n), n), n)
    out = np.full(x.size, np.nan)
    prev = e3[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 100.0 * (e3[1:] - prev) / prev
    ratio[prev == 0.0] = np.nan
    out[1:] = ratio
    return out


def roc(x, n: int) -> np.ndarray:
    """Fractional rate of change against the value n periods back."""
    x = as_float_vector(x)
    _check_window(x, n, n + 1, "roc")
    out = np.full(x.size, np.nan)
    base = x[:-n]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (x[n:] - base) / base
    vals[base == 0.0] = np.nan
    out[n:] = vals
    return out


def mom(x, n: int) -> np.ndarray:
    """Momentum: difference against the value n periods back."""
    x = as_float_vector(x)
    _check_window(x, n, n + 1, "mom")
    out = np.full(x.size, np.nan)
    out[n:] = x[n:] - x[:-n]
    return out


_FUNCS = {
    "SMA": sma,
    "EMA": ema,
    "WMA": wma,
    "RSI": rsi,
    "STD": rolling_std,
    "VAR": rolling_var,
    "TRIX": trix,
    "ROC": roc,
    "MOM": mom,
}


def warmup(spec: IndicatorSpec) -> int:
    """Leading undefined positions the indicator is guaranteed to produce."""
    if spec.kind in ("SMA", "WMA", "STD", "VAR"):
        return spec.window - 1
    if spec.kind in ("RSI", "ROC", "MOM"):
        return spec.window
    if spec.kind == "TRIX":
        return 1
    return 0  # EMA


def default_grid(sources: list[str]) -> list[IndicatorSpec]:
    """The stock indicator grid: 8 windowed kinds x the default windows."""
    return [
        IndicatorSpec(kind, window, source)
        for source in sources
        for kind in GRID_KINDS
        for window in DEFAULT_WINDOWS
    ]


def expand(frame: FeatureFrame, specs: list[IndicatorSpec]) -> FeatureFrame:
    """Append indicator columns and trim the common warm-up head.

    The original columns are retained. The head trim equals the longest
    warm-up over all requested indicators, so every surviving row is fully
    defined; an undefined value past the warm-up (a division guard firing
    mid-series) is reported as an error instead of silently kept.
    """
    if not specs:
        return frame
    names = [s.column_name for s in specs]
    clash = set(names) & set(frame.columns)
    if clash:
        raise SchemaError(f"indicator columns already present: {sorted(clash)}")
    if len(set(names)) != len(names):
        raise SchemaError("duplicate indicator specs requested")

    new_cols = []
    trim = 0
    for spec in specs:
        source = frame.data[:, frame.column_index(spec.source)]
        values = _FUNCS[spec.kind](source, spec.window)
        trim = max(trim, warmup(spec))
        new_cols.append(values)

    data = np.column_stack([frame.data] + new_cols)
    if trim >= frame.n_rows:
        raise SizeError(
            f"warm-up of {trim} rows consumes the whole {frame.n_rows}-row frame"
        )
    data = data[trim:]
    dates = frame.dates[trim:]
    columns = frame.columns + names
    bad = np.nonzero(np.isnan(data))
    if bad[0].size:
        r, c = int(bad[0][0]), int(bad[1][0])
        raise DomainError(
            f"indicator column '{columns[c]}' is undefined at {dates[r]} "
            "(division guard) after the warm-up trim"
        )
    return FeatureFrame(dates, data, columns, frame.target)


class IndicatorExpander(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`expand` for pipeline composition.

    ``specs`` may be a list of :class:`IndicatorSpec`, or "default" to
    build the stock grid over every column of the fitted frame.
    """

    def __init__(self, specs="default"):
        self.specs = specs

    def _resolve(self, frame: FeatureFrame) -> list[IndicatorSpec]:
        if self.specs == "default":
            return default_grid(list(frame.columns))
        return list(self.specs)

    def fit(self, frame: FeatureFrame, y=None):
        self.resolved_specs_ = self._resolve(frame)
        return self

    def transform(self, frame: FeatureFrame) -> FeatureFrame:
        specs = getattr(self, "resolved_specs_", None) or self._resolve(frame)
        return expand(frame, specs)
