"""End-to-end run orchestration: config parsing, leak-free data
preparation, per-horizon selection, ensemble training and evaluation.

Leakage discipline
------------------
The chronological boundary is fixed up front from row counts alone. The
outlier filter fits and corrects only rows before the boundary, the
denoiser fits its thresholds on the training block and reuses them on the
test block, selectors see training rows only, and training windows end
early enough that no training target looks across the boundary. Test
values therefore cannot influence a single trained parameter.
"""

from __future__ import annotations

import copy
import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, SizeError, StackcastError
from .featsel import SelectionResult, chi2_select, embedded_select, rfe
from .frame import (
    FeatureFrame,
    SplitSpec,
    interpolate_missing,
    load_csv,
    make_labels,
)
from .indicators import IndicatorSpec, default_grid, expand, warmup
from .metrics import classification_report, regression_report
from .neural.model import ModelSpec
from .outliers import isolation_forest_filter
from .stack import StackedEnsemble
from .wavelet import WaveletDenoiser

__all__ = [
    "RunConfig",
    "load_config",
    "config_hash",
    "PipelineData",
    "prepare_data",
    "prepare_final_frame",
    "finalize_features",
    "select_for_horizon",
    "build_windows",
    "sample_ends",
    "model_columns",
    "train_and_evaluate",
    "run_pipeline",
    "persistence_forecast",
    "majority_rate",
    "stage",
]

VALID_HORIZONS = (1, 7, 30, 90)
VALID_TASKS = ("regression", "classification")
VALID_SELECTORS = ("chi2", "rfe", "embedded")

_DEFAULTS = {
    "schema": None,
    "interval": None,
    "horizons": [1],
    "tasks": ["regression", "classification"],
    "train_fraction": 0.8,
    "denoise": {
        "enabled": True,
        "levels": "auto",
        "threshold_mode": "soft",
        "apply_to_target": True,
    },
    "outliers": {"enabled": True, "trees": 100, "subsample": None, "contamination": 0.01},
    "indicators": "default",
    "selector": {
        "method": "chi2",
        "k": 20,
        "bins": 10,
        "corr_cap": 0.9,
        "step": 1,
        "trees": 25,
        "max_depth": 6,
        "min_leaf": 2,
    },
    "ensemble": "default",
    "train": {
        "epochs": 100,
        "batch": 64,
        "lr": 0.001,
        "lookback": 30,
        "clip_norm": 5.0,
        "hidden": [64],
    },
    "out": "runs",
    "repeats": 1,
}


@contextmanager
def stage(name: str):
    """Prefix any pipeline error with the stage it occurred in."""
    try:
        yield
    except StackcastError as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc


def _merge_defaults(user: dict, defaults: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults and key not in ("data", "target", "seed"):
            raise ConfigurationError(f"unknown config key '{where}'")
        if isinstance(value, dict) and isinstance(defaults.get(key), dict):
            out[key] = _merge_defaults(value, defaults[key], where)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    """Validated run configuration; ``effective`` is the full merged dict
    that gets hashed into the output directory name."""

    data: str
    target: str
    seed: int
    effective: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        for required in ("data", "target", "seed"):
            if required not in raw:
                raise ConfigurationError(f"config is missing required key '{required}'")
        merged = _merge_defaults(raw, _DEFAULTS)
        cfg = cls(
            data=str(raw["data"]),
            target=str(raw["target"]),
            seed=int(raw["seed"]),
            effective=merged,
        )
        cfg.validate()
        return cfg

    def validate(self):
        e = self.effective
        horizons = e["horizons"]
        if not horizons:
            raise ConfigurationError("horizons must be a non-empty list")
        bad = [h for h in horizons if h not in VALID_HORIZONS]
        if bad:
            raise ConfigurationError(
                f"horizons {bad} are not in the supported set {VALID_HORIZONS}"
            )
        tasks = e["tasks"]
        if not tasks or any(t not in VALID_TASKS for t in tasks):
            raise ConfigurationError(
                f"tasks must be a non-empty subset of {VALID_TASKS}, got {tasks}"
            )
        if not 0.0 < e["train_fraction"] < 1.0:
            raise ConfigurationError(
                f"train_fraction must lie in (0, 1), got {e['train_fraction']}"
            )
        sel = e["selector"]
        if sel["method"] not in VALID_SELECTORS:
            raise ConfigurationError(
                f"unknown selector '{sel['method']}'; valid: {VALID_SELECTORS}"
            )
        if int(e["repeats"]) < 1:
            raise ConfigurationError(f"repeats must be >= 1, got {e['repeats']}")
        # resolving member specs validates kinds, hidden sizes and losses
        self.member_specs("regression", horizons[0])
        self.indicator_specs(probe_columns=None)

    # -- resolved pieces ---------------------------------------------------

    def indicator_specs(self, probe_columns) -> list[IndicatorSpec] | None:
        spec = self.effective["indicators"]
        if spec == "default":
            if probe_columns is None:
                return None  # resolved against the loaded frame later
            return default_grid(list(probe_columns))
        out = []
        for entry in spec:
            try:
                kind = str(entry["kind"]).upper()
                window = entry.get("window", 15 if kind == "RSI" else None)
                if window is None:
                    raise ConfigurationError(
                        f"indicator entry {entry} needs a window (only RSI defaults to 15)"
                    )
                out.append(IndicatorSpec(kind=kind, window=int(window), source=str(entry["source"])))
            except (KeyError, TypeError) as exc:
                raise ConfigurationError(f"bad indicator entry {entry}: {exc}") from exc
        return out

    def member_specs(self, task: str, horizon: int) -> list[ModelSpec]:
        train = self.effective["train"]
        lookback = int(train["lookback"])
        roster = self.effective["ensemble"]
        if roster == "default":
            from .stack import default_roster

            return default_roster(task, lookback, tuple(train["hidden"]))
        specs = []
        for i, entry in enumerate(roster):
            entry = dict(entry)
            kind = entry.pop("kind", None)
            if kind is None:
                raise ConfigurationError(f"ensemble member {i} is missing 'kind'")
            for owned in ("task", "lookback"):
                if owned in entry:
                    raise ConfigurationError(
                        f"ensemble member {i}: '{owned}' is set by the run, not per member"
                    )
            entry.setdefault("hidden", train["hidden"])
            entry["hidden"] = tuple(entry["hidden"])
            entry.setdefault("name", f"{kind}-{i}")
            try:
                specs.append(ModelSpec(kind=kind, task=task, lookback=lookback, **entry))
            except TypeError as exc:
                raise ConfigurationError(f"ensemble member {i}: {exc}") from exc
        if not specs:
            raise ConfigurationError("ensemble roster is empty")
        return specs


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(raw)


def config_hash(cfg: RunConfig) -> str:
    payload = dict(cfg.effective)
    payload.update({"data": cfg.data, "target": cfg.target, "seed": cfg.seed})
    canonical = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

@dataclass
class PipelineData:
    """Everything the training stages need, already leak-free.

    ``features`` is the denoised model input matrix; ``prices`` stays raw
    (outlier-corrected inside the training block only) and is the sole
    source of labels, targets and evaluation actuals.
    """

    dates: np.ndarray
    columns: list[str]
    features: np.ndarray
    prices: np.ndarray
    target: str
    boundary: int
    flagged_rows: list  # ISO dates of outlier-corrected training rows
    denoise_thresholds: dict

    @property
    def n_rows(self) -> int:
        return self.prices.size


def _concat_frames(a: FeatureFrame, b: FeatureFrame) -> FeatureFrame:
    return FeatureFrame(
        np.concatenate([a.dates, b.dates]),
        np.vstack([a.data, b.data]),
        a.columns,
        a.target,
    )


def prepare_data(cfg: RunConfig, frame: FeatureFrame | None = None) -> PipelineData:
    """Run ingest, imputation, outlier control, indicators and denoising."""
    final_frame, flagged = prepare_final_frame(cfg, frame)
    return finalize_features(cfg, final_frame, flagged)


def prepare_final_frame(cfg: RunConfig, frame: FeatureFrame | None = None):
    """Everything up to (and including) indicator expansion.

    Returns the expanded, warm-up-trimmed frame (still raw, not denoised)
    plus the outlier rows that were corrected inside the training block.
    """
    e = cfg.effective
    if frame is None:
        with stage("ingest"):
            frame = load_csv(cfg.data, schema=e["schema"], target=cfg.target)
    else:
        frame = frame.with_target(cfg.target)
    with stage("ingest"):
        split_spec = SplitSpec(
            train_fraction=e["train_fraction"],
            interval=_interval_value(e["interval"]),
            horizon_days=max(e["horizons"]),
        )
        rng = split_spec.interval_range()
        if rng is not None:
            frame = frame.restrict_dates(*rng)
            if frame.n_rows == 0:
                raise SizeError(f"no rows inside interval {rng[0]}..{rng[1]}")

    with stage("interpolate"):
        frame = interpolate_missing(frame)

    specs = cfg.indicator_specs(probe_columns=frame.columns) or []
    head = max((warmup(s) for s in specs), default=0)
    n_final = frame.n_rows - head
    if n_final < 4:
        raise SizeError(
            f"[stage indicators] only {n_final} rows would survive the "
            f"{head}-row indicator warm-up"
        )
    boundary = int(np.floor(e["train_fraction"] * n_final))
    if boundary < 1 or boundary >= n_final:
        raise SizeError(
            f"[stage split] boundary {boundary} leaves an empty partition "
            f"of the {n_final} usable rows"
        )

    flagged: list = []
    out_cfg = e["outliers"]
    if out_cfg["enabled"] and out_cfg["contamination"] > 0:
        with stage("outliers"):
            # correct only rows that can influence training features
            train_raw = frame.slice_rows(0, head + boundary)
            corrected, flagged_idx = isolation_forest_filter(
                train_raw,
                trees=int(out_cfg["trees"]),
                subsample=out_cfg["subsample"],
                contamination=float(out_cfg["contamination"]),
                seed=cfg.seed,
            )
            flagged = [str(train_raw.dates[i]) for i in flagged_idx]
            frame = _concat_frames(corrected, frame.slice_rows(head + boundary, frame.n_rows))

    with stage("indicators"):
        frame = expand(frame, specs)
    if frame.n_rows != n_final:
        raise SizeError(
            f"[stage indicators] expected {n_final} rows after warm-up trim, "
            f"got {frame.n_rows}"
        )
    return frame, flagged


def finalize_features(
    cfg: RunConfig, final_frame: FeatureFrame, flagged=()
) -> PipelineData:
    """Denoise an already expanded frame into a :class:`PipelineData`.

    The boundary is fixed from the row count; thresholds are fitted on
    the training block and reused verbatim on the test block (which is
    left raw when it is too short to transform).
    """
    e = cfg.effective
    final_frame = final_frame.with_target(cfg.target)
    n_final = final_frame.n_rows
    boundary = int(np.floor(e["train_fraction"] * n_final))
    if boundary < 1 or boundary >= n_final:
        raise SizeError(
            f"[stage split] boundary {boundary} leaves an empty partition "
            f"of the {n_final} usable rows"
        )
    prices = final_frame.data[:, final_frame.column_index(cfg.target)].copy()
    features = np.asarray(final_frame.data, dtype=np.float64).copy()
    thresholds: dict = {}
    dn = e["denoise"]
    if dn["enabled"]:
        with stage("denoise"):
            cols = np.array(
                [
                    j
                    for j in range(len(final_frame.columns))
                    if dn["apply_to_target"] or final_frame.columns[j] != cfg.target
                ]
            )
            denoiser = WaveletDenoiser(
                levels=dn["levels"], threshold_mode=dn["threshold_mode"]
            )
            denoiser.fit(features[:boundary][:, cols])
            features[:boundary, cols] = denoiser.transform(features[:boundary][:, cols])
            if n_final - boundary >= 4:
                features[boundary:, cols] = denoiser.transform(features[boundary:][:, cols])
            thresholds = {
                final_frame.columns[j]: float(t)
                for j, t in zip(cols, denoiser.thresholds_)
            }
    return PipelineData(
        dates=final_frame.dates,
        columns=list(final_frame.columns),
        features=features,
        prices=prices,
        target=cfg.target,
        boundary=boundary,
        flagged_rows=list(flagged),
        denoise_thresholds=thresholds,
    )


def _interval_value(value):
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, dict):
        return (value["start"], value["end"])
    return tuple(value)


# ---------------------------------------------------------------------------
# selection and windowing
# ---------------------------------------------------------------------------

def select_for_horizon(cfg: RunConfig, data: PipelineData, horizon: int) -> SelectionResult:
    """Score features on training rows only, labeled at this horizon.

    Chi-squared always scores against the binary up/down labels; the
    forest-backed selectors score against the regression targets when the
    run includes regression, otherwise against the labels.
    """
    e = cfg.effective
    sel = e["selector"]
    boundary = data.boundary
    usable = boundary - horizon
    if usable < 2:
        raise SizeError(
            f"horizon {horizon} leaves {usable} labeled training rows for selection"
        )
    train_frame = FeatureFrame(
        data.dates[:usable], data.features[:usable], data.columns, data.target
    )
    train_prices = data.prices[:boundary]
    labels = make_labels(train_prices, horizon)
    k = min(int(sel["k"]), len(train_frame.columns) - 1)
    with stage("select"):
        if sel["method"] == "chi2":
            return chi2_select(train_frame, labels, k=k, bins=int(sel["bins"]))
        if e["tasks"] and "regression" in e["tasks"]:
            targets = train_prices[horizon:]
        else:
            targets = labels.astype(np.float64)
        common = dict(
            k=k,
            trees=int(sel["trees"]),
            max_depth=sel["max_depth"],
            min_leaf=int(sel["min_leaf"]),
            seed=cfg.seed,
        )
        if sel["method"] == "rfe":
            return rfe(train_frame, targets, step=int(sel["step"]), **common)
        return embedded_select(train_frame, targets, corr_cap=float(sel["corr_cap"]), **common)


def build_windows(features: np.ndarray, ends: np.ndarray, lookback: int) -> np.ndarray:
    """Stack windows of ``lookback`` rows ending at each index in ``ends``."""
    view = np.lib.stride_tricks.sliding_window_view(
        features, (lookback, features.shape[1])
    )[:, 0]
    return view[np.asarray(ends) - (lookback - 1)].copy()


def sample_ends(n: int, boundary: int, lookback: int, horizon: int):
    """Window end indices for train and test.

    Training windows stop ``horizon`` rows before the boundary so no
    training target reads a test-partition price.
    """
    train = np.arange(lookback - 1, boundary - horizon)
    test = np.arange(max(boundary, lookback - 1), n - horizon)
    if train.size == 0:
        raise SizeError(
            f"no training windows: lookback {lookback} + horizon {horizon} "
            f"exhaust the {boundary} training rows"
        )
    if test.size == 0:
        raise SizeError(f"no test windows for horizon {horizon}")
    return train, test


def persistence_forecast(prices: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Naive baseline: the forecast for t + h is the price at t."""
    return prices[np.asarray(ends)]


def majority_rate(labels: np.ndarray) -> float:
    """Accuracy of always predicting the more frequent class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise SizeError("majority_rate needs at least one label")
    p = float(np.mean(labels))
    return max(p, 1.0 - p)


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------

@dataclass
class HorizonResult:
    task: str
    horizon: int
    ensemble: StackedEnsemble
    report: dict
    predictions: dict  # column name -> array
    loss_rows: list


def model_columns(data: PipelineData, selection: SelectionResult) -> list[str]:
    """Selected features plus the target column (models need the level)."""
    cols = list(selection.selected)
    if data.target not in cols:
        cols.append(data.target)
    return cols


def train_and_evaluate(
    cfg: RunConfig,
    data: PipelineData,
    selection: SelectionResult,
    horizon: int,
    task: str,
    seed: int,
) -> HorizonResult:
    e = cfg.effective
    train_cfg = e["train"]
    lookback = int(train_cfg["lookback"])
    cols = model_columns(data, selection)
    col_idx = [data.columns.index(c) for c in cols]
    features = data.features[:, col_idx]

    train_ends, test_ends = sample_ends(data.n_rows, data.boundary, lookback, horizon)
    x_train = build_windows(features, train_ends, lookback)
    x_test = build_windows(features, test_ends, lookback)
    prices = data.prices
    if task == "regression":
        y_train = prices[train_ends + horizon]
        actual = prices[test_ends + horizon]
    else:
        y_train = (prices[train_ends + horizon] > prices[train_ends]).astype(np.int64)
        actual = (prices[test_ends + horizon] > prices[test_ends]).astype(np.int64)

    specs = cfg.member_specs(task, horizon)
    if task == "regression":
        # members forecast the change against the window-end target level
        level = cols.index(data.target)
        specs = [
            s if s.level_column is not None else replace(s, level_column=level)
            for s in specs
        ]
    ensemble = StackedEnsemble(
        specs=specs,
        task=task,
        lookback=lookback,
        epochs=int(train_cfg["epochs"]),
        batch=int(train_cfg["batch"]),
        lr=float(train_cfg["lr"]),
        clip_norm=float(train_cfg["clip_norm"]),
        seed=seed,
    )
    with stage("train"):
        ensemble.fit(x_train, y_train)

    with stage("evaluate"):
        member_preds = ensemble.predict_members(x_test)
        labels_members = ensemble.member_labels
        predictions = {"date": data.dates[test_ends + horizon], "actual": actual}
        per_member = {}
        if task == "regression":
            combined = member_preds.mean(axis=0)
            metrics = regression_report(actual, combined)
            naive = persistence_forecast(prices, test_ends)
            baseline = {"persistence": regression_report(actual, naive)}
            for name, preds in zip(labels_members, member_preds):
                per_member[name] = regression_report(actual, preds)
                predictions[name] = preds
            predictions["combined"] = combined
        else:
            from .stack import combine_vote

            combined = combine_vote(member_preds)
            score = member_preds.mean(axis=0)
            metrics = classification_report(actual, combined, scores=score)
            baseline = {"majority_rate": majority_rate(actual)}
            for name, preds in zip(labels_members, member_preds):
                per_member[name] = classification_report(
                    actual, (preds > 0.5).astype(np.int64)
                )
                predictions[name] = preds
            predictions["combined"] = combined
            predictions["score"] = score

    loss_rows = [
        (task, horizon, member.spec.label, epoch, loss)
        for member in ensemble.members_
        for epoch, loss in enumerate(member.loss_history)
    ]
    report = {
        "interval": e["interval"],
        "horizon": horizon,
        "task": task,
        "n_train": int(train_ends.size),
        "n_test": int(test_ends.size),
        "metrics": metrics,
        "baseline": baseline,
        "per_member": per_member,
        "selection_method": selection.method,
        "predictions_csv": f"predictions_{task}_h{horizon}.csv",
    }
    return HorizonResult(task, horizon, ensemble, report, predictions, loss_rows)


@dataclass
class RunResult:
    config: RunConfig
    selections: dict  # horizon -> SelectionResult
    results: list  # HorizonResult, first repeat only
    reports: list  # report dicts (with repeat aggregation folded in)
    data: PipelineData


def _aggregate_repeats(base: dict, repeat_metrics: list[dict]) -> dict:
    names = sorted(repeat_metrics[0])
    agg = {
        name: {
            "mean": float(np.mean([m[name] for m in repeat_metrics])),
            "range": float(
                np.max([m[name] for m in repeat_metrics])
                - np.min([m[name] for m in repeat_metrics])
            ),
        }
        for name in names
    }
    out = dict(base)
    out["repeats"] = {"n": len(repeat_metrics), "metrics": agg}
    return out


def run_pipeline(cfg: RunConfig, frame: FeatureFrame | None = None) -> RunResult:
    """Execute every stage for each horizon and requested task."""
    e = cfg.effective
    data = prepare_data(cfg, frame)
    selections = {h: select_for_horizon(cfg, data, h) for h in e["horizons"]}
    results: list[HorizonResult] = []
    reports: list[dict] = []
    repeats = int(e["repeats"])
    for horizon in e["horizons"]:
        for task in e["tasks"]:
            base_seed = cfg.seed * 1000 + horizon * 10 + (1 if task == "classification" else 0)
            first = train_and_evaluate(cfg, data, selections[horizon], horizon, task, base_seed)
            results.append(first)
            if repeats == 1:
                reports.append(first.report)
                continue
            metric_runs = [first.report["metrics"]]
            for r in range(1, repeats):
                extra = train_and_evaluate(
                    cfg, data, selections[horizon], horizon, task, base_seed + 101 * r
                )
                metric_runs.append(extra.report["metrics"])
            reports.append(_aggregate_repeats(first.report, metric_runs))
    return RunResult(cfg, selections, results, reports, data)
