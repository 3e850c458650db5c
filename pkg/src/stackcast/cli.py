"""Command-line interface.

Subcommands: run, denoise, features, select, train, evaluate, predict,
report. Every command takes ``--config <json>`` plus optional ``--seed``
and ``--out`` overrides. Artifacts land in ``<out>/<config-hash>/`` so a
changed configuration can never silently overwrite an old run.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import shutil
import sys

import numpy as np

from .exceptions import (
    ConfigurationError,
    DependencyError,
    DivergenceError,
    DomainError,
    EnsembleError,
    ImputationError,
    ParseError,
    SchemaError,
    ShapeError,
    SizeError,
    StackcastError,
    StructureError,
)
from .frame import interpolate_missing, load_csv
from .metrics import roc_curve
from .pipeline import (
    RunConfig,
    model_columns,
    build_windows,
    config_hash,
    finalize_features,
    load_config,
    prepare_final_frame,
    run_pipeline,
    select_for_horizon,
    stage,
    train_and_evaluate,
)
from .stack import StackedEnsemble
from .synthetic import write_frame_csv
from .wavelet import DenoiseConfig, denoise

_CONFIG_ERRORS = (ConfigurationError, DependencyError)
_DATA_ERRORS = (
    ParseError,
    SchemaError,
    SizeError,
    ImputationError,
    DomainError,
    ShapeError,
    StructureError,
)
_TRAIN_ERRORS = (DivergenceError, EnsembleError)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
    if getattr(args, "out", None) is not None:
        cfg.effective["out"] = args.out
    if getattr(args, "repeats", None) is not None:
        cfg.effective["repeats"] = int(args.repeats)
    return cfg


def _run_dir(cfg: RunConfig) -> str:
    return os.path.join(cfg.effective["out"], config_hash(cfg))


def _require(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise DependencyError(
            f"missing artifact {path}; run 'stackcast {producer}' first"
        )
    return path


def _write_manifest(run_dir: str, cfg: RunConfig):
    payload = dict(cfg.effective)
    payload.update({"data": cfg.data, "target": cfg.target, "seed": cfg.seed})
    _write_json(
        os.path.join(run_dir, "manifest.json"),
        {
            "config": payload,
            "config_hash": config_hash(cfg),
            "seed": cfg.seed,
            "created": _dt.datetime.now().isoformat(timespec="seconds"),
        },
    )


def _predictions_rows(predictions: dict):
    names = list(predictions)
    n = len(predictions["date"])
    for i in range(n):
        yield [predictions[name][i] for name in names]


def _write_run_artifacts(run_dir: str, result):
    cfg = result.config
    os.makedirs(run_dir, exist_ok=True)
    _write_manifest(run_dir, cfg)
    _write_json(
        os.path.join(run_dir, "selection.json"),
        {str(h): sel.to_dict() for h, sel in result.selections.items()},
    )
    _write_json(os.path.join(run_dir, "flagged_rows.json"), result.data.flagged_rows)
    _write_json(os.path.join(run_dir, "report.json"), result.reports)
    loss_rows = []
    for hres in result.results:
        name = f"predictions_{hres.task}_h{hres.horizon}.csv"
        _write_csv(
            os.path.join(run_dir, name),
            list(hres.predictions),
            _predictions_rows(hres.predictions),
        )
        hres.ensemble.save(os.path.join(run_dir, f"ensemble_{hres.task}_h{hres.horizon}"))
        loss_rows.extend(hres.loss_rows)
    _write_csv(
        os.path.join(run_dir, "loss_history.csv"),
        ["task", "horizon", "member", "epoch", "loss"],
        loss_rows,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    partial = run_dir + ".partial"
    if os.path.exists(partial):
        shutil.rmtree(partial)
    try:
        result = run_pipeline(cfg)
        _write_run_artifacts(partial, result)
    except BaseException:
        if os.path.exists(partial):
            shutil.rmtree(partial)
        raise
    if os.path.exists(run_dir):
        shutil.rmtree(run_dir)
    os.replace(partial, run_dir)
    print(f"run complete: {run_dir}")
    for report in result.reports:
        metrics = ", ".join(f"{k}={v:.4g}" for k, v in report["metrics"].items())
        print(f"  {report['task']} h={report['horizon']}: {metrics}")
    return 0


def cmd_denoise(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    os.makedirs(run_dir, exist_ok=True)
    with stage("ingest"):
        frame = load_csv(cfg.data, schema=cfg.effective["schema"], target=cfg.target)
    frame = interpolate_missing(frame)
    column = args.column or cfg.target
    raw = frame.data[:, frame.column_index(column)]
    dn = cfg.effective["denoise"]
    cleaned = denoise(
        raw, DenoiseConfig(levels=dn["levels"], threshold_mode=dn["threshold_mode"])
    )
    path = os.path.join(run_dir, f"denoised_{column}.csv")
    _write_csv(path, ["date", "raw", "denoised"], zip(frame.dates, raw, cleaned))
    _write_manifest(run_dir, cfg)
    print(f"wrote {path}")
    return 0


def cmd_features(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    os.makedirs(run_dir, exist_ok=True)
    final_frame, flagged = prepare_final_frame(cfg)
    path = os.path.join(run_dir, "features.csv")
    write_frame_csv(final_frame, path)
    _write_json(os.path.join(run_dir, "flagged_rows.json"), list(flagged))
    _write_manifest(run_dir, cfg)
    print(f"wrote {path} ({final_frame.n_rows} rows, {final_frame.n_cols} columns)")
    return 0


def _load_feature_data(cfg: RunConfig, run_dir: str):
    path = _require(os.path.join(run_dir, "features.csv"), "features")
    frame = load_csv(path, target=cfg.target)
    return finalize_features(cfg, frame)


def cmd_select(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    data = _load_feature_data(cfg, run_dir)
    horizons = [int(args.horizon)] if args.horizon else cfg.effective["horizons"]
    payload = {}
    for h in horizons:
        sel = select_for_horizon(cfg, data, h)
        payload[str(h)] = sel.to_dict()
        print(f"h={h}: {sel.method} selected {sel.selected}")
    _write_json(os.path.join(run_dir, "selection.json"), payload)
    return 0


def _load_selection(run_dir: str, horizon: int):
    from .featsel import SelectionResult

    path = _require(os.path.join(run_dir, "selection.json"), "select")
    with open(path) as fh:
        payload = json.load(fh)
    key = str(horizon)
    if key not in payload:
        raise DependencyError(
            f"selection.json has no entry for horizon {horizon}; rerun 'stackcast select'"
        )
    entry = payload[key]
    return SelectionResult(
        method=entry["method"],
        k=entry["k"],
        selected=list(entry["selected"]),
        scores=dict(entry["scores"]),
    )


def _horizon_tasks(cfg: RunConfig, args):
    horizons = [int(args.horizon)] if args.horizon else cfg.effective["horizons"]
    tasks = [args.task] if args.task else cfg.effective["tasks"]
    return horizons, tasks


def cmd_train(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    data = _load_feature_data(cfg, run_dir)
    horizons, tasks = _horizon_tasks(cfg, args)
    loss_rows = []
    for h in horizons:
        selection = _load_selection(run_dir, h)
        for task in tasks:
            seed = cfg.seed * 1000 + h * 10 + (1 if task == "classification" else 0)
            result = train_and_evaluate(cfg, data, selection, h, task, seed)
            result.ensemble.save(os.path.join(run_dir, f"ensemble_{task}_h{h}"))
            loss_rows.extend(result.loss_rows)
            print(f"trained ensemble_{task}_h{h} ({len(result.ensemble.members_)} members)")
    _write_csv(
        os.path.join(run_dir, "loss_history.csv"),
        ["task", "horizon", "member", "epoch", "loss"],
        loss_rows,
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    data = _load_feature_data(cfg, run_dir)
    horizons, tasks = _horizon_tasks(cfg, args)
    reports = []
    for h in horizons:
        selection = _load_selection(run_dir, h)
        for task in tasks:
            ens_dir = os.path.join(run_dir, f"ensemble_{task}_h{h}")
            _require(os.path.join(ens_dir, "ensemble.json"), "train")
            ensemble = StackedEnsemble.load(ens_dir)
            report, predictions = _evaluate_loaded(cfg, data, selection, ensemble, h, task)
            reports.append(report)
            _write_csv(
                os.path.join(run_dir, f"predictions_{task}_h{h}.csv"),
                list(predictions),
                _predictions_rows(predictions),
            )
            metrics = ", ".join(f"{k}={v:.4g}" for k, v in report["metrics"].items())
            print(f"{task} h={h}: {metrics}")
    _write_json(os.path.join(run_dir, "report.json"), reports)
    return 0


def _evaluate_loaded(cfg, data, selection, ensemble: StackedEnsemble, horizon, task):
    from .metrics import classification_report, regression_report
    from .pipeline import majority_rate, persistence_forecast, sample_ends
    from .stack import combine_vote

    lookback = ensemble.lookback
    if lookback != int(cfg.effective["train"]["lookback"]):
        raise DependencyError(
            f"ensemble lookback {lookback} does not match config; retrain with 'stackcast train'"
        )
    col_idx = [data.columns.index(c) for c in model_columns(data, selection)]
    features = data.features[:, col_idx]
    _, test_ends = sample_ends(data.n_rows, data.boundary, lookback, horizon)
    x_test = build_windows(features, test_ends, lookback)
    prices = data.prices
    member_preds = ensemble.predict_members(x_test)
    predictions = {"date": data.dates[test_ends + horizon]}
    if task == "regression":
        actual = prices[test_ends + horizon]
        combined = member_preds.mean(axis=0)
        metrics = regression_report(actual, combined)
        baseline = {"persistence": regression_report(actual, persistence_forecast(prices, test_ends))}
        per_member = {
            name: regression_report(actual, preds)
            for name, preds in zip(ensemble.member_labels, member_preds)
        }
        predictions["actual"] = actual
        for name, preds in zip(ensemble.member_labels, member_preds):
            predictions[name] = preds
        predictions["combined"] = combined
    else:
        actual = (prices[test_ends + horizon] > prices[test_ends]).astype(np.int64)
        combined = combine_vote(member_preds)
        score = member_preds.mean(axis=0)
        metrics = classification_report(actual, combined, scores=score)
        baseline = {"majority_rate": majority_rate(actual)}
        per_member = {
            name: classification_report(actual, (preds > 0.5).astype(np.int64))
            for name, preds in zip(ensemble.member_labels, member_preds)
        }
        predictions["actual"] = actual
        for name, preds in zip(ensemble.member_labels, member_preds):
            predictions[name] = preds
        predictions["combined"] = combined
        predictions["score"] = score
    report = {
        "interval": cfg.effective["interval"],
        "horizon": horizon,
        "task": task,
        "n_test": int(test_ends.size),
        "metrics": metrics,
        "baseline": baseline,
        "per_member": per_member,
        "selection_method": selection.method,
        "predictions_csv": f"predictions_{task}_h{horizon}.csv",
    }
    return report, predictions


def cmd_predict(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    data = _load_feature_data(cfg, run_dir)
    horizons, tasks = _horizon_tasks(cfg, args)
    for h in horizons:
        selection = _load_selection(run_dir, h)
        for task in tasks:
            ens_dir = os.path.join(run_dir, f"ensemble_{task}_h{h}")
            _require(os.path.join(ens_dir, "ensemble.json"), "train")
            ensemble = StackedEnsemble.load(ens_dir)
            col_idx = [data.columns.index(c) for c in model_columns(data, selection)]
            features = data.features[:, col_idx]
            lookback = ensemble.lookback
            if data.n_rows < lookback:
                raise SizeError(
                    f"{data.n_rows} rows cannot fill a lookback-{lookback} window"
                )
            window = build_windows(features, np.array([data.n_rows - 1]), lookback)
            member_preds = ensemble.predict_members(window)[:, 0]
            if task == "classification":
                combined = int(
                    (member_preds > 0.5).sum() > len(member_preds) / 2.0
                )
            else:
                combined = float(member_preds.mean())
            forecast_date = data.dates[-1] + h
            payload = {
                "task": task,
                "horizon": h,
                "window_end": str(data.dates[-1]),
                "forecast_date": str(forecast_date),
                "members": {
                    name: float(v)
                    for name, v in zip(ensemble.member_labels, member_preds)
                },
                "combined": combined,
            }
            _write_json(os.path.join(run_dir, f"forecast_{task}_h{h}.json"), payload)
            print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    cfg = _load_effective_config(args)
    run_dir = _run_dir(cfg)
    report_path = _require(os.path.join(run_dir, "report.json"), "run")
    with open(report_path) as fh:
        reports = json.load(fh)
    metric_rows = []
    for entry in reports:
        for metric, value in entry["metrics"].items():
            metric_rows.append([entry["task"], entry["horizon"], metric, value])
        for base_name, base in entry["baseline"].items():
            if isinstance(base, dict):
                for metric, value in base.items():
                    metric_rows.append(
                        [entry["task"], entry["horizon"], f"{base_name}_{metric}", value]
                    )
            else:
                metric_rows.append([entry["task"], entry["horizon"], base_name, base])
    _write_csv(
        os.path.join(run_dir, "metrics_summary.csv"),
        ["task", "horizon", "metric", "value"],
        metric_rows,
    )
    written = [os.path.join(run_dir, "metrics_summary.csv")]

    for entry in reports:
        task, h = entry["task"], entry["horizon"]
        pred_path = os.path.join(run_dir, entry["predictions_csv"])
        if not os.path.exists(pred_path):
            continue
        with open(pred_path) as fh:
            rows = list(csv.DictReader(fh))
        avp = os.path.join(run_dir, f"actual_vs_predicted_{task}_h{h}.csv")
        _write_csv(
            avp,
            ["date", "actual", "combined"],
            [[r["date"], r["actual"], r["combined"]] for r in rows],
        )
        written.append(avp)
        if task == "classification" and rows and "score" in rows[0]:
            labels = np.array([int(r["actual"]) for r in rows])
            scores = np.array([float(r["score"]) for r in rows])
            try:
                fpr, tpr, thresholds = roc_curve(labels, scores)
            except DomainError:
                continue  # single-class slice has no ROC
            roc_path = os.path.join(run_dir, f"roc_points_h{h}.csv")
            _write_csv(roc_path, ["fpr", "tpr", "threshold"], zip(fpr, tpr, thresholds))
            written.append(roc_path)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "run": cmd_run,
    "denoise": cmd_denoise,
    "features": cmd_features,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackcast",
        description="Wavelet-denoised stacked ensemble forecasting pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        if name == "run":
            p.add_argument("--repeats", type=int, default=None)
        if name == "denoise":
            p.add_argument("--column", default=None, help="column to denoise (default: target)")
        if name in ("select", "train", "evaluate", "predict"):
            p.add_argument("--horizon", type=int, default=None)
        if name in ("train", "evaluate", "predict"):
            p.add_argument("--task", choices=("regression", "classification"), default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _TRAIN_ERRORS as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except StackcastError as exc:  # any error type added later
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
