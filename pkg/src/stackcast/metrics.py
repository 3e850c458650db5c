"""Evaluation criteria for the regression and classification tasks.

Regression: MAE, RMSE and MAPE (in percent). Classification: confusion
counts, accuracy, precision, recall, F1, specificity and rank-based AUC
with midrank tie handling (equivalent to trapezoidal ROC integration).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .validation import as_float_vector, check_binary, check_equal_length

__all__ = [
    "mae",
    "rmse",
    "mape",
    "ConfusionCounts",
    "confusion",
    "accuracy",
    "precision",
    "recall",
    "f1_score",
    "specificity",
    "roc_auc",
    "roc_curve",
    "regression_report",
    "classification_report",
]


def _pair(actual, predicted):
    a = as_float_vector(actual, "actual")
    p = as_float_vector(predicted, "predicted")
    check_equal_length(a, p, "actual", "predicted")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean(np.abs(a - p) ** 2)))


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent.

    Each term is |actual - predicted| / |actual|; a zero actual value is a
    domain error. Prices in scope are positive, where this coincides with
    dividing by the raw actual.
    """
    a, p = _pair(actual, predicted)
    if np.any(a == 0.0):
        raise DomainError("mape is undefined when an actual value is zero")
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise DomainError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(labels, predictions) -> ConfusionCounts:
    y = check_binary(labels, "labels")
    p = check_binary(predictions, "predictions")
    check_equal_length(y, p, "labels", "predictions")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def _guarded_ratio(num: float, denom: float, name: str) -> float:
    if denom == 0:
        warnings.warn(f"{name} has a zero denominator; returning 0")
        return 0.0
    return num / denom


def accuracy(c: ConfusionCounts) -> float:
    return _guarded_ratio(c.tp + c.tn, c.total, "accuracy")


def precision(c: ConfusionCounts) -> float:
    return _guarded_ratio(c.tp, c.tp + c.fp, "precision")


def recall(c: ConfusionCounts) -> float:
    return _guarded_ratio(c.tp, c.tp + c.fn, "recall")


def f1_score(c: ConfusionCounts) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pr, rc = precision(c), recall(c)
    if pr + rc == 0:
        warnings.warn("f1 has a zero denominator; returning 0")
        return 0.0
    return 2.0 * pr * rc / (pr + rc)


def specificity(c: ConfusionCounts) -> float:
    return _guarded_ratio(c.tn, c.tn + c.fp, "specificity")


def _midranks(scores: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; tied scores share the mean of their ranks."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(labels, scores) -> float:
    """Mann-Whitney AUC with midrank tie handling."""
    y = check_binary(labels, "labels")
    s = as_float_vector(scores, "scores")
    check_equal_length(y, s, "labels", "scores")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("roc_auc needs both classes present in the labels")
    ranks = _midranks(s)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(labels, scores):
    """ROC points (fpr, tpr, threshold) sweeping thresholds high to low.

    Tied scores collapse into a single point, so trapezoidal integration
    of the curve reproduces :func:`roc_auc` exactly.
    """
    y = check_binary(labels, "labels")
    s = as_float_vector(scores, "scores")
    check_equal_length(y, s, "labels", "scores")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("roc_curve needs both classes present in the labels")
    order = np.argsort(-s, kind="stable")
    sorted_s, sorted_y = s[order], y[order]
    fpr = [0.0]
    tpr = [0.0]
    thresholds = [float("inf")]
    tp = fp = 0
    i = 0
    while i < sorted_s.size:
        j = i
        while j + 1 < sorted_s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        tp += int(np.sum(sorted_y[i : j + 1] == 1))
        fp += (j - i + 1) - int(np.sum(sorted_y[i : j + 1] == 1))
        fpr.append(fp / n_neg)
        tpr.append(tp / n_pos)
        thresholds.append(float(sorted_s[i]))
        i = j + 1
    return np.array(fpr), np.array(tpr), np.array(thresholds)


def regression_report(actual, predicted) -> dict:
    return {
        "mae": mae(actual, predicted),
        "rmse": rmse(actual, predicted),
        "mape": mape(actual, predicted),
    }


def classification_report(labels, predictions, scores=None) -> dict:
    """Bundle the classification metrics; AUC is included when scores are
    given and both classes occur (degenerate slices omit it with a warning)."""
    c = confusion(labels, predictions)
    out = {
        "accuracy": accuracy(c),
        "precision": precision(c),
        "recall": recall(c),
        "f1": f1_score(c),
        "specificity": specificity(c),
    }
    if scores is not None:
        try:
            out["auc"] = roc_auc(labels, scores)
        except DomainError as exc:
            warnings.warn(f"auc omitted: {exc}")
    return out
