"""Mean-reduced losses returning (value, gradient w.r.t. predictions)."""

from __future__ import annotations

import numpy as np

from ..validation import as_float_vector, check_binary, check_equal_length

__all__ = ["mse_loss", "logcosh_loss", "bce_loss", "LOSSES"]

_LN2 = np.log(2.0)


def mse_loss(pred, target):
    pred = as_float_vector(pred, "pred")
    target = as_float_vector(target, "target")
    check_equal_length(pred, target, "pred", "target")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def logcosh_loss(pred, target):
    """log(cosh(pred - target)), computed in overflow-safe form."""
    pred = as_float_vector(pred, "pred")
    target = as_float_vector(target, "target")
    check_equal_length(pred, target, "pred", "target")
    diff = pred - target
    a = np.abs(diff)
    value = a + np.log1p(np.exp(-2.0 * a)) - _LN2
    return float(np.mean(value)), np.tanh(diff) / diff.size


def bce_loss(prob, label):
    """Binary cross entropy on probabilities, clamped to [1e-7, 1 - 1e-7]."""
    prob = as_float_vector(prob, "prob")
    label = check_binary(label, "label").astype(np.float64)
    check_equal_length(prob, label, "prob", "label")
    p = np.clip(prob, 1e-7, 1.0 - 1e-7)
    value = -np.mean(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))
    grad = (p - label) / (p * (1.0 - p)) / p.size
    return float(value), grad


LOSSES = {"mse": mse_loss, "logcosh": logcosh_loss, "bce": bce_loss}
