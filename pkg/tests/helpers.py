"""Shared test utilities: finite-difference gradient checking and paths."""

import os

import numpy as np

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

HASHRATE_CSV = os.path.join(DATA_DIR, "sample_hashrate.csv")
PRICES_CSV = os.path.join(DATA_DIR, "synthetic_prices.csv")


def numerical_gradient(f, x, eps=1e-5):
    """Central finite differences of a scalar function over array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(x)
        flat[i] = orig - eps
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(analytic, numeric, floor=1e-8):
    """Worst-case elementwise relative error between two gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))
