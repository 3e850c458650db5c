"""Input validation helpers used across the estimator API."""

import numpy as np

from .exceptions import ShapeError


def as_float_vector(x, name="x", allow_empty=False):
    """Coerce to a 1-D float64 array, rejecting non-finite values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def as_float_matrix(x, name="X", allow_nan=False):
    """Coerce to a 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def check_equal_length(a, b, name_a="a", name_b="b"):
    if len(a) != len(b):
        raise ShapeError(
            f"{name_a} and {name_b} must have equal length "
            f"({len(a)} vs {len(b)})"
        )


def check_binary(y, name="labels"):
    """Require every value to be 0 or 1; return an int array."""
    arr = np.asarray(y)
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise ShapeError(f"{name} must be binary 0/1, got values {vals[:5]}")
    return arr.astype(np.int64)
