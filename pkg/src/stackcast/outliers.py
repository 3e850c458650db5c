"""Isolation-forest outlier control for feature frames.

Outlying rows are not dropped: dropping would punch holes in the daily
axis that the windowing stages rely on. Flagged rows are instead replaced
by linear interpolation between their unflagged neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError
from .frame import FeatureFrame
from .validation import as_float_matrix

__all__ = ["IsolationForestDetector", "isolation_forest_filter", "average_path_length"]


def average_path_length(m) -> np.ndarray | float:
    """c(m): expected unsuccessful-search path length in a BST of m points.

    c(m) = 2 H(m - 1) - 2 (m - 1) / m with H(i) ~= ln(i) + Euler gamma.
    Normalizes raw path lengths into the anomaly score 2^(-E[h] / c(m)).
    """
    m_arr = np.asarray(m, dtype=np.float64)
    out = np.zeros_like(m_arr)
    big = m_arr > 2
    out[big] = 2.0 * (np.log(m_arr[big] - 1.0) + np.euler_gamma) - 2.0 * (
        m_arr[big] - 1.0
    ) / m_arr[big]
    out[m_arr == 2] = 1.0
    return out if out.ndim else float(out)


@dataclass
class _IsoNode:
    """One node of an isolation tree (leaf when feature is None)."""

    size: int
    feature: int | None = None
    threshold: float = 0.0
    left: "_IsoNode | None" = None
    right: "_IsoNode | None" = None


def _grow_tree(X, depth, limit, rng) -> _IsoNode:
    n = X.shape[0]
    if n <= 1 or depth >= limit:
        return _IsoNode(size=n)
    spans = X.max(axis=0) - X.min(axis=0)
    candidates = np.nonzero(spans > 0)[0]
    if candidates.size == 0:  # all remaining points identical
        return _IsoNode(size=n)
    feature = int(rng.choice(candidates))
    lo, hi = X[:, feature].min(), X[:, feature].max()
    threshold = float(rng.uniform(lo, hi))
    mask = X[:, feature] < threshold
    if not mask.any() or mask.all():
        return _IsoNode(size=n)
    return _IsoNode(
        size=n,
        feature=feature,
        threshold=threshold,
        left=_grow_tree(X[mask], depth + 1, limit, rng),
        right=_grow_tree(X[~mask], depth + 1, limit, rng),
    )


def _path_length(node: _IsoNode, x) -> float:
    depth = 0.0
    while node.feature is not None:
        node = node.left if x[node.feature] < node.threshold else node.right
        depth += 1.0
    return depth + average_path_length(node.size)


class IsolationForestDetector(BaseEstimator):
    """Isolation forest with the score s(x) = 2^(-E[path length] / c(psi)).

    Parameters
    ----------
    trees : int
        Number of isolation trees.
    subsample : int or None
        Rows drawn (without replacement) per tree. None means
        min(256, n_rows); an explicit value larger than the data errors.
    seed : int
        Seed for the per-tree random streams; fits are deterministic.
    """

    def __init__(self, trees: int = 100, subsample: int | None = None, seed: int = 0):
        self.trees = trees
        self.subsample = subsample
        self.seed = seed

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        n = X.shape[0]
        if self.trees < 1:
            raise ConfigurationError(f"trees must be >= 1, got {self.trees}")
        if self.subsample is None:
            psi = min(256, n)
        else:
            psi = int(self.subsample)
            if psi > n:
                raise ConfigurationError(
                    f"subsample {psi} exceeds the {n} available rows"
                )
            if psi < 2:
                raise ConfigurationError(f"subsample must be >= 2, got {psi}")
        limit = int(np.ceil(np.log2(max(psi, 2))))
        streams = np.random.SeedSequence(self.seed).spawn(self.trees)
        self.trees_ = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            idx = rng.choice(n, size=psi, replace=False)
            self.trees_.append(_grow_tree(X[idx], 0, limit, rng))
        self.subsample_ = psi
        return self

    def score_samples(self, X) -> np.ndarray:
        """Anomaly score per row; higher means more isolated."""
        if not hasattr(self, "trees_"):
            raise ConfigurationError("detector is not fitted; call fit() first")
        X = as_float_matrix(X)
        mean_path = np.array(
            [
                np.mean([_path_length(tree, row) for tree in self.trees_])
                for row in X
            ]
        )
        return 2.0 ** (-mean_path / average_path_length(self.subsample_))


def _reinterpolate_rows(data: np.ndarray, flagged: np.ndarray) -> np.ndarray:
    """Replace flagged rows with linear interpolation over unflagged rows."""
    keep = np.ones(data.shape[0], dtype=bool)
    keep[flagged] = False
    idx = np.arange(data.shape[0], dtype=np.float64)
    out = data.copy()
    for j in range(data.shape[1]):
        out[flagged, j] = np.interp(idx[flagged], idx[keep], data[keep, j])
    return out


def isolation_forest_filter(
    frame: FeatureFrame,
    trees: int = 100,
    subsample: int | None = None,
    contamination: float = 0.01,
    seed: int = 0,
):
    """Flag the ceil(contamination * rows) most anomalous rows and replace
    them by interpolation of their unflagged neighbors.

    Returns the corrected frame and the flagged row indices (ascending).
    """
    if not 0.0 <= contamination < 0.5:
        raise ConfigurationError(
            f"contamination must lie in [0, 0.5), got {contamination}"
        )
    if frame.has_missing():
        raise ConfigurationError("frame must be fully imputed before outlier control")
    n_flag = int(np.ceil(contamination * frame.n_rows))
    if n_flag == 0:
        return frame, []
    if n_flag >= frame.n_rows - 1:
        raise ConfigurationError(
            f"contamination {contamination} would flag {n_flag} of "
            f"{frame.n_rows} rows; too few rows would remain"
        )
    detector = IsolationForestDetector(trees=trees, subsample=subsample, seed=seed)
    scores = detector.fit(frame.data).score_samples(frame.data)
    # Stable ordering: descending score, ties broken by row index.
    order = np.lexsort((np.arange(scores.size), -scores))
    flagged = np.sort(order[:n_flag])
    corrected = _reinterpolate_rows(np.asarray(frame.data), flagged)
    out = FeatureFrame(frame.dates, corrected, frame.columns, frame.target)
    return out, [int(i) for i in flagged]
