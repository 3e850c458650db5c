"""Feature selection: Chi-squared scores, forest-importance RFE and the
embedded importance-plus-collinearity-pruning selector.

All selectors consume a :class:`FeatureFrame` whose target column is
excluded from the candidates, score on exactly the rows they are given
(callers pass the training partition), and are deterministic under a
fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError
from .forest import RandomForest, forest_importance
from .frame import FeatureFrame
from .validation import as_float_matrix, check_binary, check_equal_length

__all__ = [
    "ContingencyTable",
    "SelectionResult",
    "chi2_statistic",
    "chi2_scores",
    "chi2_select",
    "rfe",
    "embedded_select",
    "Chi2Selector",
    "RFESelector",
    "EmbeddedSelector",
]


@dataclass(frozen=True)
class ContingencyTable:
    """Interval-by-class count table with consistent margins."""

    counts: np.ndarray  # (m intervals, k classes), non-negative ints

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 2 or (counts < 0).any():
            raise ConfigurationError("contingency counts must be a non-negative 2-D table")
        object.__setattr__(self, "counts", counts)

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


def chi2_statistic(table: ContingencyTable) -> float:
    """X^2 = sum over cells of (A - E)^2 / E with E = R_i C_j / N.

    Rows or columns with zero margin contribute nothing (their expected
    counts are zero by construction).
    """
    n = table.total
    if n == 0:
        return 0.0
    expected = np.outer(table.row_totals, table.col_totals) / n
    mask = expected > 0
    diff = table.counts[mask] - expected[mask]
    return float(np.sum(diff * diff / expected[mask]))


def _bin_feature(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin index per value; boundary values go to the lower bin."""
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.zeros(values.size, dtype=np.int64)
    edges = np.linspace(lo, hi, bins + 1)
    return np.searchsorted(edges[1:-1], values, side="left")


def chi2_scores(X, labels, bins: int = 10) -> np.ndarray:
    """Chi-squared relevance of each column of X against binary labels.

    Each feature is discretized into ``bins`` equal-width intervals over
    its own range (empty intervals dropped). Constant features score 0
    with a warning.
    """
    X = as_float_matrix(X)
    labels = check_binary(labels)
    check_equal_length(X, labels, "X", "labels")
    if bins < 2:
        raise ConfigurationError(f"bins must be >= 2, got {bins}")
    scores = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        if col.min() == col.max():
            warnings.warn(f"feature column {j} is constant; chi2 score set to 0")
            scores[j] = 0.0
            continue
        interval = _bin_feature(col, bins)
        counts = np.zeros((bins, 2))
        np.add.at(counts, (interval, labels), 1.0)
        counts = counts[counts.sum(axis=1) > 0]  # drop empty intervals
        scores[j] = chi2_statistic(ContingencyTable(counts))
    return scores


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selector run."""

    method: str
    k: int
    selected: list[str]
    scores: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "selected": list(self.selected),
            "scores": {name: float(v) for name, v in self.scores.items()},
        }


def _feature_columns(frame: FeatureFrame) -> list[str]:
    return [c for c in frame.columns if c != frame.target]


def _feature_matrix(frame: FeatureFrame, names: list[str]) -> np.ndarray:
    idx = [frame.column_index(n) for n in names]
    return frame.data[:, idx]


def _top_k(names: list[str], scores: np.ndarray, k: int) -> list[str]:
    order = np.lexsort((np.arange(len(names)), -scores))
    return [names[i] for i in order[:k]]


def _check_k(k: int, available: int) -> None:
    if not 1 <= k <= available:
        raise ConfigurationError(
            f"k must lie in [1, {available}] (candidate features), got {k}"
        )


def chi2_select(frame: FeatureFrame, labels, k: int = 20, bins: int = 10) -> SelectionResult:
    names = _feature_columns(frame)
    _check_k(k, len(names))
    scores = chi2_scores(_feature_matrix(frame, names), labels, bins)
    return SelectionResult(
        method="chi2",
        k=k,
        selected=_top_k(names, scores, k),
        scores=dict(zip(names, scores.tolist())),
    )


def rfe(
    frame: FeatureFrame,
    targets,
    k: int = 20,
    step: int = 1,
    trees: int = 25,
    max_depth: int | None = 6,
    min_leaf: int = 2,
    seed: int = 0,
) -> SelectionResult:
    """Recursive feature elimination with a random-forest ranker.

    Repeatedly refits the forest and drops the ``step`` least important
    features until ``k`` remain. Scores hold elimination ranks: survivors
    rank 1, the last feature dropped ranks 2, and so on upward.
    """
    names = _feature_columns(frame)
    _check_k(k, len(names))
    if step < 1:
        raise ConfigurationError(f"step must be >= 1, got {step}")
    X_all = _feature_matrix(frame, names)
    targets = np.asarray(targets, dtype=np.float64).ravel()

    remaining = list(range(len(names)))
    dropped_rounds: list[list[int]] = []
    seeds = np.random.SeedSequence(seed).generate_state(1024)
    rounds = 0
    while len(remaining) > k:
        forest = RandomForest(
            trees=trees, max_depth=max_depth, min_leaf=min_leaf, seed=int(seeds[rounds])
        )
        forest.fit(X_all[:, remaining], targets)
        imp = forest_importance(forest)
        n_drop = min(step, len(remaining) - k)
        order = np.lexsort((np.arange(len(remaining)), imp))
        drop_local = sorted(order[:n_drop].tolist())
        dropped_rounds.append([remaining[i] for i in drop_local])
        remaining = [f for i, f in enumerate(remaining) if i not in drop_local]
        rounds += 1

    ranks = {names[i]: 1.0 for i in remaining}
    for back, batch in enumerate(reversed(dropped_rounds)):
        for i in batch:
            ranks[names[i]] = float(2 + back)
    return SelectionResult(
        method="rfe",
        k=k,
        selected=[names[i] for i in remaining],
        scores={n: ranks[n] for n in names},
    )


def embedded_select(
    frame: FeatureFrame,
    targets,
    k: int = 20,
    corr_cap: float = 0.9,
    trees: int = 25,
    max_depth: int | None = 6,
    min_leaf: int = 2,
    seed: int = 0,
) -> SelectionResult:
    """Forest importance ranking with greedy collinearity pruning.

    Features are accepted in descending importance, skipping any whose
    absolute Pearson correlation with an already accepted feature exceeds
    ``corr_cap``. Fewer than k survivors is a warning, not an error.
    """
    if not 0.0 < corr_cap <= 1.0:
        raise ConfigurationError(f"corr_cap must lie in (0, 1], got {corr_cap}")
    names = _feature_columns(frame)
    _check_k(k, len(names))
    X = _feature_matrix(frame, names)
    targets = np.asarray(targets, dtype=np.float64).ravel()

    forest = RandomForest(
        trees=trees, max_depth=max_depth, min_leaf=min_leaf, seed=seed
    ).fit(X, targets)
    imp = forest_importance(forest)
    order = np.lexsort((np.arange(len(names)), -imp))

    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    accepted: list[int] = []
    for i in order:
        if len(accepted) == k:
            break
        ok = True
        for a in accepted:
            if norms[i] == 0.0 or norms[a] == 0.0:
                continue  # constant columns carry no correlation signal
            r = float(centered[:, i] @ centered[:, a] / (norms[i] * norms[a]))
            if abs(r) > corr_cap:
                ok = False
                break
        if ok:
            accepted.append(int(i))
    if len(accepted) < k:
        warnings.warn(
            f"collinearity pruning left {len(accepted)} of the requested {k} features"
        )
    return SelectionResult(
        method="embedded",
        k=k,
        selected=[names[i] for i in accepted],
        scores=dict(zip(names, imp.tolist())),
    )


class _SelectorBase(BaseEstimator):
    """Shared fit/transform plumbing for the three selectors."""

    def transform(self, frame: FeatureFrame) -> FeatureFrame:
        if not hasattr(self, "result_"):
            raise ConfigurationError("selector is not fitted; call fit() first")
        return frame.select(self.result_.selected)

    def fit_transform(self, frame: FeatureFrame, y=None, **kw) -> FeatureFrame:
        return self.fit(frame, y).transform(frame)

    @property
    def selected_(self) -> list[str]:
        return list(self.result_.selected)


class Chi2Selector(_SelectorBase):
    def __init__(self, k: int = 20, bins: int = 10):
        self.k = k
        self.bins = bins

    def fit(self, frame: FeatureFrame, y):
        self.result_ = chi2_select(frame, y, self.k, self.bins)
        return self


class RFESelector(_SelectorBase):
    def __init__(self, k=20, step=1, trees=25, max_depth=6, min_leaf=2, seed=0):
        self.k = k
        self.step = step
        self.trees = trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, frame: FeatureFrame, y):
        self.result_ = rfe(
            frame, y, self.k, self.step, self.trees, self.max_depth, self.min_leaf, self.seed
        )
        return self


class EmbeddedSelector(_SelectorBase):
    def __init__(self, k=20, corr_cap=0.9, trees=25, max_depth=6, min_leaf=2, seed=0):
        self.k = k
        self.corr_cap = corr_cap
        self.trees = trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, frame: FeatureFrame, y):
        self.result_ = embedded_select(
            frame, y, self.k, self.corr_cap, self.trees, self.max_depth, self.min_leaf, self.seed
        )
        return self
