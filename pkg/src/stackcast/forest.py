"""Random forest of CART trees with impurity-based feature importance.

Trees are grown on bootstrap samples, scanning sqrt(p) randomly chosen
features per split. Node importance is
``ni_j = w_j C_j - w_left C_left - w_right C_right`` where ``w`` is the
fraction of the tree's samples reaching the node and ``C`` its impurity
(population variance for regression, Gini for binary classification). A
tree's feature score is its share of total node importance; the forest
score averages the per-tree shares, so scores sum to one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError, SizeError
from .validation import as_float_matrix, check_equal_length

__all__ = ["TreeNode", "RandomForest", "tree_importance", "forest_importance"]


@dataclass
class TreeNode:
    """One CART node. Leaves have ``feature`` None and no children."""

    weight: float  # fraction of the tree's samples reaching this node
    impurity: float
    value: float  # mean target (regression) or P(class 1)
    n_samples: int
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _variance(y: np.ndarray) -> float:
    return float(np.var(y)) if y.size else 0.0


def _gini(y: np.ndarray) -> float:
    if not y.size:
        return 0.0
    p = float(np.mean(y))
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, feature_ids, min_leaf, task):
    """Scan candidate features; return (feature, threshold, gain) or None.

    ``gain`` is the unweighted impurity decrease
    C_parent - (n_L C_L + n_R C_R) / n, maximized via prefix sums.
    """
    n = y.size
    parent_imp = _gini(y) if task == "classification" else _variance(y)
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        # split after position i puts i+1 samples left
        cut = np.nonzero(xs[1:] > xs[:-1])[0]
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        csum = np.cumsum(ys)[cut]
        if task == "classification":
            total = np.sum(ys)
            p_l = csum / n_left
            p_r = (total - csum) / n_right
            child = n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)
        else:
            csum2 = np.cumsum(ys * ys)[cut]
            total, total2 = np.sum(ys), np.sum(ys * ys)
            sse_l = csum2 - csum**2 / n_left
            sse_r = (total2 - csum2) - (total - csum) ** 2 / n_right
            child = sse_l + sse_r
        child = np.where(valid, child, np.inf)
        k = int(np.argmin(child))
        gain = parent_imp - child[k] / n
        if gain <= 1e-15:
            continue
        threshold = 0.5 * (xs[cut[k]] + xs[cut[k] + 1])
        if best is None or gain > best[2] + 1e-15:
            best = (f, float(threshold), float(gain))
    return best


def _grow(X, y, depth, weight, root_n, rng, *, max_depth, min_leaf, max_features, task):
    impurity = _gini(y) if task == "classification" else _variance(y)
    node = TreeNode(
        weight=weight,
        impurity=impurity,
        value=float(np.mean(y)),
        n_samples=int(y.size),
    )
    if (
        impurity <= 0.0
        or y.size < 2 * min_leaf
        or (max_depth is not None and depth >= max_depth)
    ):
        return node
    feature_ids = rng.choice(X.shape[1], size=max_features, replace=False)
    found = _best_split(X, y, feature_ids, min_leaf, task)
    if found is None:
        return node
    f, threshold, _ = found
    mask = X[:, f] <= threshold
    node.feature, node.threshold = int(f), threshold
    common = dict(max_depth=max_depth, min_leaf=min_leaf, max_features=max_features, task=task)
    frac_left = mask.sum() / y.size
    node.left = _grow(X[mask], y[mask], depth + 1, weight * frac_left, root_n, rng, **common)
    node.right = _grow(X[~mask], y[~mask], depth + 1, weight * (1.0 - frac_left), root_n, rng, **common)
    return node


def _predict_tree(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if row[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.value
    return out


class RandomForest(BaseEstimator):
    """CART forest for regression or binary classification.

    Parameters
    ----------
    trees : int
        Number of bootstrap trees.
    max_depth : int or None
        Depth cap; None grows until purity or ``min_leaf``.
    min_leaf : int
        Minimum samples per leaf.
    seed : int
        Seed for bootstrap and feature sampling; fits are deterministic.
    task : str
        "regression", "classification" or "auto" (binary targets switch
        to classification).
    """

    def __init__(self, trees=50, max_depth=None, min_leaf=1, seed=0, task="auto"):
        self.trees = trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.task = task

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] == 0:
            raise ConfigurationError(
                f"forest needs a 2-D frame with at least one feature, got shape {X.shape}"
            )
        X = as_float_matrix(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        check_equal_length(X, y, "X", "y")
        if X.shape[0] < 2:
            raise SizeError(f"need at least 2 samples, got {X.shape[0]}")
        if self.task == "auto":
            self.task_ = (
                "classification" if np.all(np.isin(np.unique(y), (0.0, 1.0))) else "regression"
            )
        elif self.task in ("regression", "classification"):
            self.task_ = self.task
        else:
            raise ConfigurationError(f"unknown task '{self.task}'")

        n, p = X.shape
        max_features = max(1, int(np.sqrt(p)))
        streams = np.random.SeedSequence(self.seed).spawn(self.trees)
        self.trees_ = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            idx = rng.choice(n, size=n, replace=True)
            root = _grow(
                X[idx],
                y[idx],
                depth=0,
                weight=1.0,
                root_n=n,
                rng=rng,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=max_features,
                task=self.task_,
            )
            self.trees_.append(root)
        self.n_features_ = p
        return self

    def predict(self, X) -> np.ndarray:
        """Mean tree prediction: value for regression, P(1) for classification."""
        if not hasattr(self, "trees_"):
            raise ConfigurationError("forest is not fitted; call fit() first")
        X = as_float_matrix(X)
        return np.mean([_predict_tree(t, X) for t in self.trees_], axis=0)

    @property
    def feature_importances_(self) -> np.ndarray:
        return forest_importance(self)


def _collect_split_nodes(node: TreeNode, out: list):
    if node is None or node.is_leaf:
        return
    out.append(node)
    _collect_split_nodes(node.left, out)
    _collect_split_nodes(node.right, out)


def tree_importance(root: TreeNode, n_features: int) -> np.ndarray:
    """Per-tree normalized importance; uniform when the tree never splits."""
    splits: list[TreeNode] = []
    _collect_split_nodes(root, splits)
    scores = np.zeros(n_features)
    total = 0.0
    for node in splits:
        ni = (
            node.weight * node.impurity
            - node.left.weight * node.left.impurity
            - node.right.weight * node.right.impurity
        )
        scores[node.feature] += ni
        total += ni
    if total <= 0.0:
        return np.full(n_features, 1.0 / n_features)
    scores /= total
    s = scores.sum()  # already 1 by construction; renormalize for round-off
    return scores / s


def forest_importance(forest: RandomForest | list, n_features: int | None = None) -> np.ndarray:
    """Mean of per-tree normalized importances; sums to 1.

    Accepts a fitted :class:`RandomForest` or a plain list of roots plus
    ``n_features`` (useful for hand-built fixtures).
    """
    if isinstance(forest, RandomForest):
        roots, p = forest.trees_, forest.n_features_
    else:
        roots, p = list(forest), n_features
        if p is None:
            raise ConfigurationError("n_features is required for a bare tree list")
    per_tree = np.array([tree_importance(r, p) for r in roots])
    informative = [not all_leaf for all_leaf in (r.is_leaf for r in roots)]
    if not any(informative):
        warnings.warn("no tree in the forest made a split; importance is uniform")
    return per_tree.mean(axis=0)
