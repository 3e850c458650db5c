"""Metric formulas, guards and rank-based AUC against a pair-counting oracle."""

import numpy as np
import pytest

from stackcast import (
    ConfusionCounts,
    DomainError,
    accuracy,
    confusion,
    f1_score,
    mae,
    mape,
    precision,
    recall,
    rmse,
    roc_auc,
    roc_curve,
    specificity,
)


class TestRegressionMetrics:
    def test_perfect_prediction(self):
        y = np.array([3.0, 4.0, 5.0])
        assert mae(y, y) == 0.0
        assert rmse(y, y) == 0.0
        assert mape(y, y) == 0.0

    def test_unit_error(self):
        assert mae([100.0], [99.0]) == 1.0
        assert rmse([100.0], [99.0]) == 1.0
        assert abs(mape([100.0], [99.0]) - 1.0) < 1e-12

    def test_negative_actuals(self):
        actual, pred = [1.0, -1.0], [0.0, 0.0]
        assert mae(actual, pred) == 1.0
        assert rmse(actual, pred) == 1.0
        assert abs(mape(actual, pred) - 100.0) < 1e-12

    def test_mape_zero_actual_domain_error(self):
        with pytest.raises(DomainError):
            mape([0.0, 1.0], [1.0, 1.0])

    def test_rmse_dominates_mae(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(1, 30)
            a, p = rng.normal(size=n), rng.normal(size=n)
            assert rmse(a, p) >= mae(a, p) - 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(1, 5, 20)
        p = rng.uniform(1, 5, 20)
        perm = rng.permutation(20)
        assert abs(mae(a, p) - mae(a[perm], p[perm])) < 1e-12
        assert abs(rmse(a, p) - rmse(a[perm], p[perm])) < 1e-12
        assert abs(mape(a, p) - mape(a[perm], p[perm])) < 1e-12


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        y = np.array([1, 0, 1, 0, 1])
        c = confusion(y, y)
        assert accuracy(c) == 1.0
        assert f1_score(c) == 1.0
        assert specificity(c) == 1.0

    def test_all_positive_predictor_on_balanced_labels(self):
        y = np.array([1] * 10 + [0] * 10)
        pred = np.ones(20, dtype=int)
        c = confusion(y, pred)
        assert c.tp == 10 and c.fp == 10 and c.tn == 0 and c.fn == 0
        assert accuracy(c) == 0.5
        assert recall(c) == 1.0
        assert precision(c) == 0.5
        assert abs(f1_score(c) - 2.0 / 3.0) < 1e-12
        assert specificity(c) == 0.0

    def test_no_predicted_positives_guarded(self):
        y = np.array([1, 1, 0])
        pred = np.zeros(3, dtype=int)
        c = confusion(y, pred)
        with pytest.warns(UserWarning):
            assert precision(c) == 0.0
        with pytest.warns(UserWarning):
            assert f1_score(c) == 0.0

    def test_accuracy_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            y = (rng.uniform(size=30) > 0.4).astype(int)
            pred = (rng.uniform(size=30) > 0.5).astype(int)
            if y.min() == y.max():
                continue
            c = confusion(y, pred)
            n_pos, n_neg = c.tp + c.fn, c.tn + c.fp
            lhs = accuracy(c)
            rhs = (recall(c) * n_pos + specificity(c) * n_neg) / (n_pos + n_neg)
            assert abs(lhs - rhs) < 1e-12

    def test_counts_validated(self):
        with pytest.raises(DomainError):
            ConfusionCounts(tp=-1, tn=0, fp=0, fn=0)


def pair_counting_auc(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = ties = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                ties += 1.0
    return (wins + 0.5 * ties) / (pos.size * neg.size)


class TestAuc:
    def test_perfectly_ordered(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0

    def test_anti_ordered(self):
        assert roc_auc([0, 0, 1, 1], [0.9, 0.8, 0.2, 0.1]) == 0.0

    def test_tied_scores_match_pair_oracle(self):
        labels = np.array([1, 0, 1, 0, 1, 0])
        scores = np.array([0.5, 0.5, 0.7, 0.7, 0.2, 0.1])
        assert abs(roc_auc(labels, scores) - pair_counting_auc(labels, scores)) < 1e-12

    def test_random_fixtures_match_pair_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            labels = (rng.uniform(size=n) > 0.5).astype(int)
            if labels.min() == labels.max():
                continue
            scores = np.round(rng.uniform(size=n), 1)  # force ties
            assert abs(roc_auc(labels, scores) - pair_counting_auc(labels, scores)) < 1e-12

    def test_negation_identity(self):
        rng = np.random.default_rng(4)
        labels = np.array([0, 1] * 15)
        scores = rng.normal(size=30)
        assert abs(roc_auc(labels, scores) + roc_auc(labels, -scores) - 1.0) < 1e-12

    def test_single_class_domain_error(self):
        with pytest.raises(DomainError):
            roc_auc([1, 1, 1], [0.1, 0.2, 0.3])

    def test_curve_integrates_to_auc(self):
        rng = np.random.default_rng(5)
        labels = (rng.uniform(size=40) > 0.5).astype(int)
        scores = np.round(rng.uniform(size=40), 1)
        fpr, tpr, _ = roc_curve(labels, scores)
        assert abs(np.trapezoid(tpr, fpr) - roc_auc(labels, scores)) < 1e-12
        assert fpr[0] == 0.0 and tpr[0] == 0.0
        assert fpr[-1] == 1.0 and tpr[-1] == 1.0
