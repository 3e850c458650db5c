"""CART forest, impurity-importance arithmetic and the three selectors."""

import numpy as np
import pytest

from stackcast import (
    Chi2Selector,
    ConfigurationError,
    ContingencyTable,
    FeatureFrame,
    RandomForest,
    TreeNode,
    chi2_scores,
    chi2_statistic,
    embedded_select,
    forest_importance,
    rfe,
    tree_importance,
)


def _frame(data, columns=None, target=None):
    data = np.asarray(data, dtype=float)
    dates = np.datetime64("2020-01-01") + np.arange(data.shape[0])
    columns = columns or [f"f{j}" for j in range(data.shape[1])]
    return FeatureFrame(dates, data, columns, target)


class TestForest:
    def test_fits_identity_relationship(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, size=(120, 1))
        y = x[:, 0]
        forest = RandomForest(trees=20, max_depth=8, seed=1).fit(x, y)
        pred = forest.predict(x)
        ss_res = np.sum((pred - y) ** 2)
        ss_tot = np.sum((y - y.mean()) ** 2)
        assert 1.0 - ss_res / ss_tot > 0.9

    def test_pure_node_never_splits(self):
        x = np.arange(10.0).reshape(-1, 1)
        y = np.ones(10)
        forest = RandomForest(trees=5, seed=0).fit(x, y)
        assert all(root.is_leaf for root in forest.trees_)
        assert all(root.impurity == 0.0 for root in forest.trees_)

    def test_equal_seeds_give_identical_forests(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(60, 4))
        y = (x[:, 0] > 0).astype(float)
        a = RandomForest(trees=10, max_depth=4, seed=7).fit(x, y)
        b = RandomForest(trees=10, max_depth=4, seed=7).fit(x, y)
        np.testing.assert_array_equal(a.predict(x), b.predict(x))
        np.testing.assert_array_equal(
            forest_importance(a), forest_importance(b)
        )

    def test_zero_features_is_configuration_error(self):
        with pytest.raises(ConfigurationError):
            RandomForest().fit(np.empty((5, 0)), np.ones(5))

    def test_classification_task_inferred(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 2))
        y = (x[:, 0] > 0).astype(float)
        forest = RandomForest(trees=5, seed=0).fit(x, y)
        assert forest.task_ == "classification"


class TestImportance:
    def test_single_split_tree_gets_all_importance(self):
        root = TreeNode(weight=1.0, impurity=0.5, value=0.5, n_samples=10,
                        feature=0, threshold=0.0,
                        left=TreeNode(0.5, 0.0, 0.0, 5),
                        right=TreeNode(0.5, 0.0, 1.0, 5))
        scores = tree_importance(root, n_features=3)
        np.testing.assert_allclose(scores, [1.0, 0.0, 0.0])

    def test_hand_built_node_importance(self):
        # w = (1, 0.5, 0.5), C = (0.5, 0, 0): ni_root = 1*0.5 - 0 - 0 = 0.5
        root = TreeNode(weight=1.0, impurity=0.5, value=0.0, n_samples=8,
                        feature=1, threshold=2.0,
                        left=TreeNode(0.5, 0.0, -1.0, 4),
                        right=TreeNode(0.5, 0.0, 1.0, 4))
        scores = tree_importance(root, n_features=2)
        np.testing.assert_allclose(scores, [0.0, 1.0])

    def test_forest_scores_sum_to_one(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(80, 5))
        y = x @ np.array([2.0, 0.0, 0.5, 0.0, 0.0]) + rng.normal(0, 0.1, 80)
        forest = RandomForest(trees=30, max_depth=5, seed=2).fit(x, y)
        scores = forest_importance(forest)
        assert abs(scores.sum() - 1.0) < 1e-9
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0)

    def test_informative_feature_is_argmax(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(100, 5))
        y = x[:, 1] + 0.01 * rng.normal(size=100)
        forest = RandomForest(trees=30, max_depth=6, seed=3).fit(x, y)
        assert int(np.argmax(forest_importance(forest))) == 1

    def test_stump_forest_warns_uniform(self):
        x = np.ones((10, 4))
        y = np.ones(10)
        forest = RandomForest(trees=5, seed=0).fit(x, y)
        with pytest.warns(UserWarning, match="no tree"):
            scores = forest_importance(forest)
        np.testing.assert_allclose(scores, 0.25)


def brute_force_chi2(counts):
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    total = 0.0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            expected = counts[i].sum() * counts[:, j].sum() / n
            if expected > 0:
                total += (counts[i, j] - expected) ** 2 / expected
    return total


class TestChi2:
    def test_identity_feature_scores_twenty(self):
        labels = np.array([0] * 10 + [1] * 10)
        x = labels.astype(float).reshape(-1, 1)
        scores = chi2_scores(x, labels, bins=2)
        assert abs(scores[0] - 20.0) < 1e-12

    def test_reference_contingency_statistic(self):
        assert chi2_statistic(ContingencyTable(np.array([[10, 0], [0, 10]]))) == 20.0

    def test_random_contingencies_match_bruteforce(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            counts = rng.integers(0, 12, size=(rng.integers(2, 6), 2)).astype(float)
            if counts.sum() == 0:
                continue
            mine = chi2_statistic(ContingencyTable(counts))
            assert abs(mine - brute_force_chi2(counts)) < 1e-12

    def test_independent_feature_scores_below_identical(self):
        rng = np.random.default_rng(8)
        labels = np.array([0, 1] * 25)
        x = np.column_stack([labels.astype(float), rng.uniform(size=50)])
        scores = chi2_scores(x, labels, bins=2)
        assert scores[1] < scores[0]

    def test_constant_feature_warns_zero(self):
        labels = np.array([0, 1] * 5)
        with pytest.warns(UserWarning, match="constant"):
            scores = chi2_scores(np.ones((10, 1)), labels)
        assert scores[0] == 0.0

    def test_boundary_values_go_to_lower_bin(self):
        # values exactly on the midpoint edge land in the lower bin
        x = np.array([0.0, 0.5, 1.0]).reshape(-1, 1)
        labels = np.array([0, 0, 1])
        scores = chi2_scores(x, labels, bins=2)
        # contingency: bin0 holds {0.0, 0.5} (labels 0,0), bin1 holds {1.0}
        expected = brute_force_chi2(np.array([[2, 0], [0, 1]]))
        assert abs(scores[0] - expected) < 1e-12

    def test_affine_transform_invariance(self):
        rng = np.random.default_rng(9)
        labels = (rng.uniform(size=60) > 0.5).astype(int)
        x = rng.normal(size=(60, 3))
        base = chi2_scores(x, labels, bins=6)
        transformed = chi2_scores(3.5 * x + 11.0, labels, bins=6)
        np.testing.assert_allclose(base, transformed, atol=1e-9)


def _selection_fixture(seed=10, n=150):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    c = rng.normal(size=n)
    y = 3.0 * a + 1.0 * b + 0.05 * rng.normal(size=n)
    frame = _frame(np.column_stack([a, b, c]), ["A", "B", "C"])
    return frame, y


class TestRfe:
    def test_keep_all_is_identity(self):
        frame, y = _selection_fixture()
        result = rfe(frame, y, k=3, seed=0)
        assert result.selected == ["A", "B", "C"]

    def test_separable_fixture_keeps_top_two(self):
        frame, y = _selection_fixture()
        result = rfe(frame, y, k=2, trees=40, seed=1)
        assert set(result.selected) == {"A", "B"}

    def test_k_zero_rejected(self):
        frame, y = _selection_fixture()
        with pytest.raises(ConfigurationError):
            rfe(frame, y, k=0)

    def test_k_above_features_rejected(self):
        frame, y = _selection_fixture()
        with pytest.raises(ConfigurationError):
            rfe(frame, y, k=4)

    def test_single_step_removes_initial_argmin(self):
        frame, y = _selection_fixture(seed=11)
        forest = RandomForest(trees=40, max_depth=6, min_leaf=2, seed=12)
        forest.fit(frame.data, y)
        weakest = frame.columns[int(np.argmin(forest_importance(forest)))]
        result = rfe(frame, y, k=2, step=1, trees=40, max_depth=6, min_leaf=2, seed=12)
        # one elimination round: the dropped feature ranks 2, the rest 1
        dropped = [name for name, rank in result.scores.items() if rank == 2.0]
        assert dropped == [weakest]
        assert weakest not in result.selected


class TestEmbedded:
    def test_duplicate_column_pruned(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=100)
        y = a + 0.01 * rng.normal(size=100)
        frame = _frame(np.column_stack([a, a, rng.normal(size=100)]), ["A", "A2", "C"])
        result = embedded_select(frame, y, k=2, corr_cap=0.9, trees=30, seed=2)
        assert not {"A", "A2"} <= set(result.selected)

    def test_cap_one_equals_pure_topk(self):
        frame, y = _selection_fixture(seed=13)
        capped = embedded_select(frame, y, k=2, corr_cap=1.0, trees=30, seed=3)
        forest = RandomForest(trees=30, max_depth=6, min_leaf=2, seed=3).fit(frame.data, y)
        order = np.argsort(-forest_importance(forest), kind="stable")[:2]
        assert capped.selected == [frame.columns[i] for i in order]

    def test_orthogonal_features_equal_topk(self):
        rng = np.random.default_rng(14)
        q, _ = np.linalg.qr(rng.normal(size=(120, 4)))
        x = q - q.mean(axis=0)
        y = 2.0 * x[:, 0] + x[:, 3] + 0.01 * rng.normal(size=120)
        frame = _frame(x, ["A", "B", "C", "D"])
        pruned = embedded_select(frame, y, k=2, corr_cap=0.5, trees=30, seed=4)
        plain = embedded_select(frame, y, k=2, corr_cap=1.0, trees=30, seed=4)
        assert pruned.selected == plain.selected

    def test_too_few_survivors_warns(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=80)
        y = a + 0.01 * rng.normal(size=80)
        frame = _frame(np.column_stack([a, a + 1e-12]), ["A", "A2"])
        with pytest.warns(UserWarning, match="pruning"):
            result = embedded_select(frame, y, k=2, corr_cap=0.9, trees=20, seed=5)
        assert len(result.selected) == 1

    def test_corr_cap_domain(self):
        frame, y = _selection_fixture()
        with pytest.raises(ConfigurationError):
            embedded_select(frame, y, k=2, corr_cap=0.0)


class TestSelectorEstimators:
    def test_chi2_selector_transform_keeps_target(self):
        rng = np.random.default_rng(16)
        labels = (rng.uniform(size=60) > 0.5).astype(int)
        data = np.column_stack(
            [labels + rng.normal(0, 0.1, 60), rng.normal(size=60), rng.normal(size=60)]
        )
        frame = _frame(data, ["signal", "noise", "close"], target="close")
        sel = Chi2Selector(k=1, bins=4).fit(frame, labels)
        out = sel.transform(frame)
        assert out.columns == ["signal", "close"]
        assert sel.result_.method == "chi2"

    def test_selectors_deterministic(self):
        frame, y = _selection_fixture(seed=17)
        r1 = rfe(frame, y, k=2, seed=6)
        r2 = rfe(frame, y, k=2, seed=6)
        assert r1.selected == r2.selected and r1.scores == r2.scores
