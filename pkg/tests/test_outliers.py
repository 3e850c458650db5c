"""Isolation forest: scores against a brute-force tree walker."""

import numpy as np
import pytest

from stackcast import ConfigurationError, FeatureFrame, IsolationForestDetector
from stackcast.outliers import average_path_length, isolation_forest_filter


def _frame(data):
    data = np.asarray(data, dtype=float)
    dates = np.datetime64("2020-01-01") + np.arange(data.shape[0])
    return FeatureFrame(dates, data, [f"f{j}" for j in range(data.shape[1])])


def walk_path_length(node, x):
    """Independent re-implementation of the path length computation."""
    depth = 0
    while node.feature is not None:
        node = node.left if x[node.feature] < node.threshold else node.right
        depth += 1
    return depth + average_path_length(node.size)


class TestDetector:
    def test_far_point_is_flagged(self):
        rng = np.random.default_rng(42)
        data = np.vstack([rng.normal(0.0, 0.5, (49, 3)), [[100.0, 100.0, 100.0]]])
        frame = _frame(data)
        corrected, flagged = isolation_forest_filter(
            frame, trees=50, contamination=0.02, seed=11
        )
        assert flagged == [49]
        # the flagged row was replaced by its neighbors' interpolation:
        # with the outlier last, that is a flat extension of row 48
        np.testing.assert_allclose(corrected.data[49], corrected.data[48])

    def test_scores_match_bruteforce_tree_walk(self):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(40, 4))
        det = IsolationForestDetector(trees=25, seed=3).fit(data)
        scores = det.score_samples(data)
        for i in (0, 7, 19, 39):
            paths = [walk_path_length(tree, data[i]) for tree in det.trees_]
            expected = 2.0 ** (-np.mean(paths) / average_path_length(det.subsample_))
            assert abs(scores[i] - expected) < 1e-12

    def test_no_variance_no_outliers(self):
        frame = _frame(np.ones((50, 2)))
        corrected, flagged = isolation_forest_filter(frame, contamination=0.0, seed=0)
        assert flagged == []
        np.testing.assert_array_equal(corrected.data, frame.data)

    def test_contamination_domain(self):
        frame = _frame(np.ones((10, 2)))
        with pytest.raises(ConfigurationError):
            isolation_forest_filter(frame, contamination=0.6)

    def test_subsample_exceeding_rows(self):
        with pytest.raises(ConfigurationError):
            IsolationForestDetector(trees=5, subsample=100, seed=0).fit(np.ones((10, 2)))

    def test_duplicated_point_scores_below_external_singleton(self):
        rng = np.random.default_rng(6)
        cloud = np.tile(rng.normal(0.0, 1.0, (1, 3)), (60, 1))
        cloud += rng.normal(0.0, 1e-3, cloud.shape)  # break exact ties
        outside = cloud.max(axis=0) + 10.0
        data = np.vstack([cloud, outside])
        det = IsolationForestDetector(trees=50, seed=9).fit(data)
        scores = det.score_samples(data)
        assert scores[:-1].max() <= scores[-1]

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(30, 3))
        s1 = IsolationForestDetector(trees=20, seed=5).fit(data).score_samples(data)
        s2 = IsolationForestDetector(trees=20, seed=5).fit(data).score_samples(data)
        np.testing.assert_array_equal(s1, s2)

    def test_average_path_length_values(self):
        assert average_path_length(1) == 0.0
        assert average_path_length(2) == 1.0
        # c(m) = 2 H(m-1) - 2 (m-1)/m with the ln+gamma harmonic form
        m = 256
        expected = 2.0 * (np.log(m - 1) + np.euler_gamma) - 2.0 * (m - 1) / m
        assert abs(average_path_length(m) - expected) < 1e-12
