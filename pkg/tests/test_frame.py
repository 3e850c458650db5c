"""Ingestion: CSV loading, imputation, labels, targets, splitting."""

import numpy as np
import pytest

from stackcast import (
    FeatureFrame,
    ImputationError,
    ParseError,
    SchemaError,
    SizeError,
    SplitSpec,
    chronological_split,
    interpolate_missing,
    load_csv,
    make_labels,
    make_regression_targets,
)
from stackcast.synthetic import make_hashrate_table

from helpers import HASHRATE_CSV


def _frame(values, columns=None, start="2020-01-01", target=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and (columns is None or len(columns) == 1):
        values = values.T
    n = values.shape[0]
    dates = np.datetime64(start) + np.arange(n)
    columns = columns or [f"c{j}" for j in range(values.shape[1])]
    return FeatureFrame(dates, values, columns, target)


class TestLoadCsv:
    def test_three_row_roundtrip(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("date,price\n2013-04-01,1.5\n2013-04-02,2.5\n2013-04-03,3.5\n")
        frame = load_csv(path)
        assert frame.n_rows == 3 and frame.n_cols == 1
        np.testing.assert_allclose(frame.data[:, 0], [1.5, 2.5, 3.5])

    def test_duplicate_date_names_the_date(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("date,x\n2013-04-01,1\n2013-04-01,2\n")
        with pytest.raises(SchemaError, match="2013-04-01"):
            load_csv(path)

    def test_bundled_hashrate_fixture_reads_back_exactly(self):
        frame = load_csv(HASHRATE_CSV)
        assert frame.n_cols == 20
        assert frame.n_rows == 100
        regenerated = make_hashrate_table(rows=100, seed=7)
        assert frame.columns == regenerated.columns
        np.testing.assert_array_equal(frame.dates, regenerated.dates)
        np.testing.assert_allclose(frame.data, regenerated.data, rtol=0, atol=0, equal_nan=True)

    def test_malformed_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,alpha,beta\n2013-04-01,1,2\n2013-04-02,1,oops\n")
        with pytest.raises(ParseError, match=r"line 3.*beta.*oops"):
            load_csv(path)

    def test_malformed_date_reports_line(self, tmp_path):
        path = tmp_path / "bad_date.csv"
        path.write_text("date,x\n2013-04-01,1\n04/02/2013,2\n")
        with pytest.raises(ParseError, match="line 3"):
            load_csv(path)

    def test_rows_sorted_by_date(self, tmp_path):
        path = tmp_path / "unsorted.csv"
        path.write_text("date,x\n2013-04-03,3\n2013-04-01,1\n2013-04-02,2\n")
        frame = load_csv(path)
        np.testing.assert_allclose(frame.data[:, 0], [1, 2, 3])

    def test_empty_cells_are_missing(self, tmp_path):
        path = tmp_path / "gaps.csv"
        path.write_text("date,x\n2013-04-01,1\n2013-04-02,\n2013-04-03,3\n")
        frame = load_csv(path)
        assert np.isnan(frame.data[1, 0])

    def test_schema_mismatch_rejected(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("date,x\n2013-04-01,1\n")
        with pytest.raises(SchemaError):
            load_csv(path, schema=["x", "y"])


class TestInterpolate:
    def test_midpoint(self):
        frame = _frame([1.0, np.nan, 3.0])
        out = interpolate_missing(frame)
        np.testing.assert_allclose(out.data[:, 0], [1.0, 2.0, 3.0])

    def test_flat_edges(self):
        frame = _frame([np.nan, 5.0, np.nan])
        out = interpolate_missing(frame)
        np.testing.assert_allclose(out.data[:, 0], [5.0, 5.0, 5.0])

    def test_two_interior_gaps(self):
        # hand solution of the linear fill between 0 and 6
        frame = _frame([0.0, np.nan, np.nan, 6.0])
        out = interpolate_missing(frame)
        np.testing.assert_allclose(out.data[:, 0], [0.0, 2.0, 4.0, 6.0])

    def test_idempotent_and_preserves_present(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=40)
        mask = rng.random(40) < 0.3
        mask[[0, -1]] = False
        gappy = values.copy()
        gappy[mask] = np.nan
        frame = _frame(gappy)
        once = interpolate_missing(frame)
        twice = interpolate_missing(once)
        np.testing.assert_array_equal(once.data, twice.data)
        np.testing.assert_array_equal(once.data[~mask, 0], values[~mask])

    def test_fully_missing_column_errors(self):
        frame = _frame([[np.nan, 1.0], [np.nan, 2.0], [np.nan, 3.0]], columns=["a", "b"])
        with pytest.raises(ImputationError, match="'a'"):
            interpolate_missing(frame)


class TestLabelsAndTargets:
    def test_up_move(self):
        assert make_labels(np.array([100.0, 101.0]), 1).tolist() == [1]

    def test_tie_is_zero(self):
        assert make_labels(np.array([100.0, 100.0]), 1).tolist() == [0]

    def test_two_day_horizon(self):
        assert make_labels(np.array([5.0, 4.0, 6.0]), 2).tolist() == [1]

    def test_too_short_errors(self):
        with pytest.raises(SizeError):
            make_labels(np.array([1.0, 2.0]), 2)

    def test_complementarity_under_negation(self):
        rng = np.random.default_rng(11)
        for h in (1, 3, 7):
            prices = rng.normal(size=60)
            base = make_labels(prices, h)
            flipped = make_labels(-prices, h)
            strict = prices[h:] != prices[:-h]
            np.testing.assert_array_equal(flipped[strict], 1 - base[strict])

    def test_targets_shift(self):
        prices = np.array([1.0, 2.0, 3.0])
        assert make_regression_targets(prices, 1).tolist() == [2.0, 3.0]
        assert make_regression_targets(prices, 2).tolist() == [3.0]
        with pytest.raises(SizeError):
            make_regression_targets(prices, 3)


class TestSplit:
    def test_fraction_arithmetic(self):
        frame = _frame(np.arange(10.0))
        train, test = chronological_split(frame, SplitSpec(train_fraction=0.8))
        assert train.n_rows == 8 and test.n_rows == 2

    def test_reference_interval_row_counts(self):
        # 1206 rows at the default fraction reproduce the published 964/242
        frame = _frame(np.arange(1206.0), start="2013-04-01")
        spec = SplitSpec(train_fraction=0.8, interval=("2013-04-01", str(frame.dates[-1])))
        train, test = chronological_split(frame, spec)
        assert train.n_rows == 964 and test.n_rows == 242

    def test_full_fraction_leaves_empty_test(self):
        frame = _frame(np.arange(10.0))
        with pytest.raises(SizeError):
            chronological_split(frame, SplitSpec(train_fraction=1.0))

    def test_split_is_chronological_and_lossless(self):
        frame = _frame(np.arange(25.0))
        train, test = chronological_split(frame, SplitSpec(train_fraction=0.6))
        assert train.dates.max() < test.dates.min()
        np.testing.assert_array_equal(
            np.concatenate([train.data, test.data]), frame.data
        )
        np.testing.assert_array_equal(
            np.concatenate([train.dates, test.dates]), frame.dates
        )

    def test_named_interval_clips(self):
        frame = _frame(np.arange(2000.0), start="2013-01-01")
        train, test = chronological_split(frame, SplitSpec(interval="I"))
        clipped = 1097  # 2013-04-01 through 2016-04-01 inclusive
        assert train.n_rows + test.n_rows == clipped
        assert str(train.dates[0]) == "2013-04-01"
