"""Retrieval evaluation: ranking, average precision, mAP."""

import numpy as np
import pytest

from fusehash import (
    average_precision,
    hamming_rank,
    mean_average_precision,
    precision_at_k,
    sign_to_pm1,
)
from fusehash.evaluation import format_report, report_key_values
from fusehash.exceptions import InvalidParameterError, LabelError, ShapeError


def naive_hamming(a, b):
    return int(np.sum(np.asarray(a) != np.asarray(b)))


def naive_average_precision(relevance, cutoff):
    """Literal transcription of the AP definition."""
    hits = 0
    total = 0.0
    for m in range(1, cutoff + 1):
        if relevance[m - 1]:
            hits += 1
            total += hits / m
    return total / hits if hits else 0.0


class TestHammingRank:
    def test_distances_match_bitwise_loop(self):
        rng = np.random.default_rng(0)
        db = sign_to_pm1(rng.standard_normal((13, 40)))
        query = sign_to_pm1(rng.standard_normal(13))
        ranked = hamming_rank(query, db)
        for t, j in enumerate(ranked.ranked_indices):
            assert ranked.distances[t] == naive_hamming(query, db[:, j])

    def test_exact_match_ranks_first_antipode_last(self):
        rng = np.random.default_rng(1)
        query = sign_to_pm1(rng.standard_normal(16))
        middle = query.copy()
        middle[:5] *= -1
        db = np.stack([-query, middle, query], axis=1)
        ranked = hamming_rank(query, db)
        np.testing.assert_array_equal(ranked.ranked_indices, [2, 1, 0])
        np.testing.assert_array_equal(ranked.distances, [0, 5, 16])

    def test_order_is_non_decreasing(self):
        rng = np.random.default_rng(2)
        db = sign_to_pm1(rng.standard_normal((8, 100)))
        query = sign_to_pm1(rng.standard_normal(8))
        ranked = hamming_rank(query, db)
        assert np.all(np.diff(ranked.distances) >= 0)

    def test_ties_break_by_database_position(self):
        query = np.array([1, 1, 1, 1], dtype=np.int8)
        flipped = query.copy()
        flipped[0] = -1
        other = query.copy()
        other[3] = -1
        db = np.stack([flipped, other, flipped.copy()], axis=1)  # all distance 1
        ranked = hamming_rank(query, db)
        np.testing.assert_array_equal(ranked.ranked_indices, [0, 1, 2])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ShapeError):
            hamming_rank(np.ones(4, dtype=np.int8), np.ones((5, 3), dtype=np.int8))


class TestAveragePrecision:
    def test_worked_example(self):
        """Hits at ranks 1 and 3 of a cutoff 3 give (1 + 2/3) / 2."""
        value = average_precision([1, 0, 1], cutoff=3)
        assert abs(value - (1.0 + 2.0 / 3.0) / 2.0) < 1e-12

    def test_all_relevant_is_one(self):
        assert average_precision([1, 1, 1, 1], cutoff=4) == 1.0

    def test_no_relevant_is_zero(self):
        assert average_precision([0, 0, 0], cutoff=3) == 0.0

    def test_relevance_outside_cutoff_ignored(self):
        assert average_precision([0, 0, 1], cutoff=2) == 0.0

    def test_matches_naive_on_random_vectors(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            relevance = rng.integers(0, 2, size=n)
            cutoff = int(rng.integers(1, n + 1))
            got = average_precision(relevance, cutoff)
            want = naive_average_precision(relevance, cutoff)
            assert abs(got - want) < 1e-12

    def test_rejects_bad_cutoffs(self):
        with pytest.raises(InvalidParameterError):
            average_precision([1, 0], cutoff=0)
        with pytest.raises(InvalidParameterError):
            average_precision([1, 0], cutoff=3)


class TestPrecisionAtK:
    def test_counts_fraction(self):
        assert precision_at_k([1, 0, 1, 0], k=4) == 0.5
        assert precision_at_k([1, 0, 1, 0], k=1) == 1.0

    def test_rejects_bad_k(self):
        with pytest.raises(InvalidParameterError):
            precision_at_k([1, 0], k=0)
        with pytest.raises(InvalidParameterError):
            precision_at_k([1, 0], k=5)


class TestMeanAveragePrecision:
    def separable_setup(self, rng, per_class=20):
        """Two classes whose codes agree within class and differ across."""
        a = sign_to_pm1(rng.standard_normal(16))
        b = -a
        db = np.stack([a] * per_class + [b] * per_class, axis=1)
        db_labels = [{0}] * per_class + [{1}] * per_class
        queries = np.stack([a, b], axis=1)
        query_labels = [{0}, {1}]
        return queries, query_labels, db, db_labels

    def test_separable_classes_score_one(self):
        rng = np.random.default_rng(4)
        queries, query_labels, db, db_labels = self.separable_setup(rng)
        report = mean_average_precision(queries, query_labels, db, db_labels)
        assert report.map == 1.0
        assert report.num_queries == 2
        assert report.cutoff == db.shape[1]

    def test_matches_naive_pipeline(self):
        """Five queries against a naive distance sort plus literal AP."""
        rng = np.random.default_rng(5)
        db = sign_to_pm1(rng.standard_normal((12, 30)))
        db_labels = [{int(rng.integers(0, 3))} for _ in range(30)]
        queries = sign_to_pm1(rng.standard_normal((12, 5)))
        query_labels = [{int(rng.integers(0, 3))} for _ in range(5)]
        cutoff = 20
        report = mean_average_precision(queries, query_labels, db, db_labels, cutoff=cutoff)
        aps = []
        for q in range(5):
            dists = [naive_hamming(queries[:, q], db[:, j]) for j in range(30)]
            order = sorted(range(30), key=lambda j: (dists[j], j))
            relevance = [int(bool(db_labels[j] & query_labels[q])) for j in order]
            aps.append(naive_average_precision(relevance, cutoff))
        assert abs(report.map - np.mean(aps)) < 1e-12
        np.testing.assert_allclose(report.per_query_ap, aps, atol=1e-12)

    def test_random_codes_score_near_half(self):
        """Unrelated codes on a two-class balanced database hover at 0.5."""
        rng = np.random.default_rng(6)
        db = sign_to_pm1(rng.standard_normal((16, 300)))
        db_labels = [{j % 2} for j in range(300)]
        queries = sign_to_pm1(rng.standard_normal((16, 50)))
        query_labels = [{q % 2} for q in range(50)]
        report = mean_average_precision(queries, query_labels, db, db_labels)
        assert abs(report.map - 0.5) < 0.05

    def test_multi_label_intersection_counts(self):
        rng = np.random.default_rng(7)
        code = sign_to_pm1(rng.standard_normal(8))
        db = np.stack([code, code], axis=1)
        report = mean_average_precision(
            code.reshape(-1, 1), [{0, 1}], db, [{1, 5}, {7}]
        )
        # only the first item shares a label; it ranks in the top two by tie
        assert report.map == pytest.approx(1.0)

    def test_query_with_no_relevant_items_scores_zero(self):
        rng = np.random.default_rng(8)
        code = sign_to_pm1(rng.standard_normal(8))
        report = mean_average_precision(
            code.reshape(-1, 1), [{9}], np.stack([code], axis=1), [{0}]
        )
        assert report.map == 0.0

    def test_rejects_empty_and_mismatched_inputs(self):
        code = np.ones((8, 1), dtype=np.int8)
        with pytest.raises(InvalidParameterError):
            mean_average_precision(np.ones((8, 0), dtype=np.int8), [], code, [{0}])
        with pytest.raises(InvalidParameterError):
            mean_average_precision(code, [{0}], np.ones((8, 0), dtype=np.int8), [])
        with pytest.raises(LabelError):
            mean_average_precision(code, [{0}, {1}], code, [{0}])
        with pytest.raises(ShapeError):
            mean_average_precision(np.ones((6, 1), dtype=np.int8), [{0}], code, [{0}])

    def test_rejects_negative_labels(self):
        code = np.ones((8, 1), dtype=np.int8)
        with pytest.raises(LabelError):
            mean_average_precision(code, [{-1}], code, [{0}])

    def test_rejects_out_of_range_cutoff(self):
        code = np.ones((8, 1), dtype=np.int8)
        with pytest.raises(InvalidParameterError):
            mean_average_precision(code, [{0}], code, [{0}], cutoff=2)


class TestReportText:
    def test_format_report_lines(self):
        rng = np.random.default_rng(9)
        queries, query_labels, db, db_labels = TestMeanAveragePrecision().separable_setup(rng)
        report = mean_average_precision(queries, query_labels, db, db_labels)
        text = format_report(report)
        lines = text.splitlines()
        assert lines[0].startswith("metric")
        assert "mAP" in lines[1] and "1.000000" in lines[1]
        assert str(report.cutoff) in lines[2]
        assert str(report.num_queries) in lines[3]

    def test_key_values_parse_back(self):
        rng = np.random.default_rng(10)
        queries, query_labels, db, db_labels = TestMeanAveragePrecision().separable_setup(rng)
        report = mean_average_precision(queries, query_labels, db, db_labels)
        pairs = dict(
            line.split(" ", 1) for line in report_key_values(report, per_query=True).splitlines()
        )
        assert float(pairs["map"]) == report.map
        assert int(pairs["cutoff"]) == report.cutoff
        assert int(pairs["num_queries"]) == report.num_queries
        assert float(pairs["ap[0]"]) == report.per_query_ap[0]
