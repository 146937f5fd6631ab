"""Hash-center construction: Sylvester matrices, LSH re-dimensioning,
table audits, and per-sample target codes."""

import numpy as np
import pytest

from fusehash import (
    assign_target_codes,
    audit_centers,
    build_center_table,
    lsh_reduce,
    required_order,
    sylvester_hadamard,
)
from fusehash.centers import HashCenterTable
from fusehash.exceptions import InvalidParameterError, LabelError


def pairwise_distances(centers):
    """All column-pair Hamming distances, by direct comparison."""
    _, k = centers.shape
    return [
        int((centers[:, i] != centers[:, j]).sum())
        for i in range(k)
        for j in range(i + 1, k)
    ]


class TestSylvesterHadamard:
    def test_base_case(self):
        np.testing.assert_array_equal(sylvester_hadamard(1), [[1]])

    def test_one_doubling(self):
        np.testing.assert_array_equal(sylvester_hadamard(2), [[1, 1], [1, -1]])

    def test_recursive_block_structure(self):
        """Each doubling tiles [[H, H], [H, -H]]."""
        for order in (2, 4, 8, 16):
            half = sylvester_hadamard(order)
            full = sylvester_hadamard(2 * order)
            np.testing.assert_array_equal(full[:order, :order], half)
            np.testing.assert_array_equal(full[:order, order:], half)
            np.testing.assert_array_equal(full[order:, :order], half)
            np.testing.assert_array_equal(full[order:, order:], -half)

    def test_orthogonality(self):
        """H Ht = order * I, rows and columns alike."""
        for order in (1, 2, 4, 8, 32, 128):
            matrix = sylvester_hadamard(order)
            np.testing.assert_array_equal(matrix @ matrix.T, order * np.eye(order, dtype=np.int64))
            np.testing.assert_array_equal(matrix.T @ matrix, order * np.eye(order, dtype=np.int64))

    def test_column_pairs_at_half_order(self):
        matrix = sylvester_hadamard(4)
        assert pairwise_distances(matrix) == [2] * 6

    def test_rejects_non_powers_of_two(self):
        for order in (0, -4, 3, 12, 100):
            with pytest.raises(InvalidParameterError):
                sylvester_hadamard(order)


class TestRequiredOrder:
    def test_direct_cases(self):
        assert required_order(16, 10) == 16
        assert required_order(10, 10) == 16
        assert required_order(128, 81) == 128

    def test_smallest_power_covering_both(self):
        assert required_order(1, 1) == 1
        assert required_order(2, 5) == 8
        assert required_order(48, 20) == 64
        assert required_order(64, 65) == 128

    def test_rejects_non_positive(self):
        with pytest.raises(InvalidParameterError):
            required_order(0, 4)
        with pytest.raises(InvalidParameterError):
            required_order(8, 0)


class TestLshReduce:
    def test_deterministic_under_seed(self):
        matrix = sylvester_hadamard(32)
        np.testing.assert_array_equal(
            lsh_reduce(matrix, 20, seed=7), lsh_reduce(matrix, 20, seed=7)
        )

    def test_sign_codomain(self):
        column = sylvester_hadamard(16)[:, :1]
        out = lsh_reduce(column, 9, seed=0)
        assert out.shape == (9, 1)
        assert np.all(np.abs(out) == 1)

    def test_orthogonal_inputs_land_near_half_distance(self):
        """Sign projections of orthogonal vectors disagree per bit with
        probability theta/pi = 1/2, so the mean pairwise distance over
        seeds concentrates near r/2."""
        matrix = sylvester_hadamard(64)
        code_length = 64
        means = []
        for seed in range(20):
            reduced = lsh_reduce(matrix, code_length, seed=seed)
            means.append(np.mean(pairwise_distances(reduced)))
        mean = float(np.mean(means))
        assert 0.45 * code_length <= mean <= 0.55 * code_length

    def test_rejects_non_positive_length(self):
        with pytest.raises(InvalidParameterError):
            lsh_reduce(sylvester_hadamard(8), 0, seed=0)


class TestBuildCenterTable:
    def test_exact_order_uses_hadamard_columns(self):
        table = build_center_table(16, 10, seed=0)
        assert table.is_exact
        assert table.hadamard_order == 16
        np.testing.assert_array_equal(
            table.centers, sylvester_hadamard(16)[:, :10].astype(np.int8)
        )
        assert pairwise_distances(table.centers) == [8] * 45

    def test_redimensioned_table_passes_audit(self):
        table = build_center_table(48, 20, seed=0)
        assert not table.is_exact
        assert table.hadamard_order == 64
        audit = audit_centers(table)
        assert audit.passed
        assert audit.average_distance >= 0.45 * 48

    def test_deterministic(self):
        a = build_center_table(48, 20, seed=3)
        b = build_center_table(48, 20, seed=3)
        np.testing.assert_array_equal(a.centers, b.centers)
        assert a.seed == b.seed

    def test_requires_two_categories(self):
        with pytest.raises(InvalidParameterError):
            build_center_table(16, 1, seed=0)


class TestAuditCenters:
    def test_exact_threshold_is_half_length(self):
        table = build_center_table(8, 4, seed=0)
        audit = audit_centers(table)
        assert audit.threshold == 4.0
        assert audit.average_distance == 4.0
        assert audit.passed

    def test_failing_table_reports_distance(self):
        """A degenerate table with duplicated columns fails its audit."""
        centers = np.ones((8, 3), dtype=np.int8)
        table = HashCenterTable(
            code_length=8,
            num_categories=3,
            centers=centers,
            seed=0,
            hadamard_order=8,
            is_exact=False,
        )
        audit = audit_centers(table)
        assert audit.average_distance == 0.0
        assert not audit.passed


class TestAssignTargetCodes:
    def test_single_label_copies_center_column(self):
        table = build_center_table(16, 4, seed=0)
        labels = [{2}, {0}, {3}, {0}]
        codes = assign_target_codes(table, labels)
        assert codes.shape == (16, 4)
        for i, labs in enumerate(labels):
            np.testing.assert_array_equal(codes[:, i], table.centers[:, next(iter(labs))])

    def test_multi_label_is_sign_of_centroid(self):
        table = build_center_table(16, 4, seed=0)
        codes = assign_target_codes(table, [{0, 1, 2}])
        centroid = table.centers[:, [0, 1, 2]].mean(axis=1)
        np.testing.assert_array_equal(codes[:, 0], np.where(centroid >= 0, 1, -1))

    def test_centroid_ties_resolve_to_plus_one(self):
        """Two centers at distance r/2 average to zero wherever they differ."""
        table = build_center_table(16, 4, seed=0)
        codes = assign_target_codes(table, [{0, 1}])
        differ = table.centers[:, 0] != table.centers[:, 1]
        assert differ.sum() == 8
        np.testing.assert_array_equal(codes[differ, 0], np.ones(8, dtype=np.int8))
        agree = ~differ
        np.testing.assert_array_equal(codes[agree, 0], table.centers[agree, 0])

    def test_rejects_bad_labels(self):
        table = build_center_table(16, 4, seed=0)
        with pytest.raises(LabelError):
            assign_target_codes(table, [set()])
        with pytest.raises(LabelError):
            assign_target_codes(table, [{4}])
        with pytest.raises(LabelError):
            assign_target_codes(table, [{-1}])
