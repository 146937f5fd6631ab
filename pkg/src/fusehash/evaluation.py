"""Retrieval evaluation: Hamming ranking, average precision, and mAP.

Distances are computed on packed bits with XOR + popcount, so they are
exact integers. Ranking ties are broken by ascending database index, which
makes every reported number reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameterError, LabelError, ShapeError
from .packing import pack_codes, packed_hamming


@dataclass
class RankedRetrieval:
    """Full ranking of one query against a code database."""

    query_code: np.ndarray  # (r,), entries in {-1, +1}
    ranked_indices: np.ndarray  # permutation of database indices
    distances: np.ndarray  # non-decreasing, aligned with ranked_indices


@dataclass
class EvalReport:
    map: float
    per_query_ap: np.ndarray
    cutoff: int
    num_queries: int


def hamming_rank(query, database) -> RankedRetrieval:
    """Rank database columns by Hamming distance from the query code."""
    query_code = np.asarray(query).reshape(-1)
    db = np.asarray(database)
    if db.ndim != 2 or db.shape[0] != query_code.shape[0]:
        raise ShapeError(
            f"query length {query_code.shape[0]} does not match database "
            f"shape {db.shape}"
        )
    packed_query = pack_codes(query_code.reshape(-1, 1))[:, 0]
    packed_db = pack_codes(db)
    distances = packed_hamming(packed_query, packed_db)
    order = np.argsort(distances, kind="stable")
    return RankedRetrieval(
        query_code=query_code.astype(np.int8),
        ranked_indices=order,
        distances=distances[order],
    )


def average_precision(relevance, cutoff: int) -> float:
    """Average precision of a ranked relevance vector over the top ``cutoff``.

    Sums precision-at-m over the relevant ranks m <= cutoff and divides by
    the number of relevant items in the top cutoff; no relevant item in the
    cutoff gives 0 by convention.
    """
    rel = np.asarray(relevance, dtype=np.float64).reshape(-1)
    if cutoff < 1:
        raise InvalidParameterError(f"cutoff must be at least 1, got {cutoff}")
    if cutoff > rel.shape[0]:
        raise InvalidParameterError(
            f"cutoff {cutoff} exceeds ranking length {rel.shape[0]}"
        )
    rel = rel[:cutoff]
    hits = np.cumsum(rel)
    found = hits[-1]
    if found == 0:
        return 0.0
    ranks = np.arange(1, cutoff + 1, dtype=np.float64)
    return float((hits / ranks * rel).sum() / found)


def precision_at_k(relevance, k: int) -> float:
    """Fraction of relevant items among the top k of a ranked relevance vector."""
    rel = np.asarray(relevance, dtype=np.float64).reshape(-1)
    if k < 1:
        raise InvalidParameterError(f"k must be at least 1, got {k}")
    if k > rel.shape[0]:
        raise InvalidParameterError(f"k {k} exceeds ranking length {rel.shape[0]}")
    return float(rel[:k].sum() / k)


def _label_matrix(label_sets, num_labels: int) -> np.ndarray:
    mat = np.zeros((num_labels, len(label_sets)), dtype=np.float64)
    for i, labels in enumerate(label_sets):
        for label in labels:
            mat[label, i] = 1.0
    return mat


def mean_average_precision(
    query_codes,
    query_labels,
    db_codes,
    db_labels,
    cutoff: int | None = None,
) -> EvalReport:
    """mAP of a query set against a code database.

    A database item counts as relevant when its label set intersects the
    query's. The cutoff defaults to the full database size.
    """
    q = np.asarray(query_codes)
    db = np.asarray(db_codes)
    if q.ndim != 2 or db.ndim != 2 or q.shape[0] != db.shape[0]:
        raise ShapeError(
            f"query codes {q.shape} and database codes {db.shape} disagree "
            "on code length"
        )
    num_queries = q.shape[1]
    num_db = db.shape[1]
    if num_queries == 0 or num_db == 0:
        raise InvalidParameterError("query set and database must be non-empty")
    if len(query_labels) != num_queries or len(db_labels) != num_db:
        raise LabelError(
            f"label counts ({len(query_labels)}, {len(db_labels)}) do not match "
            f"code counts ({num_queries}, {num_db})"
        )
    if cutoff is None:
        cutoff = num_db
    if cutoff < 1 or cutoff > num_db:
        raise InvalidParameterError(
            f"cutoff must be in [1, {num_db}], got {cutoff}"
        )

    all_labels = [label for labels in query_labels for label in labels]
    all_labels += [label for labels in db_labels for label in labels]
    if any(label < 0 for label in all_labels):
        raise LabelError("labels must be non-negative integers")
    num_labels = max(all_labels, default=0) + 1
    query_mat = _label_matrix(query_labels, num_labels)
    db_mat = _label_matrix(db_labels, num_labels)
    relevant = (query_mat.T @ db_mat) > 0  # (n_q, n_db) label-intersection test

    packed_q = pack_codes(q)
    packed_db = pack_codes(db)
    per_query = np.empty(num_queries)
    for i in range(num_queries):
        distances = packed_hamming(packed_q[:, i], packed_db)
        order = np.argsort(distances, kind="stable")
        per_query[i] = average_precision(relevant[i, order], cutoff)
    return EvalReport(
        map=float(per_query.mean()),
        per_query_ap=per_query,
        cutoff=cutoff,
        num_queries=num_queries,
    )


def format_report(report: EvalReport) -> str:
    """Small plain-text table of an evaluation report."""
    lines = [
        "metric            value",
        f"mAP               {report.map:.6f}",
        f"cutoff            {report.cutoff}",
        f"queries           {report.num_queries}",
    ]
    return "\n".join(lines)


def report_key_values(report: EvalReport, per_query: bool = False) -> str:
    """Machine-readable ``key value`` lines of an evaluation report."""
    lines = [
        f"map {report.map:.12g}",
        f"cutoff {report.cutoff}",
        f"num_queries {report.num_queries}",
    ]
    if per_query:
        for i, ap in enumerate(report.per_query_ap):
            lines.append(f"ap[{i}] {ap:.12g}")
    return "\n".join(lines)
