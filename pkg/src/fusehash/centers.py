"""Hash-center construction on Sylvester Hadamard matrices.

A center table fixes one {-1, +1} column per category. When the requested
code length is already a power of two no smaller than the category count,
Hadamard columns are used verbatim and every pair of centers sits at
Hamming distance exactly r/2. Otherwise the columns are re-dimensioned by
a seeded Gaussian sign projection and the resulting table is audited
against a relaxed average-distance bound, drawing fresh projections until
it passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CenterSeparationError, InvalidParameterError, LabelError
from .packing import sign_to_pm1

# Acceptance threshold for re-dimensioned tables as a fraction of the code
# length; exact tables must average r/2.
LSH_DISTANCE_FACTOR = 0.45

# Re-dimensioning attempts (seed incremented each time) before giving up.
MAX_LSH_RETRIES = 16


@dataclass(frozen=True)
class HashCenterTable:
    """One {-1, +1} center column per category.

    ``seed`` records the Gaussian draw used by the re-dimensioning step; it
    is kept even for exact tables where no randomness was consumed.
    """

    code_length: int
    num_categories: int
    centers: np.ndarray  # (code_length, num_categories) int8 over {-1, +1}
    seed: int
    hadamard_order: int  # the power-of-two order the table was built from
    is_exact: bool       # True when code_length == hadamard_order (no LSH step)


@dataclass(frozen=True)
class CenterAudit:
    """Pairwise-distance audit of a center table."""

    average_distance: float
    min_distance: int
    threshold: float
    passed: bool


def sylvester_hadamard(order: int) -> np.ndarray:
    """Canonical Sylvester Hadamard matrix of the given power-of-two order.

    Built by recursive doubling from ``[[1]]``. Entries are int64 so that
    orthogonality checks stay exact in integer arithmetic.
    """
    if order < 1 or order & (order - 1):
        raise InvalidParameterError(f"order must be a power of two, got {order}")
    mat = np.ones((1, 1), dtype=np.int64)
    while mat.shape[0] < order:
        mat = np.block([[mat, mat], [mat, -mat]])
    return mat


def required_order(code_length: int, num_categories: int) -> int:
    """Smallest power of two covering both the code length and the category count."""
    if code_length < 1:
        raise InvalidParameterError(f"code_length must be positive, got {code_length}")
    if num_categories < 1:
        raise InvalidParameterError(
            f"num_categories must be positive, got {num_categories}"
        )
    order = 1
    while order < code_length or order < num_categories:
        order *= 2
    return order


def lsh_reduce(matrix, code_length: int, seed: int) -> np.ndarray:
    """Re-dimension sign columns by a seeded Gaussian projection.

    Column ``i`` of the result is ``sign(P^T c_i)`` where ``P`` has i.i.d.
    standard-normal entries drawn from ``seed``; zeros map to +1. The
    formula works for any target length, shorter or longer than the input.
    """
    cols = np.asarray(matrix)
    if cols.ndim != 2:
        raise InvalidParameterError(f"expected a 2-d matrix, got shape {cols.shape}")
    if code_length < 1:
        raise InvalidParameterError(
            f"code_length must be positive, got {code_length}"
        )
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((cols.shape[0], code_length))
    return sign_to_pm1(projection.T @ cols)


def _pairwise_distances(centers) -> np.ndarray:
    # Distance between +-1 columns u, v is (r - u.v) / 2, exact in integers.
    cols = np.asarray(centers, dtype=np.int64)
    gram = cols.T @ cols
    dist = (cols.shape[0] - gram) // 2
    upper = np.triu_indices(dist.shape[0], k=1)
    return dist[upper]


def audit_centers(table: HashCenterTable) -> CenterAudit:
    """Average/minimum pairwise Hamming distance and the pass verdict.

    Exact tables must average at least r/2; re-dimensioned tables at least
    ``LSH_DISTANCE_FACTOR * r``.
    """
    if table.num_categories < 2:
        raise InvalidParameterError("auditing needs at least 2 centers")
    distances = _pairwise_distances(table.centers)
    threshold = (
        table.code_length / 2.0
        if table.is_exact
        else LSH_DISTANCE_FACTOR * table.code_length
    )
    average = float(distances.mean())
    return CenterAudit(
        average_distance=average,
        min_distance=int(distances.min()),
        threshold=threshold,
        passed=average >= threshold,
    )


def build_center_table(
    code_length: int, num_categories: int, seed: int = 0
) -> HashCenterTable:
    """Build and validate a center table for the requested code length.

    Takes the first ``num_categories`` columns of the Sylvester matrix of
    order ``required_order(code_length, num_categories)``. When the order
    already equals the code length the columns are used as-is; otherwise
    they are re-dimensioned with :func:`lsh_reduce`, retrying with
    incremented seeds up to ``MAX_LSH_RETRIES`` times until the audit
    passes. Deterministic: identical inputs give bit-identical tables.
    """
    if num_categories < 2:
        raise InvalidParameterError(
            f"need at least 2 categories, got {num_categories}"
        )
    order = required_order(code_length, num_categories)
    hadamard = sylvester_hadamard(order)
    if code_length == order:
        table = HashCenterTable(
            code_length=code_length,
            num_categories=num_categories,
            centers=hadamard[:, :num_categories].astype(np.int8),
            seed=seed,
            hadamard_order=order,
            is_exact=True,
        )
        if not audit_centers(table).passed:
            raise CenterSeparationError("exact Hadamard table failed its audit")
        return table

    best = -1.0
    for attempt in range(MAX_LSH_RETRIES):
        attempt_seed = seed + attempt
        reduced = lsh_reduce(hadamard, code_length, attempt_seed)
        table = HashCenterTable(
            code_length=code_length,
            num_categories=num_categories,
            centers=reduced[:, :num_categories],
            seed=attempt_seed,
            hadamard_order=order,
            is_exact=False,
        )
        audit = audit_centers(table)
        if audit.passed:
            return table
        best = max(best, audit.average_distance)
    raise CenterSeparationError(
        f"average center distance {best:.3f} stayed below "
        f"{LSH_DISTANCE_FACTOR * code_length:.3f} after {MAX_LSH_RETRIES} attempts",
        achieved=best,
    )


def assign_target_codes(table: HashCenterTable, labels) -> np.ndarray:
    """Per-sample target codes as an ``(r, n)`` int8 matrix.

    A single-label sample gets its category's center column verbatim; a
    multi-label sample gets the per-bit sign of the mean of its member
    centers, with zero ties mapped to +1.
    """
    centers = table.centers
    k = table.num_categories
    out = np.empty((table.code_length, len(labels)), dtype=np.int8)
    for i, label_set in enumerate(labels):
        idx = sorted(set(label_set))
        if not idx:
            raise LabelError(f"sample {i} has an empty label set")
        if idx[0] < 0 or idx[-1] >= k:
            raise LabelError(
                f"sample {i} has labels outside [0, {k}): {idx}"
            )
        if len(idx) == 1:
            out[:, i] = centers[:, idx[0]]
        else:
            out[:, i] = sign_to_pm1(centers[:, idx].mean(axis=1))
    return out
