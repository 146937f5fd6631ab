"""Anchor-based Gaussian kernel features, one map per modality.

Feature matrices are dense ``(d, n)`` arrays with one column per sample.
The kernel map replaces each sample by its Gaussian similarity to ``p``
anchors drawn from the training columns of the same modality, giving a
``(p, n)`` representation with entries in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import InvalidParameterError, ShapeError

# Cap on the anchor pairs used by the kernel-width heuristic.
MAX_WIDTH_PAIRS = 2000


@dataclass(frozen=True)
class AnchorSet:
    """Anchors of one modality plus the Gaussian width used with them."""

    anchors: np.ndarray  # (d, p), columns are anchor points
    kernel_width: float  # > 0
    modality_index: int = 0
    seed: int = 0


def select_anchors(
    features,
    num_anchors: int,
    seed: int,
    modality_index: int = 0,
    kernel_width: float | None = None,
) -> AnchorSet:
    """Draw anchors uniformly without replacement from the feature columns.

    The kernel width defaults to the mean pairwise Euclidean distance among
    the selected anchors, estimated from at most ``MAX_WIDTH_PAIRS`` pairs
    when the anchor count is large; pass ``kernel_width`` to override.
    Deterministic under a fixed seed.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ShapeError(f"expected a (d, n) feature matrix, got shape {feats.shape}")
    n = feats.shape[1]
    if num_anchors < 1:
        raise InvalidParameterError(f"num_anchors must be positive, got {num_anchors}")
    if num_anchors > n:
        raise InvalidParameterError(
            f"cannot draw {num_anchors} anchors from {n} samples"
        )
    rng = np.random.default_rng(seed)
    indices = rng.choice(n, size=num_anchors, replace=False)
    anchors = feats[:, indices].copy()
    if kernel_width is None:
        kernel_width = _mean_anchor_distance(anchors, rng)
    if kernel_width <= 0:
        raise InvalidParameterError(
            f"kernel_width must be positive, got {kernel_width}"
        )
    return AnchorSet(
        anchors=anchors,
        kernel_width=float(kernel_width),
        modality_index=modality_index,
        seed=seed,
    )


def _mean_anchor_distance(anchors, rng) -> float:
    p = anchors.shape[1]
    if p < 2:
        return 1.0
    if p * (p - 1) // 2 <= MAX_WIDTH_PAIRS:
        mean = float(pdist(anchors.T).mean())
    else:
        left = rng.integers(0, p, size=MAX_WIDTH_PAIRS)
        shift = rng.integers(1, p, size=MAX_WIDTH_PAIRS)
        right = (left + shift) % p  # shift >= 1 keeps left != right
        diffs = anchors[:, left] - anchors[:, right]
        mean = float(np.linalg.norm(diffs, axis=0).mean())
    return mean if mean > 0 else 1.0


def apply_kernel(features, anchor_set: AnchorSet) -> np.ndarray:
    """Gaussian kernel map: entry (j, i) = exp(-||x_i - a_j||^2 / (2 sigma^2))."""
    feats = np.asarray(features, dtype=np.float64)
    anchors = anchor_set.anchors
    if feats.ndim != 2 or feats.shape[0] != anchors.shape[0]:
        raise ShapeError(
            f"feature shape {feats.shape} does not match anchor dimensionality "
            f"{anchors.shape[0]}"
        )
    if anchor_set.kernel_width <= 0:
        raise InvalidParameterError(
            f"anchor set has non-positive kernel width {anchor_set.kernel_width}"
        )
    sq = (
        (anchors * anchors).sum(axis=0)[:, None]
        - 2.0 * (anchors.T @ feats)
        + (feats * feats).sum(axis=0)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)  # guard tiny negatives from cancellation
    return np.exp(-sq / (2.0 * anchor_set.kernel_width**2))
