"""Alternating closed-form training of projections and modality weights.

The trainer regresses kernel features of every modality onto the shared
binary target codes. Each iteration solves a ridge system per modality in
closed form, then rebalances the simplex-constrained modality weights
from the residual norms; both steps minimize their subproblem exactly, so
the objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .centers import HashCenterTable, assign_target_codes
from .exceptions import (
    DegenerateWeightError,
    InvalidParameterError,
    NumericalError,
    ShapeError,
)
from .kernel import AnchorSet, apply_kernel, select_anchors
from .packing import sign_to_pm1

# Residual norms are clamped here before normalizing, so an exact fit
# cannot zero out a weight.
RESIDUAL_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """Knobs of the offline training stage."""

    delta: float = 1e-3
    max_iters: int = 50
    rel_tol: float = 1e-5
    seed: int = 0
    num_anchors: int = 1000  # clamped to the training-set size
    kernel_width: float | None = None  # overrides the width heuristic

    def validate(self) -> None:
        if self.delta <= 0:
            raise InvalidParameterError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 1:
            raise InvalidParameterError(
                f"max_iters must be at least 1, got {self.max_iters}"
            )
        if self.rel_tol <= 0:
            raise InvalidParameterError(
                f"rel_tol must be positive, got {self.rel_tol}"
            )
        if self.num_anchors < 1:
            raise InvalidParameterError(
                f"num_anchors must be positive, got {self.num_anchors}"
            )


@dataclass
class TrainedModel:
    """Frozen output of :func:`fit`; treat as immutable after training."""

    projections: list[np.ndarray]  # per modality, (r, p)
    anchor_sets: list[AnchorSet]
    train_weights: np.ndarray  # (M,), positive, sums to 1
    delta: float
    code_length: int
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def num_modalities(self) -> int:
        return len(self.projections)


def objective(projections, weights, kernel_features, targets, delta) -> float:
    """Weighted ridge objective over all modalities.

    ``sum_m (1/w_m) ||T - W_m K_m||_F^2 + delta * sum_m ||W_m||_F^2`` with
    targets ``T``, kernel features ``K_m``, and weights ``w``.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w == 0):
        raise DegenerateWeightError("weights must be nonzero")
    t = np.asarray(targets, dtype=np.float64)
    total = 0.0
    for proj, weight, feats in zip(projections, w, kernel_features):
        resid = t - proj @ feats
        total += (resid * resid).sum() / weight + delta * (proj * proj).sum()
    return float(total)


def update_projection(targets, kernel_features, weight: float, delta: float) -> np.ndarray:
    """Closed-form ridge solve for one modality's projection.

    Solves ``W ((1/w) K K^T + delta I) = (1/w) T K^T`` through a Cholesky
    factorization; the system is symmetric positive definite for any
    ``delta > 0``, and no explicit inverse is formed.
    """
    if weight <= 0:
        raise InvalidParameterError(f"weight must be positive, got {weight}")
    if delta <= 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}")
    t = np.asarray(targets, dtype=np.float64)
    feats = np.asarray(kernel_features, dtype=np.float64)
    if t.ndim != 2 or feats.ndim != 2 or t.shape[1] != feats.shape[1]:
        raise ShapeError(
            f"targets {t.shape} and kernel features {feats.shape} disagree on samples"
        )
    p = feats.shape[0]
    gram = (feats @ feats.T) / weight
    gram.flat[:: p + 1] += delta
    rhs = (t @ feats.T) / weight
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NumericalError("ridge system is not positive definite") from exc
    return cho_solve(factor, rhs.T, check_finite=False).T


def update_weights(residual_norms) -> np.ndarray:
    """Simplex-optimal weights, proportional to the residual norms.

    Norms are clamped at ``RESIDUAL_FLOOR`` first, so an exact fit cannot
    produce a zero weight.
    """
    norms = np.maximum(np.asarray(residual_norms, dtype=np.float64), RESIDUAL_FLOOR)
    return norms / norms.sum()


def fit(features, labels, centers: HashCenterTable, config: TrainConfig | None = None) -> TrainedModel:
    """Run the alternating training loop against the center target codes.

    ``features`` is one ``(d_m, n)`` matrix per modality over the same n
    samples; ``labels`` one label set per sample. Weights start uniform;
    each iteration refits every projection, rebalances the weights, and
    appends the objective to the trace. Stops when the relative objective
    change drops below ``config.rel_tol`` or after ``config.max_iters``
    iterations. Deterministic for fixed inputs and seeds.
    """
    config = TrainConfig() if config is None else config
    config.validate()
    mats = [np.asarray(f, dtype=np.float64) for f in features]
    if not mats:
        raise InvalidParameterError("need at least one modality")
    for m, mat in enumerate(mats):
        if mat.ndim != 2:
            raise ShapeError(f"modality {m} is not a matrix: shape {mat.shape}")
    counts = {mat.shape[1] for mat in mats}
    if len(counts) != 1:
        raise ShapeError(f"modalities disagree on sample count: {sorted(counts)}")
    n = counts.pop()
    if n < 2:
        raise InvalidParameterError(f"need at least 2 training samples, got {n}")
    if len(labels) != n:
        raise ShapeError(f"{len(labels)} label sets for {n} samples")

    targets = assign_target_codes(centers, labels).astype(np.float64)
    num_anchors = min(config.num_anchors, n)
    anchor_sets = [
        select_anchors(
            mats[m],
            num_anchors,
            config.seed,
            modality_index=m,
            kernel_width=config.kernel_width,
        )
        for m in range(len(mats))
    ]
    kernel_features = [
        apply_kernel(mats[m], anchor_sets[m]) for m in range(len(mats))
    ]

    num_modalities = len(mats)
    weights = np.full(num_modalities, 1.0 / num_modalities)
    trace: list[float] = []
    converged = False
    projections: list[np.ndarray] = []
    for _ in range(config.max_iters):
        projections = [
            update_projection(targets, kernel_features[m], weights[m], config.delta)
            for m in range(num_modalities)
        ]
        norms = [
            float(np.linalg.norm(targets - projections[m] @ kernel_features[m]))
            for m in range(num_modalities)
        ]
        weights = update_weights(norms)
        value = objective(projections, weights, kernel_features, targets, config.delta)
        if trace and abs(trace[-1] - value) <= config.rel_tol * max(abs(trace[-1]), 1e-300):
            trace.append(value)
            converged = True
            break
        trace.append(value)

    return TrainedModel(
        projections=projections,
        anchor_sets=anchor_sets,
        train_weights=weights,
        delta=config.delta,
        code_length=centers.code_length,
        objective_trace=trace,
        converged=converged,
    )


def fuse_encode_fixed(model: TrainedModel, features) -> np.ndarray:
    """Sign of the training-weight-fused projection of full-modality data.

    This is the fixed-weight hash function: each modality contributes its
    projection scaled by the reciprocal of its training weight.
    """
    if len(features) != model.num_modalities:
        raise ShapeError(
            f"model has {model.num_modalities} modalities, got {len(features)}"
        )
    fused = None
    for m in range(model.num_modalities):
        kernel_features = apply_kernel(features[m], model.anchor_sets[m])
        term = (model.projections[m] @ kernel_features) / model.train_weights[m]
        fused = term if fused is None else fused + term
    return sign_to_pm1(fused)
