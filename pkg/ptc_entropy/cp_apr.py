"""Poisson CP model fitting by alternating Poisson regression (CP-APR).

Multiplicative majorization-minimization updates maximize

    sum_i (t_i log m_i - m_i)

over non-negative Kruskal models. Only the nonzeros of the count tensor are
touched: the sum of m_i over all entries collapses to the total model mass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import ArgumentError, FitError, NumericalFailureError
from .tensor_core import (
    KruskalModel,
    Shape,
    SparseCountTensor,
    kruskal_entries,
    kruskal_total_mass,
    sort_components,
    validate_shape,
)

_log = logging.getLogger(__name__)


class FitConfig(BaseModel):
    """Knobs for :func:`fit`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rank: int = Field(default=1, ge=1, description="Number of rank-one components R")
    max_outer_iters: int = Field(default=200, ge=1)
    max_inner_iters: int = Field(default=10, ge=1, description="Multiplicative steps per mode")
    kkt_tol: float = Field(default=1e-4, gt=0, description="Stop when every mode's KKT violation is below")
    log_shift: float = Field(default=1e-10, gt=0, description="Guard inside logs and denominators")
    rng_seed: int = Field(default=0, description="Seed for the random initial factors")
    min_weight: float = Field(default=1e-300, gt=0, description="Floor for collapsed components")


@dataclass
class FitResult:
    """Outcome of a CP-APR fit."""

    model: KruskalModel
    loglik_trace: list[float] = field(default_factory=list)
    final_kkt_violation: float = float("inf")
    outer_iterations: int = 0
    converged: bool = False

    @property
    def final_loglik(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else float("nan")


def log_likelihood(model: KruskalModel, t: SparseCountTensor, log_shift: float = 1e-10) -> float:
    """Poisson log-likelihood sum_i (t_i log m_i - m_i), constant terms dropped.

    Args:
        model: Normalized Kruskal model
        t: Count tensor of the same shape
        log_shift: Added to m_i inside the log

    Returns:
        Log-likelihood value

    Raises:
        ArgumentError: If the shapes differ
    """
    if model.shape != t.shape:
        raise ArgumentError(f"Model shape {model.shape} != tensor shape {t.shape}")
    mass = kruskal_total_mass(model)
    if t.nnz == 0:
        return -mass
    m = kruskal_entries(model, t.subs)
    return float(np.dot(t.vals.astype(np.float64), np.log(m + log_shift)) - mass)


def init_model(shape: Shape, rank: int, seed: int, total_count: float = 1.0) -> KruskalModel:
    """Random normalized starting model.

    Factors are drawn from a seeded uniform(0, 1) generator mode by mode and
    normalized; every weight is total_count / rank so the initial mass
    matches the data.
    """
    shape = validate_shape(shape)
    if rank < 1:
        raise ArgumentError(f"Rank must be >= 1, got {rank}")
    rng = np.random.default_rng(seed)
    factors = []
    for n in shape:
        A = rng.uniform(0.0, 1.0, size=(n, rank))
        factors.append(A / A.sum(axis=0))
    weights = np.full(rank, float(total_count) / rank)
    return KruskalModel(weights, tuple(factors))


def _calculate_pi(factors: list[np.ndarray], subs: np.ndarray, mode: int) -> np.ndarray:
    """Row-wise Khatri-Rao product of every factor but ``mode``, on the support only."""
    pi = np.ones((subs.shape[0], factors[0].shape[1]))
    for k, A in enumerate(factors):
        if k != mode:
            pi *= A[subs[:, k]]
    return pi


def _calculate_phi(
    B: np.ndarray,
    pi: np.ndarray,
    rows: np.ndarray,
    vals: np.ndarray,
    eps: float,
) -> np.ndarray:
    """Phi = (X_(k) / (B Pi^T)) Pi evaluated over the nonzeros."""
    v = np.sum(B[rows] * pi, axis=1)
    w = vals / np.maximum(v, eps)
    phi = np.empty_like(B)
    for r in range(B.shape[1]):
        phi[:, r] = np.bincount(rows, weights=w * pi[:, r], minlength=B.shape[0])
    return phi


def fit(
    t: SparseCountTensor,
    config: FitConfig,
    init: KruskalModel | None = None,
) -> FitResult:
    """Fit a rank-R Poisson CP model to a count tensor.

    Each outer iteration visits every mode k: the weights are absorbed into
    factor k, then up to ``max_inner_iters`` multiplicative steps
    B <- B * Phi run until the mode's KKT violation max|min(B, 1 - Phi)|
    drops below ``kkt_tol``; finally the column sums are moved back into the
    weights. The fit has converged when an outer iteration needs no update.

    Args:
        t: Non-empty count tensor
        config: Fit configuration
        init: Optional starting model (default :func:`init_model`)

    Returns:
        FitResult with the normalized model, components sorted by weight

    Raises:
        FitError: If t has no nonzeros
        NumericalFailureError: If a factor becomes non-finite
    """
    if t.nnz == 0:
        raise FitError("Cannot fit a Poisson CP model to an empty count tensor")
    rank = config.rank
    if init is None:
        init = init_model(t.shape, rank, config.rng_seed, t.total)
    elif init.shape != t.shape or init.rank != rank:
        raise ArgumentError(
            f"Initial model has shape {init.shape} and rank {init.rank}; "
            f"expected {t.shape} and {rank}"
        )

    weights = np.array(init.weights, dtype=np.float64)
    factors = [np.array(A, dtype=np.float64) for A in init.factors]
    sums = [A.sum(axis=0) for A in factors]
    for k, s in enumerate(sums):
        factors[k] = factors[k] / np.where(s > 0, s, 1.0)
        weights = weights * s

    subs = t.subs
    vals = t.vals.astype(np.float64)
    eps = config.log_shift
    result = FitResult(model=init)
    kkt_mode = np.zeros(t.ndim)

    for outer in range(config.max_outer_iters):
        converged = True
        for k in range(t.ndim):
            B = factors[k] * weights
            pi = _calculate_pi(factors, subs, k)
            rows = subs[:, k]
            for _ in range(config.max_inner_iters):
                phi = _calculate_phi(B, pi, rows, vals, eps)
                kkt_mode[k] = float(np.max(np.abs(np.minimum(B, 1.0 - phi))))
                if kkt_mode[k] < config.kkt_tol:
                    break
                converged = False
                B = B * phi
            if not np.all(np.isfinite(B)):
                raise NumericalFailureError(
                    f"Non-finite factor entries in mode {k} at outer iteration {outer}",
                    iteration=outer,
                )
            colsum = B.sum(axis=0)
            collapsed = colsum < config.min_weight
            if np.any(collapsed):
                _log.debug("Components %s collapsed in mode %d", np.flatnonzero(collapsed).tolist(), k)
                B[:, collapsed] = 1.0
                colsum = np.where(collapsed, float(B.shape[0]), colsum)
            factors[k] = B / colsum
            weights = np.where(collapsed, config.min_weight, colsum)

        model = KruskalModel(weights, tuple(factors))
        result.loglik_trace.append(log_likelihood(model, t, eps))
        result.final_kkt_violation = float(kkt_mode.max())
        result.outer_iterations = outer + 1
        _log.debug(
            "CP-APR iter %d: loglik=%.10g kkt=%.3e",
            outer,
            result.loglik_trace[-1],
            result.final_kkt_violation,
        )
        if converged:
            result.converged = True
            break

    result.model = sort_components(KruskalModel(weights, tuple(factors)))
    _log.info(
        "CP-APR rank %d: %d outer iterations, converged=%s, loglik=%.6g, kkt=%.2e",
        rank,
        result.outer_iterations,
        result.converged,
        result.final_loglik,
        result.final_kkt_violation,
    )
    return result
