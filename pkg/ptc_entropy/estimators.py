"""PTC density, plug-in expectations and entropy estimators.

The PTC density is the fitted Poisson CP model normalized by its mass and
spread uniformly over each bin:

    p(x) = m_j / (||M||_1 * |B_j|)   for x in B_j,   0 off the box.

Entropies are in nats. Bin enumeration walks linear indices in increasing
order in fixed-size chunks, so every sum is accumulated in the same order no
matter which entry point computes it.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterator, Literal, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln

from .errors import ArgumentError, CapacityError, NumericalFailureError
from .histogram import BinningGrid, as_samples, bin_point
from .tensor_core import (
    KruskalModel,
    MultiIndex,
    delinearize_many,
    kruskal_entries,
    kruskal_entry,
    kruskal_total_mass,
)

if TYPE_CHECKING:
    from .samplers import DistributionSpec

_log = logging.getLogger(__name__)

DEFAULT_ENUMERATION_BUDGET = 10**8
KNN_DISTANCE_FLOOR = 1e-12
_CHUNK = 1 << 18

TiePolicy = Literal["floor", "jitter", "raise"]


@dataclass(frozen=True, eq=False)
class PtcDensity:
    """Normalized Kruskal model over a binning grid."""

    model: KruskalModel
    grid: BinningGrid
    total_mass: float

    def __post_init__(self):
        if self.model.shape != self.grid.shape:
            raise ArgumentError(f"Model shape {self.model.shape} != grid shape {self.grid.shape}")
        if not self.total_mass > 0:
            raise ArgumentError("A PTC density needs positive model mass")

    @classmethod
    def from_model(cls, model: KruskalModel, grid: BinningGrid) -> PtcDensity:
        return cls(model, grid, kruskal_total_mass(model))


@dataclass(frozen=True)
class ThresholdReport:
    """Result of a pruned PTC entropy evaluation."""

    tau: float | None
    retained_terms: int
    total_terms: int
    retained_mass_fraction: float
    entropy_estimate: float
    retained_bins: int = 0
    first_order_terms: int = 0
    pruned_everything: bool = False
    top_t: int | None = None


def _check_budget(required: int, budget: int, what: str) -> None:
    if required > budget:
        raise CapacityError(
            f"{what} needs {required:,} terms, above the enumeration budget of {budget:,}; "
            "use a threshold (--tau), top-t pruning (--top-t) or Monte-Carlo evaluation (--mc-draws)",
            required=required,
            budget=budget,
        )


def _linear_chunks(linear: np.ndarray | int) -> Iterator[np.ndarray]:
    if isinstance(linear, (int, np.integer)):
        for start in range(0, int(linear), _CHUNK):
            yield np.arange(start, min(int(linear), start + _CHUNK), dtype=np.int64)
    else:
        for start in range(0, linear.shape[0], _CHUNK):
            yield linear[start : start + _CHUNK]


def _entropy_terms(m: np.ndarray, vol: np.ndarray, mass: float) -> float:
    q = m / mass
    pos = q > 0
    return float(-np.sum(q[pos] * np.log(q[pos] / vol[pos])))


def ptc_density_eval(p: PtcDensity, x: Sequence[float]) -> float:
    """PTC density at x; zero outside the grid box."""
    index = bin_point(p.grid, x)
    if index is None:
        return 0.0
    return kruskal_entry(p.model, index) / (p.total_mass * p.grid.volume(index))


def plug_in_expectation(
    p: PtcDensity,
    fbar: Mapping[MultiIndex, float] | Callable[[np.ndarray], np.ndarray],
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> float:
    """Plug-in expectation (1/||M||_1) * sum_j m_j * fbar_j.

    Args:
        p: PTC density
        fbar: Bin averages of f, either a ``{multi_index: value}`` mapping or
            a vectorized callable taking an (m, d) array of multi-indices
        budget: Maximum number of bins to enumerate

    Returns:
        Expected value of f under the PTC density

    Raises:
        ArgumentError: If fbar lacks a bin with positive model mass
        CapacityError: If the grid has more bins than budget
    """
    shape = p.grid.shape
    _check_budget(p.grid.size, budget, "Plug-in expectation")
    total = 0.0
    for linear in _linear_chunks(p.grid.size):
        subs = delinearize_many(linear, shape)
        m = kruskal_entries(p.model, subs)
        need = m > 0
        if not np.any(need):
            continue
        if callable(fbar):
            values = np.asarray(fbar(subs[need]), dtype=np.float64)
        else:
            values = np.empty(int(need.sum()))
            for pos, row in enumerate(subs[need]):
                key = tuple(int(c) for c in row)
                if key not in fbar:
                    raise ArgumentError(f"No bin average supplied for bin {key}")
                values[pos] = fbar[key]
        total += float(np.sum(m[need] * values))
    return total / p.total_mass


def ptc_entropy(p: PtcDensity, budget: int = DEFAULT_ENUMERATION_BUDGET) -> float:
    """PTC differential entropy by full enumeration of the n bins.

    Raises:
        CapacityError: If n exceeds budget
    """
    _check_budget(p.grid.size, budget, "Full PTC entropy")
    entropy = 0.0
    for linear in _linear_chunks(p.grid.size):
        subs = delinearize_many(linear, p.grid.shape)
        entropy += _entropy_terms(kruskal_entries(p.model, subs), p.grid.volumes(subs), p.total_mass)
    return entropy


def _box_linear_indices(keep: list[np.ndarray], strides: list[int]) -> np.ndarray:
    linear = np.zeros(1, dtype=np.int64)
    for idx, stride in zip(keep, strides):
        linear = np.add.outer(idx.astype(np.int64) * stride, linear).reshape(-1)
    return linear


def _pruned_entropy(
    p: PtcDensity,
    keep: list[list[np.ndarray]],
    budget: int,
) -> tuple[float, int, int, float]:
    """Entropy sum over the union of per-component retained boxes.

    ``keep[r][k]`` lists the mode-k indices component r retains. A bin's
    model value only sums the components that retain it, and the sum over
    components happens before the log.
    """
    model, grid = p.model, p.grid
    shape = grid.shape
    n = grid.size
    retained_terms = sum(math.prod(len(idx) for idx in keep[r]) for r in range(model.rank))
    _check_budget(retained_terms, budget, "Thresholded PTC entropy")

    strides = [math.prod(shape[:k]) for k in range(len(shape))]
    full = any(all(len(idx) == nk for idx, nk in zip(keep[r], shape)) for r in range(model.rank))
    if full:
        union: np.ndarray | int = n
        retained_bins = n
    else:
        boxes = [
            _box_linear_indices(keep[r], strides)
            for r in range(model.rank)
            if all(len(idx) for idx in keep[r])
        ]
        union = np.unique(np.concatenate(boxes)) if boxes else np.zeros(0, dtype=np.int64)
        retained_bins = int(union.shape[0])
    if retained_bins == 0:
        return 0.0, 0, 0, 0.0

    member = []
    for k, nk in enumerate(shape):
        table = np.zeros((nk, model.rank), dtype=bool)
        for r in range(model.rank):
            table[keep[r][k], r] = True
        member.append(table)

    entropy = 0.0
    mass = 0.0
    for linear in _linear_chunks(union):
        subs = delinearize_many(linear, shape)
        terms = np.broadcast_to(model.weights, (subs.shape[0], model.rank)).copy()
        retained = np.ones(terms.shape, dtype=bool)
        for k, A in enumerate(model.factors):
            terms *= A[subs[:, k]]
            retained &= member[k][subs[:, k]]
        m = np.where(retained, terms, 0.0).sum(axis=1)
        entropy += _entropy_terms(m, grid.volumes(subs), p.total_mass)
        mass += float(m.sum())
    return entropy, retained_terms, retained_bins, mass / p.total_mass


def _first_order_terms(p: PtcDensity, keep: list[list[np.ndarray]]) -> int:
    n = p.grid.size
    dropped = sum(
        (nk - len(keep[r][k])) * (n // nk)
        for r in range(p.model.rank)
        for k, nk in enumerate(p.grid.shape)
    )
    # overlapping dropped slabs are subtracted more than once
    return max(0, p.model.rank * n - dropped)


def ptc_entropy_thresholded(
    p: PtcDensity,
    tau: float,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> ThresholdReport:
    """PTC entropy restricted to factor entries >= tau.

    Component r keeps only multi-indices whose every coordinate has factor
    entry a_r^(k)[i_k] >= tau. ``retained_terms`` counts the rank-one
    entries kept (exact, per-component boxes); ``first_order_terms`` is the
    uncorrected R*n - sum |Omega_{r,k}| * n / n_k count, floored at 0 since
    slabs dropped in several modes are subtracted once per mode.

    Raises:
        ArgumentError: If tau is outside [0, 1)
    """
    if not 0 <= tau < 1:
        raise ArgumentError(f"tau must lie in [0, 1), got {tau}")
    keep = [
        [np.flatnonzero(A[:, r] >= tau) for A in p.model.factors]
        for r in range(p.model.rank)
    ]
    entropy, terms, bins, fraction = _pruned_entropy(p, keep, budget)
    return ThresholdReport(
        tau=float(tau),
        retained_terms=terms,
        total_terms=p.model.rank * p.grid.size,
        retained_mass_fraction=fraction,
        entropy_estimate=entropy,
        retained_bins=bins,
        first_order_terms=_first_order_terms(p, keep),
        pruned_everything=terms == 0,
    )


def ptc_entropy_top_t(
    p: PtcDensity,
    t: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> ThresholdReport:
    """PTC entropy over combinations of the t largest entries of each factor column."""
    if t < 1:
        raise ArgumentError(f"t must be >= 1, got {t}")
    keep = [
        [np.sort(np.argsort(-A[:, r], kind="stable")[:t]) for A in p.model.factors]
        for r in range(p.model.rank)
    ]
    entropy, terms, bins, fraction = _pruned_entropy(p, keep, budget)
    return ThresholdReport(
        tau=None,
        retained_terms=terms,
        total_terms=p.model.rank * p.grid.size,
        retained_mass_fraction=fraction,
        entropy_estimate=entropy,
        retained_bins=bins,
        first_order_terms=_first_order_terms(p, keep),
        pruned_everything=terms == 0,
        top_t=int(t),
    )


def ptc_entropy_mc(p: PtcDensity, draws: int, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo PTC entropy: mean of -log p over bins drawn from the model.

    Args:
        p: PTC density
        draws: Number of bins to draw
        seed: RNG seed

    Returns:
        Tuple of (estimate, standard error)
    """
    if draws < 2:
        raise ArgumentError(f"Need at least two draws, got {draws}")
    model = p.model
    rng = np.random.default_rng(seed)
    components = rng.choice(model.rank, size=draws, p=model.weights / model.weights.sum())
    subs = np.empty((draws, model.ndim), dtype=np.int64)
    for r in range(model.rank):
        rows = np.flatnonzero(components == r)
        if rows.size == 0:
            continue
        for k, A in enumerate(model.factors):
            col = A[:, r] / A[:, r].sum()
            subs[rows, k] = rng.choice(A.shape[0], size=rows.size, p=col)
    m = kruskal_entries(model, subs)
    values = -np.log(m / (p.total_mass * p.grid.volumes(subs)))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(draws))


def model_zero_fraction(
    p: PtcDensity,
    relative: float = 1e-12,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> float:
    """Fraction of model entries below relative * ||M||_1."""
    _check_budget(p.grid.size, budget, "Model sparsity scan")
    small = 0
    for linear in _linear_chunks(p.grid.size):
        subs = delinearize_many(linear, p.grid.shape)
        small += int(np.count_nonzero(kruskal_entries(p.model, subs) < relative * p.total_mass))
    return small / p.grid.size


def knn_entropy(
    samples,
    k: int,
    tie_policy: TiePolicy = "floor",
    floor: float = KNN_DISTANCE_FLOOR,
    seed: int = 0,
) -> float:
    """Kozachenko-Leonenko k-nearest-neighbor entropy in nats.

    psi(s) - psi(k) + log V_d + (d/s) sum_i log rho_k(i), with rho_k(i) the
    Euclidean distance from sample i to its k-th neighbor (itself excluded)
    and V_d the volume of the unit d-ball.

    Args:
        samples: (s, d) matrix
        k: Neighbor order, 1 <= k < s
        tie_policy: ``floor`` clamps distances below ``floor``; ``jitter``
            adds seeded noise of relative size 1e-10 first; ``raise`` rejects
            zero distances
        floor: Smallest distance allowed into the log
        seed: Seed for the jitter noise

    Raises:
        ArgumentError: If k is not in [1, s)
        NumericalFailureError: On a zero distance under ``raise``
    """
    x = as_samples(samples)
    s, d = x.shape
    if not 1 <= k < s:
        raise ArgumentError(f"k must satisfy 1 <= k < s (k={k}, s={s})")
    if tie_policy == "jitter":
        scale = max(1.0, float(np.max(np.abs(x))))
        x = x + 1e-10 * scale * np.random.default_rng(seed).random(x.shape)
    dist, _ = cKDTree(x).query(x, k=k + 1)
    rho = dist[:, k]
    small = rho < floor
    if np.any(small):
        if tie_policy == "raise":
            raise NumericalFailureError(
                f"{int(small.sum())} samples have a zero distance to their {k}-th neighbor"
            )
        _log.warning("Floored %d k-NN distances below %.1e", int(small.sum()), floor)
        rho = np.maximum(rho, floor)
    log_unit_ball = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0)
    return float(digamma(s) - digamma(k) + log_unit_ball + d * np.mean(np.log(rho)))


def gaussian_entropy(sigma) -> float:
    """Entropy of N(mu, Sigma): d/2 log(2 pi e) + 1/2 log det Sigma.

    Raises:
        ArgumentError: If Sigma is not symmetric positive definite
    """
    cov = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ArgumentError(f"Covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
        raise ArgumentError("Covariance must be symmetric")
    try:
        chol, _ = scipy.linalg.cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as e:
        raise ArgumentError("Covariance must be positive definite") from e
    d = cov.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return 0.5 * d * math.log(2.0 * math.pi * math.e) + 0.5 * logdet


def uniform_entropy(box: Sequence[tuple[float, float]]) -> float:
    """Entropy of the uniform distribution on prod_i [a_i, b_i].

    Raises:
        ArgumentError: If some interval is empty
    """
    total = 0.0
    for axis, (a, b) in enumerate(box):
        if not b > a:
            raise ArgumentError(f"Interval {axis} is empty: [{a}, {b}]")
        total += math.log(b - a)
    return total


def true_mean_measure(
    grid: BinningGrid,
    dist: DistributionSpec,
    s: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> np.ndarray:
    """Expected bin counts nu_j = s * P(B_j) for a product distribution.

    Args:
        grid: Binning grid
        dist: Distribution with independent coordinates (uniform, diagonal
            gaussian or student_t)
        s: Number of samples

    Returns:
        Array of grid.shape; entry ``[i_1, ..., i_d]`` is the mean measure of
        that bin

    Raises:
        ArgumentError: For unsupported families or a dimension mismatch
    """
    if dist.dim != grid.ndim:
        raise ArgumentError(f"Distribution has dimension {dist.dim}, grid has {grid.ndim}")
    _check_budget(grid.size, budget, "Mean measure")
    probs = [np.diff(dist.marginal(k).cdf(e)) for k, e in enumerate(grid.edges)]
    return s * functools.reduce(np.multiply.outer, probs)
