"""Sparse count tensors, Kruskal (CP) models and multi-index machinery.

Every bin <-> tensor mapping in the package goes through :func:`linearize`
and :func:`delinearize`: zero-based indices, column-major order (the first
mode varies fastest), so ``l = i_1 + n_1*i_2 + n_1*n_2*i_3 + ...``. One-based
notation used in the literature maps onto this by subtracting one from every
coordinate and from the linear index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateModelError,
    InvariantViolationError,
    MultiIndexError,
)

_log = logging.getLogger(__name__)

Shape = tuple[int, ...]
MultiIndex = tuple[int, ...]

# Column sums of a stochastic factor may drift this far from one.
STOCHASTIC_TOL = 1e-9

_MAX_SIZE = int(np.iinfo(np.int64).max)


def validate_shape(dims: Sequence[int]) -> Shape:
    """Validate tensor dimensions and return them as a tuple.

    Args:
        dims: Sizes (n_1, ..., n_d)

    Returns:
        Shape tuple of Python ints

    Raises:
        ArgumentError: If d == 0, any n_i < 1, or prod(n_i) overflows int64
    """
    shape = tuple(int(n) for n in dims)
    if not shape:
        raise ArgumentError("Shape needs at least one dimension")
    for axis, n in enumerate(shape):
        if n < 1:
            raise ArgumentError(f"Dimension {axis} has size {n}; sizes must be >= 1")
    if math.prod(shape) > _MAX_SIZE:
        raise ArgumentError(f"Shape {shape} has more entries than a 64-bit index can address")
    return shape


def shape_size(shape: Sequence[int]) -> int:
    """Total number of entries n = prod(n_i)."""
    return math.prod(validate_shape(shape))


def _check_index(index: Sequence[int], shape: Shape) -> MultiIndex:
    coords = tuple(int(c) for c in index)
    if len(coords) != len(shape):
        raise MultiIndexError(
            f"Index {coords} has {len(coords)} coordinates, shape {shape} needs {len(shape)}"
        )
    for axis, (c, n) in enumerate(zip(coords, shape)):
        if not 0 <= c < n:
            raise MultiIndexError(f"Coordinate {c} out of range [0, {n}) on axis {axis}")
    return coords


def linearize(index: Sequence[int], shape: Sequence[int]) -> int:
    """Map a multi-index to its zero-based column-major linear index.

    Args:
        index: Coordinates (i_1, ..., i_d)
        shape: Tensor shape

    Returns:
        Linear index in [0, n)

    Raises:
        MultiIndexError: If a coordinate is out of range
    """
    shape = validate_shape(shape)
    coords = _check_index(index, shape)
    linear = 0
    stride = 1
    for c, n in zip(coords, shape):
        linear += c * stride
        stride *= n
    return linear


def delinearize(linear: int, shape: Sequence[int]) -> MultiIndex:
    """Inverse of :func:`linearize`.

    Raises:
        MultiIndexError: If linear is negative or >= n
    """
    shape = validate_shape(shape)
    linear = int(linear)
    size = math.prod(shape)
    if not 0 <= linear < size:
        raise MultiIndexError(f"Linear index {linear} out of range [0, {size})")
    coords = []
    for n in shape:
        linear, c = divmod(linear, n)
        coords.append(c)
    return tuple(coords)


def linearize_many(subs: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Vectorized :func:`linearize` for an (m, d) array of multi-indices."""
    shape = validate_shape(shape)
    subs = np.asarray(subs, dtype=np.int64).reshape(-1, len(shape))
    if subs.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(subs < 0) or np.any(subs >= np.asarray(shape, dtype=np.int64)):
        raise MultiIndexError(f"Multi-index out of range for shape {shape}")
    return np.ravel_multi_index(tuple(subs.T), shape, order="F").astype(np.int64)


def delinearize_many(linear: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Vectorized :func:`delinearize`; returns an (m, d) int64 array."""
    shape = validate_shape(shape)
    linear = np.asarray(linear, dtype=np.int64).reshape(-1)
    if linear.size and (linear.min() < 0 or linear.max() >= math.prod(shape)):
        raise MultiIndexError(f"Linear index out of range for shape {shape}")
    coords = np.unravel_index(linear, shape, order="F")
    return np.stack(coords, axis=1).astype(np.int64).reshape(-1, len(shape))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SparseCountTensor:
    """Histogram bin counts keyed by multi-index.

    Entries are stored sorted by linear index so iteration order (and every
    sum over the support) is independent of how the counts were inserted.
    Zero counts are implicit.
    """

    shape: Shape
    subs: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        shape = validate_shape(self.shape)
        subs = np.asarray(self.subs, dtype=np.int64).reshape(-1, len(shape))
        vals = np.asarray(self.vals, dtype=np.int64).reshape(-1)
        if subs.shape[0] != vals.shape[0]:
            raise ArgumentError(
                f"{subs.shape[0]} multi-indices but {vals.shape[0]} counts"
            )
        if np.any(vals < 1):
            raise ArgumentError("Stored counts must be >= 1; zeros are implicit")
        linear = linearize_many(subs, shape)
        if linear.size > 1 and np.any(np.diff(linear) <= 0):
            raise ArgumentError(
                "Entries must be unique and sorted by linear index; "
                "use SparseCountTensor.from_coordinates to aggregate"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "subs", _frozen(subs))
        object.__setattr__(self, "vals", _frozen(vals))
        object.__setattr__(self, "_linear", _frozen(linear))

    @classmethod
    def from_linear_indices(cls, shape: Sequence[int], linear: np.ndarray) -> SparseCountTensor:
        """Count occurrences of each linear index (one per binned sample)."""
        shape = validate_shape(shape)
        linear = np.asarray(linear, dtype=np.int64).reshape(-1)
        uniq, counts = np.unique(linear, return_counts=True)
        return cls(shape, delinearize_many(uniq, shape), counts)

    @classmethod
    def from_coordinates(
        cls,
        shape: Sequence[int],
        subs: np.ndarray,
        counts: np.ndarray | None = None,
    ) -> SparseCountTensor:
        """Aggregate possibly repeated, unsorted coordinates into a tensor.

        Args:
            shape: Tensor shape
            subs: (m, d) multi-indices
            counts: Optional non-negative counts per row (default one each)

        Returns:
            Tensor with duplicates summed and zero totals dropped
        """
        shape = validate_shape(shape)
        linear = linearize_many(subs, shape)
        if counts is None:
            return cls.from_linear_indices(shape, linear)
        counts = np.asarray(counts, dtype=np.int64).reshape(-1)
        if counts.shape[0] != linear.shape[0]:
            raise ArgumentError("counts must have one entry per multi-index")
        if np.any(counts < 0):
            raise ArgumentError("counts must be non-negative")
        uniq, inverse = np.unique(linear, return_inverse=True)
        totals = np.zeros(uniq.shape[0], dtype=np.int64)
        np.add.at(totals, inverse, counts)
        keep = totals > 0
        return cls(shape, delinearize_many(uniq[keep], shape), totals[keep])

    @classmethod
    def from_entries(cls, shape: Sequence[int], entries: Mapping[MultiIndex, int]) -> SparseCountTensor:
        """Build from a ``{multi_index: count}`` mapping."""
        shape = validate_shape(shape)
        if not entries:
            return cls(shape, np.zeros((0, len(shape)), dtype=np.int64), np.zeros(0, dtype=np.int64))
        subs = np.array([tuple(k) for k in entries.keys()], dtype=np.int64)
        counts = np.array(list(entries.values()), dtype=np.int64)
        return cls.from_coordinates(shape, subs, counts)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def total(self) -> int:
        """Total count (number of binned samples)."""
        return int(self.vals.sum())

    @property
    def linear_indices(self) -> np.ndarray:
        return self._linear  # type: ignore[attr-defined]

    def entries(self) -> dict[MultiIndex, int]:
        """Nonzero entries in linear-index order."""
        return {tuple(int(c) for c in row): int(v) for row, v in zip(self.subs, self.vals)}

    def __getitem__(self, index: Sequence[int]) -> int:
        linear = linearize(index, self.shape)
        pos = int(np.searchsorted(self.linear_indices, linear))
        if pos < self.nnz and self.linear_indices[pos] == linear:
            return int(self.vals[pos])
        return 0


@dataclass(frozen=True, eq=False)
class KruskalModel:
    """Rank-R CP tensor in decomposed form: weights and per-mode factors.

    ``factors[k]`` has shape (n_k, R); entry ``[i, r]`` is a_r^(k)[i]. A model
    is *normalized* when every factor column sums to one, in which case the
    total mass of the dense tensor equals ``weights.sum()``.
    """

    weights: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        rank = weights.shape[0]
        if rank < 1:
            raise ArgumentError("A Kruskal model needs rank >= 1")
        factors = tuple(np.asarray(A, dtype=np.float64) for A in self.factors)
        if not factors:
            raise ArgumentError("A Kruskal model needs at least one factor matrix")
        for k, A in enumerate(factors):
            if A.ndim != 2 or A.shape[1] != rank:
                raise ArgumentError(
                    f"Factor {k} has shape {A.shape}; expected (n_{k}, {rank})"
                )
            if not np.all(np.isfinite(A)) or np.any(A < 0):
                raise ArgumentError(f"Factor {k} must be finite and non-negative")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ArgumentError("Weights must be finite and non-negative")
        validate_shape(A.shape[0] for A in factors)
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "factors", tuple(_frozen(A) for A in factors))

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> Shape:
        return tuple(int(A.shape[0]) for A in self.factors)

    def column_sums(self) -> list[np.ndarray]:
        return [A.sum(axis=0) for A in self.factors]

    def is_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        """True when every factor column sums to one within tol."""
        return all(np.all(np.abs(s - 1.0) <= tol) for s in self.column_sums())


def kruskal_entry(model: KruskalModel, index: Sequence[int]) -> float:
    """Evaluate m_i = sum_r w_r prod_k A_k[i_k, r] in O(R*d).

    Raises:
        MultiIndexError: If the index does not fit the model shape
    """
    coords = _check_index(index, model.shape)
    terms = np.array(model.weights, copy=True)
    for A, c in zip(model.factors, coords):
        terms *= A[c]
    return float(terms.sum())


def kruskal_entries(model: KruskalModel, subs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`kruskal_entry` for an (m, d) array of multi-indices."""
    subs = np.asarray(subs, dtype=np.int64).reshape(-1, model.ndim)
    if subs.shape[0] and (
        np.any(subs < 0) or np.any(subs >= np.asarray(model.shape, dtype=np.int64))
    ):
        raise MultiIndexError(f"Multi-index out of range for shape {model.shape}")
    terms = np.broadcast_to(model.weights, (subs.shape[0], model.rank)).copy()
    for k, A in enumerate(model.factors):
        terms *= A[subs[:, k]]
    return terms.sum(axis=1)


def kruskal_total_mass(model: KruskalModel) -> float:
    """Total mass of the dense tensor, sum_r w_r, for a normalized model.

    Raises:
        InvariantViolationError: If any factor column sum deviates from one
            by more than 1e-9
    """
    for k, sums in enumerate(model.column_sums()):
        worst = float(np.max(np.abs(sums - 1.0)))
        if worst > STOCHASTIC_TOL:
            raise InvariantViolationError(
                f"Factor {k} is not column-stochastic (max |colsum - 1| = {worst:.3e}); "
                "call normalize_model first"
            )
    return float(model.weights.sum())


def normalize_model(model: KruskalModel) -> KruskalModel:
    """Rescale factor columns to unit 1-norm, absorbing the scales into the weights.

    The dense tensor is unchanged entrywise up to rounding.

    Raises:
        DegenerateModelError: If some factor column is all zeros
    """
    weights = np.array(model.weights, copy=True)
    factors = []
    for k, A in enumerate(model.factors):
        sums = A.sum(axis=0)
        dead = np.flatnonzero(sums <= 0)
        if dead.size:
            raise DegenerateModelError(
                f"Factor {k} has all-zero column(s) {dead.tolist()}"
            )
        factors.append(A / sums)
        weights *= sums
    return KruskalModel(weights, tuple(factors))


def sort_components(model: KruskalModel) -> KruskalModel:
    """Order components by decreasing weight (stable for ties)."""
    order = np.argsort(-model.weights, kind="stable")
    return KruskalModel(model.weights[order], tuple(A[:, order] for A in model.factors))
