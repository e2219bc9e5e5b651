"""Binning grids, histogram tensors and the raw histogram baselines.

A grid partitions the box B = prod_i [e_i[0], e_i[n_i]] into half-open bins;
the last bin along every axis is closed on the right so samples sitting on the
upper extreme are still counted. Entropies are in nats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, GridError
from .tensor_core import (
    MultiIndex,
    Shape,
    SparseCountTensor,
    linearize_many,
    validate_shape,
)

_log = logging.getLogger(__name__)

# Width rule constant close to the asymptotically optimal Gaussian bin width.
DEFAULT_WIDTH_CONSTANT = 3.5


def as_samples(samples) -> np.ndarray:
    """Coerce samples to a float64 (s, d) matrix; 1-D input is one column."""
    array = np.asarray(samples, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ArgumentError(f"Samples must be an (s, d) matrix, got shape {array.shape}")
    return array


@dataclass(frozen=True, eq=False)
class BinningGrid:
    """Per-dimension bin edges defining the partition {B_j}."""

    edges: tuple[np.ndarray, ...]

    def __post_init__(self):
        edges = []
        for axis, e in enumerate(self.edges):
            e = np.array(e, dtype=np.float64, copy=True).reshape(-1)
            if e.shape[0] < 2:
                raise GridError(f"Dimension {axis} needs at least two edges", axis)
            if not np.all(np.isfinite(e)) or np.any(np.diff(e) <= 0):
                raise GridError(f"Edges of dimension {axis} must be finite and strictly increasing", axis)
            e.setflags(write=False)
            edges.append(e)
        if not edges:
            raise GridError("A grid needs at least one dimension")
        validate_shape(len(e) - 1 for e in edges)
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def ndim(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> Shape:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def widths(self) -> tuple[np.ndarray, ...]:
        return tuple(np.diff(e) for e in self.edges)

    @property
    def lower(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges])

    @property
    def upper(self) -> np.ndarray:
        return np.array([e[-1] for e in self.edges])

    def box_volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def volumes(self, subs: np.ndarray) -> np.ndarray:
        """Bin volumes |B_j| for an (m, d) array of multi-indices."""
        subs = np.asarray(subs, dtype=np.int64).reshape(-1, self.ndim)
        vol = np.ones(subs.shape[0])
        for k, w in enumerate(self.widths):
            vol *= w[subs[:, k]]
        return vol

    def volume(self, index: Sequence[int]) -> float:
        return float(self.volumes(np.asarray([index]))[0])

    def bin_samples(self, samples) -> tuple[np.ndarray, np.ndarray]:
        """Locate every sample.

        Args:
            samples: (s, d) matrix

        Returns:
            Tuple of (subs, inside) where subs is (s, d) and only rows with
            inside[i] True hold a valid multi-index
        """
        x = as_samples(samples)
        if x.shape[1] != self.ndim:
            raise ArgumentError(f"Samples have {x.shape[1]} columns, grid has {self.ndim} dimensions")
        inside = np.ones(x.shape[0], dtype=bool)
        subs = np.zeros(x.shape, dtype=np.int64)
        for k, e in enumerate(self.edges):
            col = x[:, k]
            inside &= (col >= e[0]) & (col <= e[-1])
            idx = np.searchsorted(e, col, side="right") - 1
            subs[:, k] = np.clip(idx, 0, len(e) - 2)
        return subs, inside


def bin_point(grid: BinningGrid, x: Sequence[float]) -> MultiIndex | None:
    """Return the bin containing x, or None when x lies outside the box."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if point.shape[1] != grid.ndim:
        raise ArgumentError(f"Point has {point.shape[1]} coordinates, grid has {grid.ndim}")
    subs, inside = grid.bin_samples(point)
    if not inside[0]:
        return None
    return tuple(int(c) for c in subs[0])


def _extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.shape[0] < 2:
        raise ArgumentError(f"Need at least two samples to build a grid, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("Samples must be finite to build a grid")
    lo, hi = x.min(axis=0), x.max(axis=0)
    for axis in range(x.shape[1]):
        if lo[axis] == hi[axis]:
            raise GridError(f"Dimension {axis} is degenerate: every sample equals {lo[axis]}", axis)
    return lo, hi


def grid_from_samples(samples, bins_per_dim: int | Sequence[int]) -> BinningGrid:
    """Equal-width grid spanning the sample extrema with n_i bins per dimension.

    Args:
        samples: (s, d) matrix, s >= 2
        bins_per_dim: One count for every dimension, or one per dimension

    Returns:
        BinningGrid over [min_i, max_i]

    Raises:
        GridError: If some dimension has min == max
    """
    x = as_samples(samples)
    _extrema(x)
    if np.isscalar(bins_per_dim):
        counts = [int(bins_per_dim)] * x.shape[1]
    else:
        counts = [int(n) for n in bins_per_dim]
    if len(counts) != x.shape[1]:
        raise ArgumentError(f"Got {len(counts)} bin counts for {x.shape[1]} dimensions")
    validate_shape(counts)
    return BinningGrid(tuple(np.histogram_bin_edges(x[:, k], bins=n) for k, n in enumerate(counts)))


def scott_width(s: int, d: int, c: float = DEFAULT_WIDTH_CONSTANT) -> float:
    """Bin width c * s^(-1/(d+2))."""
    if s < 1 or d < 1 or c <= 0:
        raise ArgumentError(f"scott_width needs s >= 1, d >= 1, c > 0 (got s={s}, d={d}, c={c})")
    return float(c * s ** (-1.0 / (d + 2)))


def grid_from_width(samples, width: float) -> BinningGrid:
    """Grid of consecutive width-sized bins starting at each dimension's minimum.

    The number of bins is ceil((max - min) / width), grown by one if rounding
    leaves the maximum uncovered.

    Raises:
        ArgumentError: If width <= 0
        GridError: If some dimension is degenerate
    """
    if not width > 0:
        raise ArgumentError(f"Bin width must be positive, got {width}")
    x = as_samples(samples)
    lo, hi = _extrema(x)
    edges = []
    for k in range(x.shape[1]):
        n = max(1, math.ceil((hi[k] - lo[k]) / width))
        e = lo[k] + width * np.arange(n + 1)
        while e[-1] < hi[k]:
            n += 1
            e = lo[k] + width * np.arange(n + 1)
        edges.append(e)
    return BinningGrid(tuple(edges))


@dataclass(frozen=True, eq=False)
class HistogramDensity:
    """Histogram of s samples over a grid; ``outside`` samples fell off the box."""

    grid: BinningGrid
    counts: SparseCountTensor
    total_samples: int
    outside: int = 0

    def __post_init__(self):
        if self.counts.shape != self.grid.shape:
            raise ArgumentError(f"Counts shape {self.counts.shape} != grid shape {self.grid.shape}")
        if self.counts.total + self.outside != self.total_samples:
            raise ArgumentError("Binned counts plus outside samples must equal the sample count")

    @property
    def binned_samples(self) -> int:
        return self.counts.total

    def evaluate(self, x: Sequence[float]) -> float:
        """Histogram density c_j / (s * |B_j|) at x, 0 off the box."""
        index = bin_point(self.grid, x)
        if index is None or self.total_samples == 0:
            return 0.0
        return self.counts[index] / (self.total_samples * self.grid.volume(index))


def build_histogram(samples, grid: BinningGrid) -> HistogramDensity:
    """Count samples per bin.

    Samples outside the grid's box are counted in ``outside`` and excluded
    from the tensor.
    """
    x = as_samples(samples)
    subs, inside = grid.bin_samples(x)
    linear = linearize_many(subs[inside], grid.shape)
    counts = SparseCountTensor.from_linear_indices(grid.shape, linear)
    outside = int(x.shape[0] - inside.sum())
    if outside:
        _log.info("%d of %d samples fall outside the grid box", outside, x.shape[0])
    return HistogramDensity(grid, counts, int(x.shape[0]), outside)


def histogram_entropy(h: HistogramDensity) -> float:
    """Plug-in entropy of the histogram density in nats.

    Uses the binned samples as normalizer: samples outside the box are left
    out of both sums and of s.

    Raises:
        ArgumentError: If no sample was binned
    """
    s = h.binned_samples
    if s < 1:
        raise ArgumentError("Histogram has no binned samples")
    q = h.counts.vals / s
    log_vol = np.log(h.grid.volumes(h.counts.subs))
    return float(-np.sum(q * np.log(q)) + np.sum(q * log_vol))


def occupancy(h: HistogramDensity) -> float:
    """Fraction of bins with a nonzero count."""
    return h.counts.nnz / h.grid.size
