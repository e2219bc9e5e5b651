"""Pytest configuration and fixtures for PTC entropy tests."""

import itertools

import numpy as np
import pytest

from ptc_entropy.dependencies import EstimationDependencies
from ptc_entropy.histogram import BinningGrid
from ptc_entropy.tensor_core import KruskalModel, SparseCountTensor, normalize_model


@pytest.fixture
def test_deps() -> EstimationDependencies:
    """Dependencies with small budgets so tests stay fast."""
    return EstimationDependencies(
        enumeration_budget=10**7,
        mc_draws=20_000,
        max_outer_iters=100,
        max_inner_iters=10,
        kkt_tol=1e-4,
        log_shift=1e-10,
        knn_distance_floor=1e-12,
        knn_tie_policy="floor",
        max_parallel_jobs=2,
    )


@pytest.fixture
def make_model():
    """Factory for seeded random Kruskal models."""

    def _make(shape, rank, seed=0, normalized=True, scale=5.0):
        rng = np.random.default_rng(seed)
        factors = tuple(rng.uniform(0.05, 1.0, size=(n, rank)) for n in shape)
        weights = rng.uniform(0.5, scale, size=rank)
        model = KruskalModel(weights, factors)
        return normalize_model(model) if normalized else model

    return _make


@pytest.fixture
def make_counts():
    """Factory for seeded random sparse count tensors."""

    def _make(shape, seed=0, density=0.5, max_count=9):
        rng = np.random.default_rng(seed)
        entries = {}
        for index in itertools.product(*(range(n) for n in shape)):
            if rng.random() < density:
                entries[index] = int(rng.integers(1, max_count + 1))
        if not entries:
            entries[tuple(0 for _ in shape)] = 1
        return SparseCountTensor.from_entries(shape, entries)

    return _make


@pytest.fixture
def unit_square_grid() -> BinningGrid:
    """2-D grid with edges (0, .5, 1) per dimension."""
    return BinningGrid((np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.5, 1.0])))


@pytest.fixture
def gaussian_samples() -> np.ndarray:
    """Seeded 1000 x 2 standard normal sample."""
    return np.random.default_rng(7).standard_normal((1000, 2))


def dense_reconstruction(model: KruskalModel) -> np.ndarray:
    """Dense tensor by explicit outer products (test oracle)."""
    dense = np.zeros(model.shape)
    for r in range(model.rank):
        outer = np.array(model.weights[r])
        for A in model.factors:
            outer = np.multiply.outer(outer, A[:, r])
        dense += outer
    return dense


@pytest.fixture
def dense():
    """Dense reconstruction oracle."""
    return dense_reconstruction
