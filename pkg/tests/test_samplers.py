"""Tests for the experiment distributions and their true entropies."""

import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from ptc_entropy.errors import ArgumentError
from ptc_entropy.samplers import (
    DistributionSpec,
    equidistant_mixture,
    sample,
    sample_with_labels,
    simplex_vertices,
    student_t_entropy,
    true_entropy,
)


class TestDistributionSpec:
    """Test suite for distribution parameters."""

    def test_uniform_requires_ordered_bounds(self):
        with pytest.raises(ValidationError):
            DistributionSpec.uniform([0.0, 1.0], [1.0, 1.0])

    def test_gaussian_covariance_shape(self):
        with pytest.raises(ValidationError):
            DistributionSpec(family="gaussian", dim=2, mean=[0.0, 0.0], cov=[[1.0]])

    def test_mixture_weights_sum_to_one(self):
        with pytest.raises(ValidationError):
            DistributionSpec(
                family="gaussian_mixture",
                dim=1,
                components=[{"weight": 0.3, "mean": [0.0], "cov": [[1.0]]}],
            )

    def test_marginal_of_mixture(self):
        with pytest.raises(ArgumentError):
            equidistant_mixture(3, 2).marginal(0)


class TestSampling:
    """Test suite for seeded samplers."""

    def test_deterministic(self):
        spec = DistributionSpec.standard_normal(3)
        np.testing.assert_array_equal(sample(spec, 100, seed=4), sample(spec, 100, seed=4))
        assert not np.array_equal(sample(spec, 100, seed=4), sample(spec, 100, seed=5))

    def test_uniform_support(self):
        x = sample(DistributionSpec.uniform([0.0, -2.0], [1.0, 3.0]), 2000, seed=1)
        assert x.shape == (2000, 2)
        assert np.all(x[:, 0] >= 0) and np.all(x[:, 0] < 1)
        assert np.all(x[:, 1] >= -2) and np.all(x[:, 1] < 3)

    def test_gaussian_moments(self):
        spec = DistributionSpec.correlated_normal(3)
        x = sample(spec, 50_000, seed=2)
        np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.03)
        np.testing.assert_allclose(np.cov(x.T), np.asarray(spec.cov), atol=0.03)

    def test_student_t_location(self):
        x = sample(DistributionSpec.student_t(2, 5.0, loc=[3.0, -1.0]), 20_000, seed=3)
        np.testing.assert_allclose(np.median(x, axis=0), [3.0, -1.0], atol=0.05)

    def test_needs_positive_size(self):
        with pytest.raises(ArgumentError):
            sample(DistributionSpec.standard_normal(1), 0, seed=0)

    def test_mixture_label_frequencies(self):
        x, labels = sample_with_labels(equidistant_mixture(3, 3), 30_000, seed=6)
        assert x.shape == (30_000, 3)
        np.testing.assert_allclose(np.bincount(labels, minlength=3) / 30_000, 1 / 3, atol=0.02)

    def test_mixture_components_centered_on_means(self):
        spec = equidistant_mixture(3, 3)
        x, labels = sample_with_labels(spec, 9000, seed=7)
        for c, comp in enumerate(spec.components):
            np.testing.assert_allclose(x[labels == c].mean(axis=0), comp.mean, atol=0.1)


class TestSimplex:
    """Test suite for equidistant mode placement."""

    @pytest.mark.parametrize("m,d", [(2, 1), (3, 2), (3, 5), (4, 3), (6, 6)])
    def test_pairwise_distances(self, m, d):
        vertices = simplex_vertices(m, d, separation=10.0)
        assert vertices.shape == (m, d)
        for a, b in itertools.combinations(range(m), 2):
            assert np.linalg.norm(vertices[a] - vertices[b]) == pytest.approx(10.0, abs=1e-9)

    def test_dimension_too_small(self):
        with pytest.raises(ArgumentError, match="at most d\\+1"):
            simplex_vertices(4, 2)
        with pytest.raises(ArgumentError):
            equidistant_mixture(4, 2)

    def test_mixture_weights(self):
        spec = equidistant_mixture(4, 3)
        assert spec.n_components == 4
        assert [c.weight for c in spec.components] == [0.25] * 4


class TestTrueEntropy:
    """Test suite for closed-form ground truth."""

    def test_uniform(self):
        assert true_entropy(DistributionSpec.uniform_cube(5, 0.0, math.e**2)) == pytest.approx(10.0)
        assert true_entropy(DistributionSpec.uniform_cube(5)) == 0.0

    def test_gaussian(self):
        assert true_entropy(DistributionSpec.standard_normal(5)) == pytest.approx(7.09469, abs=1e-5)

    def test_cauchy(self):
        assert student_t_entropy(1.0) == pytest.approx(math.log(4 * math.pi), abs=1e-12)
        assert true_entropy(DistributionSpec.student_t(3, 1.0)) == pytest.approx(3 * math.log(4 * math.pi))

    def test_student_t_approaches_normal(self):
        assert student_t_entropy(1e6) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-5)

    def test_mixture_has_no_closed_form(self):
        assert true_entropy(equidistant_mixture(3, 3)) is None

    def test_single_component_mixture(self):
        assert true_entropy(equidistant_mixture(1, 2)) == pytest.approx(1.0 + math.log(2 * math.pi))
