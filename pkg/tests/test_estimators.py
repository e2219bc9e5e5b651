"""Tests for the PTC density, entropy estimators and closed forms."""

import itertools
import math

import numpy as np
import pytest
from scipy import integrate, stats

from ptc_entropy.cp_apr import FitConfig, fit
from ptc_entropy.errors import ArgumentError, CapacityError, NumericalFailureError
from ptc_entropy.estimators import (
    PtcDensity,
    gaussian_entropy,
    knn_entropy,
    model_zero_fraction,
    plug_in_expectation,
    ptc_density_eval,
    ptc_entropy,
    ptc_entropy_mc,
    ptc_entropy_thresholded,
    ptc_entropy_top_t,
    true_mean_measure,
    uniform_entropy,
)
from ptc_entropy.histogram import BinningGrid, build_histogram, grid_from_samples
from ptc_entropy.samplers import DistributionSpec
from ptc_entropy.tensor_core import KruskalModel


def regular_grid(shape, width=1.0, origin=0.0):
    return BinningGrid(tuple(origin + width * np.arange(n + 1) for n in shape))


def uniform_model(shape, weight=1.0):
    return KruskalModel(np.array([weight]), tuple(np.full((n, 1), 1.0 / n) for n in shape))


def dense_entropy(model, grid, dense, keep=None):
    """Literal -sum q log(q / V) over all bins of a dense reconstruction."""
    full = dense(model) if keep is None else keep
    mass = float(model.weights.sum())
    total = 0.0
    for index in itertools.product(*(range(n) for n in grid.shape)):
        m = full[index]
        if m > 0:
            q = m / mass
            total -= q * math.log(q / grid.volume(index))
    return total


def pruned_dense(model, tau):
    """Dense tensor keeping component r only where every factor entry >= tau."""
    out = np.zeros(model.shape)
    for r in range(model.rank):
        outer = np.array(model.weights[r])
        for A in model.factors:
            outer = np.multiply.outer(outer, np.where(A[:, r] >= tau, A[:, r], 0.0))
        out += outer
    return out


@pytest.fixture
def fitted_density():
    """Rank-3 fit of a seeded 3-D Gaussian histogram on 8 bins per dimension."""
    x = np.random.default_rng(5).standard_normal((800, 3))
    grid = grid_from_samples(x, 8)
    h = build_histogram(x, grid)
    result = fit(h.counts, FitConfig(rank=3, rng_seed=5))
    return PtcDensity.from_model(result.model, grid)


class TestPtcDensity:
    """Test suite for density evaluation."""

    def test_outside_is_zero(self):
        p = PtcDensity.from_model(uniform_model((4, 4)), regular_grid((4, 4), 0.25))
        assert ptc_density_eval(p, (1.5, 0.5)) == 0.0

    def test_uniform_on_unit_box(self):
        p = PtcDensity.from_model(uniform_model((4, 4), weight=7.0), regular_grid((4, 4), 0.25))
        for x in [(0.1, 0.1), (0.5, 0.9), (0.99, 0.01)]:
            assert ptc_density_eval(p, x) == pytest.approx(1.0, rel=1e-12)

    def test_matches_dense(self, make_model, dense):
        model = make_model((3, 4), 2, seed=3)
        grid = BinningGrid((np.array([0.0, 0.5, 2.0, 3.0]), np.array([-1.0, 0.0, 0.3, 1.0, 4.0])))
        p = PtcDensity.from_model(model, grid)
        full = dense(model)
        mass = model.weights.sum()
        centers = [0.5 * (e[:-1] + e[1:]) for e in grid.edges]
        for i, j in itertools.product(range(3), range(4)):
            expected = full[i, j] / (mass * grid.volume((i, j)))
            assert ptc_density_eval(p, (centers[0][i], centers[1][j])) == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch(self, make_model):
        with pytest.raises(ArgumentError):
            PtcDensity.from_model(make_model((3, 3), 1), regular_grid((3, 4)))

    def test_normalization_of_fitted_model(self, fitted_density, dense):
        full = dense(fitted_density.model)
        assert full.sum() / fitted_density.total_mass == pytest.approx(1.0, abs=1e-9)


class TestPlugInExpectation:
    """Test suite for plug-in expectations."""

    def test_constant_one(self, make_model):
        model = make_model((3, 4), 2)
        p = PtcDensity.from_model(model, regular_grid((3, 4)))
        fbar = {index: 1.0 for index in itertools.product(range(3), range(4))}
        assert plug_in_expectation(p, fbar) == pytest.approx(1.0, abs=1e-12)

    def test_constant_c(self, make_model):
        p = PtcDensity.from_model(make_model((3, 4), 2), regular_grid((3, 4)))
        assert plug_in_expectation(p, lambda subs: np.full(subs.shape[0], 2.5)) == pytest.approx(2.5)

    def test_log_density_is_negative_entropy(self, fitted_density):
        p = fitted_density

        def log_density(subs):
            from ptc_entropy.tensor_core import kruskal_entries

            return np.log(kruskal_entries(p.model, subs) / (p.total_mass * p.grid.volumes(subs)))

        assert plug_in_expectation(p, log_density) == pytest.approx(-ptc_entropy(p), abs=1e-10)

    def test_missing_bin(self, make_model):
        p = PtcDensity.from_model(make_model((2, 2), 1), regular_grid((2, 2)))
        with pytest.raises(ArgumentError, match="No bin average"):
            plug_in_expectation(p, {(0, 0): 1.0})


class TestPtcEntropy:
    """Test suite for full PTC entropy."""

    def test_uniform(self):
        grid = regular_grid((4,), width=0.5)
        p = PtcDensity.from_model(uniform_model((4,)), grid)
        assert ptc_entropy(p) == pytest.approx(math.log(4 * 0.5), abs=1e-12)

    def test_single_bin(self):
        grid = regular_grid((3, 3), width=0.2)
        A = np.array([[0.0], [1.0], [0.0]])
        p = PtcDensity.from_model(KruskalModel(np.array([5.0]), (A, A)), grid)
        assert ptc_entropy(p) == pytest.approx(math.log(0.04), abs=1e-12)

    def test_matches_dense(self, make_model, dense):
        model = make_model((4, 4), 2, seed=17)
        grid = BinningGrid((np.array([0.0, 1.0, 1.5, 3.0, 3.2]), np.array([0.0, 0.1, 0.2, 2.0, 5.0])))
        p = PtcDensity.from_model(model, grid)
        assert ptc_entropy(p) == pytest.approx(dense_entropy(model, grid, dense), abs=1e-12)

    def test_capacity(self, make_model):
        p = PtcDensity.from_model(make_model((10, 10, 10), 2), regular_grid((10, 10, 10)))
        with pytest.raises(CapacityError, match="--tau") as excinfo:
            ptc_entropy(p, budget=999)
        assert excinfo.value.required == 1000

    def test_scale_covariance(self, make_model):
        model = make_model((5, 6, 4), 3, seed=21)
        grid = regular_grid((5, 6, 4), width=0.3, origin=-1.0)
        scaled = BinningGrid(tuple(2.0 * e for e in grid.edges))
        h0 = ptc_entropy(PtcDensity.from_model(model, grid))
        h1 = ptc_entropy(PtcDensity.from_model(model, scaled))
        assert h1 - h0 == pytest.approx(3 * math.log(2.0), abs=1e-9)

    def test_model_zero_fraction(self):
        A = np.array([[1.0], [0.0]])
        p = PtcDensity.from_model(KruskalModel(np.array([1.0]), (A, A)), regular_grid((2, 2)))
        assert model_zero_fraction(p) == 0.75


class TestThresholding:
    """Test suite for thresholded and top-t PTC entropy."""

    def test_tau_zero_is_exact(self, fitted_density):
        report = ptc_entropy_thresholded(fitted_density, 0.0)
        assert report.entropy_estimate == ptc_entropy(fitted_density)
        assert report.retained_terms == report.total_terms == 3 * 8**3
        assert report.first_order_terms == report.retained_terms
        assert report.retained_mass_fraction == pytest.approx(1.0, abs=1e-12)
        assert not report.pruned_everything

    def test_tau_above_max_prunes_everything(self, make_model):
        model = make_model((4, 5, 3), 2, seed=8)
        tau = max(float(A.max()) for A in model.factors) + 1e-3
        report = ptc_entropy_thresholded(PtcDensity.from_model(model, regular_grid((4, 5, 3))), tau)
        assert report.retained_terms == 0
        assert report.first_order_terms == 0
        assert report.retained_mass_fraction == 0.0
        assert report.entropy_estimate == 0.0
        assert report.pruned_everything

    def test_tau_out_of_range(self, fitted_density):
        with pytest.raises(ArgumentError):
            ptc_entropy_thresholded(fitted_density, 1.0)
        with pytest.raises(ArgumentError):
            ptc_entropy_thresholded(fitted_density, -0.1)

    @pytest.mark.parametrize("tau", [0.3, 0.1, 0.05, 0.01])
    def test_matches_dense_pruning(self, make_model, dense, tau):
        model = make_model((5, 4, 6), 3, seed=31)
        grid = regular_grid((5, 4, 6), width=0.5)
        p = PtcDensity.from_model(model, grid)
        report = ptc_entropy_thresholded(p, tau)
        kept = pruned_dense(model, tau)
        assert report.entropy_estimate == pytest.approx(dense_entropy(model, grid, dense, keep=kept), abs=1e-12)
        assert report.retained_mass_fraction == pytest.approx(kept.sum() / model.weights.sum(), abs=1e-12)
        assert report.retained_bins == int(np.count_nonzero(kept))

    def test_retained_term_counts(self, make_model):
        model = make_model((5, 4, 6), 3, seed=31)
        p = PtcDensity.from_model(model, regular_grid((5, 4, 6)))
        tau = 0.15
        report = ptc_entropy_thresholded(p, tau)
        exact = sum(
            math.prod(int(np.sum(A[:, r] >= tau)) for A in model.factors) for r in range(model.rank)
        )
        n = 5 * 4 * 6
        first_order = max(0, model.rank * n - sum(
            int(np.sum(A[:, r] < tau)) * (n // A.shape[0]) for r in range(model.rank) for A in model.factors
        ))
        assert report.retained_terms == exact
        assert report.first_order_terms == first_order
        assert report.retained_terms <= report.total_terms

    def test_mass_fraction_monotone_in_tau(self, fitted_density):
        fractions = [
            ptc_entropy_thresholded(fitted_density, tau).retained_mass_fraction
            for tau in (0.2, 0.1, 1e-2, 1e-3, 1e-4, 0.0)
        ]
        assert all(b >= a - 1e-15 for a, b in zip(fractions, fractions[1:]))

    def test_small_tau_approaches_full(self, fitted_density):
        full = ptc_entropy(fitted_density)
        report = ptc_entropy_thresholded(fitted_density, 1e-12)
        assert abs(report.entropy_estimate - full) < 1e-6

    def test_top_t_full_is_exact(self, fitted_density):
        report = ptc_entropy_top_t(fitted_density, 8)
        assert report.entropy_estimate == ptc_entropy(fitted_density)
        assert report.top_t == 8

    def test_top_t_counts(self, fitted_density):
        report = ptc_entropy_top_t(fitted_density, 3)
        assert report.retained_terms == 3 * 3**3
        assert 0 < report.retained_mass_fraction < 1


class TestMonteCarlo:
    """Test suite for sampled PTC entropy."""

    def test_close_to_full(self, fitted_density):
        estimate, stderr = ptc_entropy_mc(fitted_density, 100_000, seed=1)
        assert stderr > 0
        assert abs(estimate - ptc_entropy(fitted_density)) < 6 * stderr

    def test_seeded(self, fitted_density):
        assert ptc_entropy_mc(fitted_density, 1000, seed=4) == ptc_entropy_mc(fitted_density, 1000, seed=4)

    def test_needs_two_draws(self, fitted_density):
        with pytest.raises(ArgumentError):
            ptc_entropy_mc(fitted_density, 1)


class TestKnnEntropy:
    """Test suite for the Kozachenko-Leonenko estimator."""

    def test_two_points(self):
        assert knn_entropy(np.array([[0.0], [1.0]]), 1) == pytest.approx(1.0 + math.log(2.0), abs=1e-12)

    def test_gaussian_2d(self):
        x = np.random.default_rng(0).standard_normal((5000, 2))
        assert knn_entropy(x, 5) == pytest.approx(1.0 + math.log(2 * math.pi), abs=0.1)

    def test_k_bounds(self):
        x = np.arange(10.0).reshape(-1, 1)
        with pytest.raises(ArgumentError):
            knn_entropy(x, 10)
        with pytest.raises(ArgumentError):
            knn_entropy(x, 0)

    def test_duplicates_jitter(self):
        x = np.repeat(np.random.default_rng(1).standard_normal((50, 2)), 2, axis=0)
        assert math.isfinite(knn_entropy(x, 1, tie_policy="jitter", seed=3))

    def test_duplicates_floor(self):
        x = np.repeat(np.random.default_rng(1).standard_normal((50, 2)), 2, axis=0)
        assert math.isfinite(knn_entropy(x, 1, tie_policy="floor"))

    def test_duplicates_raise(self):
        x = np.repeat(np.random.default_rng(1).standard_normal((50, 2)), 2, axis=0)
        with pytest.raises(NumericalFailureError):
            knn_entropy(x, 1, tie_policy="raise")

    def test_translation_invariance(self):
        x = np.random.default_rng(2).standard_normal((500, 3))
        assert knn_entropy(x + 5.0, 4) == pytest.approx(knn_entropy(x, 4), abs=1e-9)


class TestClosedForms:
    """Test suite for closed-form entropies."""

    def test_gaussian_identity(self):
        assert gaussian_entropy(np.eye(5)) == pytest.approx(7.09469, abs=1e-5)
        assert gaussian_entropy(np.eye(1)) == pytest.approx(1.41894, abs=1e-5)

    def test_gaussian_correlated(self):
        d = 5
        sigma = 0.5 * (np.ones((d, d)) + np.eye(d))
        logdet = math.log((d + 1) / 2) + (d - 1) * math.log(0.5)
        expected = 0.5 * d * math.log(2 * math.pi * math.e) + 0.5 * logdet
        assert gaussian_entropy(sigma) == pytest.approx(expected, abs=1e-12)

    def test_gaussian_not_spd(self):
        with pytest.raises(ArgumentError):
            gaussian_entropy(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ArgumentError):
            gaussian_entropy(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_uniform(self):
        assert uniform_entropy([(0.0, 1.0)] * 5) == 0.0
        assert uniform_entropy([(0.0, math.e**2)] * 5) == pytest.approx(10.0, abs=1e-12)
        assert uniform_entropy([(0.0, 2.0), (0.0, 3.0)]) == pytest.approx(math.log(6.0))
        with pytest.raises(ArgumentError):
            uniform_entropy([(1.0, 1.0)])


class TestTrueMeanMeasure:
    """Test suite for expected bin counts."""

    def test_uniform_quarters(self):
        nu = true_mean_measure(regular_grid((4,), width=0.25), DistributionSpec.uniform_cube(1), 100)
        np.testing.assert_allclose(nu, [25.0] * 4, atol=1e-12)

    def test_normal_halves(self):
        grid = BinningGrid((np.array([-10.0, 0.0, 10.0]),))
        nu = true_mean_measure(grid, DistributionSpec.standard_normal(1), 100)
        np.testing.assert_allclose(nu, [50.0, 50.0], atol=1e-9)

    def test_matches_quadrature(self):
        grid = BinningGrid((np.array([-2.0, -0.5, 0.3, 1.7]), np.array([-1.0, 0.0, 2.5])))
        spec = DistributionSpec.gaussian([0.2, -0.1], np.diag([1.5, 0.7]))
        nu = true_mean_measure(grid, spec, 1000)
        pdfs = [stats.norm(0.2, math.sqrt(1.5)).pdf, stats.norm(-0.1, math.sqrt(0.7)).pdf]
        for i, j in itertools.product(range(3), range(2)):
            p0 = integrate.quad(pdfs[0], grid.edges[0][i], grid.edges[0][i + 1], epsabs=1e-13)[0]
            p1 = integrate.quad(pdfs[1], grid.edges[1][j], grid.edges[1][j + 1], epsabs=1e-13)[0]
            assert nu[i, j] == pytest.approx(1000 * p0 * p1, abs=1e-8)

    def test_sums_to_box_probability(self):
        grid = regular_grid((5, 5), width=0.5, origin=-1.25)
        nu = true_mean_measure(grid, DistributionSpec.student_t(2, 3.0), 200)
        p = (stats.t(3.0).cdf(1.25) - stats.t(3.0).cdf(-1.25)) ** 2
        assert nu.sum() == pytest.approx(200 * p, rel=1e-10)

    def test_unsupported_family(self):
        from ptc_entropy.samplers import equidistant_mixture

        with pytest.raises(ArgumentError):
            true_mean_measure(regular_grid((2, 2)), equidistant_mixture(2, 2), 10)
        with pytest.raises(ArgumentError):
            true_mean_measure(regular_grid((2, 2)), DistributionSpec.correlated_normal(2), 10)
