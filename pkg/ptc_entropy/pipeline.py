"""Estimation pipeline: samples in, one entropy record out.

Glues grids, histograms, CP-APR fits and the entropy estimators together
for the CLI and the experiment runner.
"""

from __future__ import annotations

import logging
import time
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from .cp_apr import FitResult, fit
from .dependencies import EstimationDependencies
from .errors import ArgumentError, CapacityError
from .estimators import (
    PtcDensity,
    knn_entropy,
    model_zero_fraction,
    ptc_entropy,
    ptc_entropy_mc,
    ptc_entropy_thresholded,
    ptc_entropy_top_t,
)
from .histogram import (
    DEFAULT_WIDTH_CONSTANT,
    BinningGrid,
    HistogramDensity,
    as_samples,
    build_histogram,
    grid_from_samples,
    grid_from_width,
    histogram_entropy,
    occupancy,
    scott_width,
)
from .settings import Settings, load_settings

_log = logging.getLogger(__name__)

EstimateMethod = Literal["hist", "ptc", "knn"]
Binning = Literal["bins", "width"]

# Sparsity scans run only on grids this small; the scan costs a full pass.
SPARSITY_SCAN_LIMIT = 10**6


class EstimateRecord(BaseModel):
    """One entropy estimate with its diagnostics."""

    model_config = ConfigDict(extra="forbid")

    method: EstimateMethod
    param_name: str
    param_value: float
    s: int
    d: int
    binning: str = ""
    estimate: float
    occupancy: float | None = None
    nnz_bins: int | None = None
    total_bins: int | None = None
    outside_samples: int | None = None
    retained_mass_fraction: float | None = None
    retained_terms: int | None = None
    stderr: float | None = None
    loglik_initial: float | None = None
    loglik_final: float | None = None
    fit_iterations: int | None = None
    converged: bool | None = None
    kkt_violation: float | None = None
    model_zero_fraction: float | None = None
    runtime_ms: float = 0.0
    detail: str = ""


def create_dependencies(settings: Settings | None = None) -> EstimationDependencies:
    """Create dependencies instance from settings.

    Returns:
        EstimationDependencies with every knob taken from Settings
    """
    settings = settings or load_settings()
    return EstimationDependencies(
        enumeration_budget=settings.enumeration_budget,
        mc_draws=settings.mc_draws,
        max_outer_iters=settings.max_outer_iters,
        max_inner_iters=settings.max_inner_iters,
        kkt_tol=settings.kkt_tol,
        log_shift=settings.log_shift,
        knn_distance_floor=settings.knn_distance_floor,
        knn_tie_policy=settings.knn_tie_policy,
        max_parallel_jobs=settings.max_parallel_jobs,
    )


# ============================================
# Grids
# ============================================

def make_grid(
    samples: np.ndarray,
    binning: Binning = "bins",
    bins_per_dim: int = 20,
    c: float = DEFAULT_WIDTH_CONSTANT,
) -> tuple[BinningGrid, str]:
    """Build the grid for a sample.

    Args:
        samples: (s, d) matrix
        binning: ``bins`` for a fixed count per dimension over the sample's
            extent, ``width`` for the c * s^(-1/(d+2)) width rule
        bins_per_dim: Bins per dimension for ``bins``
        c: Width constant for ``width``

    Returns:
        Tuple of (grid, label) where label reads ``bins=20`` or ``width=0.41``
    """
    x = as_samples(samples)
    if binning == "bins":
        return grid_from_samples(x, bins_per_dim), f"bins={bins_per_dim}"
    if binning == "width":
        width = scott_width(x.shape[0], x.shape[1], c)
        return grid_from_width(x, width), f"width={width:.6g}"
    raise ArgumentError(f"Unknown binning rule: {binning}")


def _binning_param(binning: Binning, bins_per_dim: int, c: float) -> tuple[str, float]:
    return ("bins", float(bins_per_dim)) if binning == "bins" else ("c", float(c))


# ============================================
# Estimators
# ============================================

def estimate_hist(samples: np.ndarray, grid: BinningGrid, param: tuple[str, float], label: str) -> EstimateRecord:
    """Histogram plug-in entropy on a prepared grid."""
    start = time.perf_counter()
    x = as_samples(samples)
    h = build_histogram(x, grid)
    estimate = histogram_entropy(h)
    return EstimateRecord(
        method="hist",
        param_name=param[0],
        param_value=param[1],
        s=x.shape[0],
        d=x.shape[1],
        binning=label,
        estimate=estimate,
        occupancy=occupancy(h),
        nnz_bins=h.counts.nnz,
        total_bins=grid.size,
        outside_samples=h.outside,
        runtime_ms=1000.0 * (time.perf_counter() - start),
    )


def fit_ptc(
    hist: HistogramDensity,
    rank: int,
    seed: int,
    deps: EstimationDependencies,
) -> tuple[PtcDensity, FitResult]:
    """Fit a rank-R CP-APR model to a histogram and wrap it as a density."""
    result = fit(hist.counts, deps.fit_config(rank, seed))
    return PtcDensity.from_model(result.model, hist.grid), result


def evaluate_ptc(
    density: PtcDensity,
    result: FitResult,
    hist: HistogramDensity,
    label: str,
    deps: EstimationDependencies,
    *,
    tau: float | None = None,
    top_t: int | None = None,
    mc_draws: int | None = None,
    seed: int = 0,
    fit_ms: float = 0.0,
) -> EstimateRecord:
    """Entropy of a fitted PTC density.

    Exactly one evaluation mode applies: ``tau`` thresholding, ``top_t``
    pruning, Monte-Carlo with ``mc_draws``, or the full enumeration.

    Raises:
        CapacityError: If the chosen evaluation exceeds the enumeration budget
    """
    if sum(v is not None for v in (tau, top_t, mc_draws)) > 1:
        raise ArgumentError("Choose at most one of tau, top-t and Monte-Carlo evaluation")
    start = time.perf_counter()
    grid = density.grid
    record = dict(
        method="ptc",
        param_name="rank",
        param_value=float(density.model.rank),
        s=hist.total_samples,
        d=grid.ndim,
        binning=label,
        occupancy=occupancy(hist),
        nnz_bins=hist.counts.nnz,
        total_bins=grid.size,
        outside_samples=hist.outside,
        loglik_initial=result.loglik_trace[0] if result.loglik_trace else None,
        loglik_final=result.final_loglik if result.loglik_trace else None,
        fit_iterations=result.outer_iterations,
        converged=result.converged,
        kkt_violation=result.final_kkt_violation,
    )
    details: list[str] = []
    if tau is not None:
        report = ptc_entropy_thresholded(density, tau, deps.enumeration_budget)
        record.update(
            estimate=report.entropy_estimate,
            retained_mass_fraction=report.retained_mass_fraction,
            retained_terms=report.retained_terms,
        )
        details.append(f"tau={tau:g}")
    elif top_t is not None:
        report = ptc_entropy_top_t(density, top_t, deps.enumeration_budget)
        record.update(
            estimate=report.entropy_estimate,
            retained_mass_fraction=report.retained_mass_fraction,
            retained_terms=report.retained_terms,
        )
        details.append(f"top_t={top_t}")
    elif mc_draws is not None:
        estimate, stderr = ptc_entropy_mc(density, mc_draws, seed)
        record.update(estimate=estimate, stderr=stderr)
        details.append(f"mc_draws={mc_draws}")
    else:
        if grid.size > deps.enumeration_budget:
            raise CapacityError(
                f"Full PTC entropy over {grid.size:,} bins exceeds the enumeration budget of "
                f"{deps.enumeration_budget:,}; use --tau, --top-t or --mc-draws",
                required=grid.size,
                budget=deps.enumeration_budget,
            )
        record.update(estimate=ptc_entropy(density, deps.enumeration_budget), retained_mass_fraction=1.0)
    if grid.size <= min(SPARSITY_SCAN_LIMIT, deps.enumeration_budget):
        record["model_zero_fraction"] = model_zero_fraction(density, budget=deps.enumeration_budget)
    record["runtime_ms"] = fit_ms + 1000.0 * (time.perf_counter() - start)
    record["detail"] = ";".join(details)
    return EstimateRecord(**record)


def estimate_knn(samples: np.ndarray, k: int, deps: EstimationDependencies, seed: int = 0) -> EstimateRecord:
    """Kozachenko-Leonenko estimate with the configured tie policy."""
    start = time.perf_counter()
    x = as_samples(samples)
    estimate = knn_entropy(
        x,
        k,
        tie_policy=deps.knn_tie_policy,
        floor=deps.knn_distance_floor,
        seed=seed,
    )
    return EstimateRecord(
        method="knn",
        param_name="k",
        param_value=float(k),
        s=x.shape[0],
        d=x.shape[1],
        estimate=estimate,
        runtime_ms=1000.0 * (time.perf_counter() - start),
    )


def estimate_entropy(
    samples: np.ndarray,
    method: EstimateMethod,
    deps: EstimationDependencies,
    *,
    rank: int = 1,
    k: int = 5,
    binning: Binning = "bins",
    bins_per_dim: int = 20,
    c: float = DEFAULT_WIDTH_CONSTANT,
    tau: float | None = None,
    top_t: int | None = None,
    mc_draws: int | None = None,
    seed: int = 0,
) -> EstimateRecord:
    """Estimate the differential entropy of a sample with one method.

    Args:
        samples: (s, d) matrix
        method: ``hist``, ``ptc`` or ``knn``
        deps: Estimation dependencies
        rank: CP rank for ``ptc``
        k: Neighbor order for ``knn``
        binning: Grid rule for ``hist`` and ``ptc``
        bins_per_dim: Bins per dimension for the ``bins`` rule
        c: Width constant for the ``width`` rule
        tau: Factor threshold for ``ptc``
        top_t: Entries kept per factor column for ``ptc``
        mc_draws: Monte-Carlo draws for ``ptc``
        seed: Seed for the fit initialization and Monte-Carlo draws

    Returns:
        EstimateRecord
    """
    x = as_samples(samples)
    if method == "knn":
        return estimate_knn(x, k, deps, seed)
    if method not in ("hist", "ptc"):
        raise ArgumentError(f"Unknown method: {method}")

    grid, label = make_grid(x, binning, bins_per_dim, c)
    if method == "hist":
        return estimate_hist(x, grid, _binning_param(binning, bins_per_dim, c), label)

    start = time.perf_counter()
    hist = build_histogram(x, grid)
    density, result = fit_ptc(hist, rank, seed, deps)
    fit_ms = 1000.0 * (time.perf_counter() - start)
    _log.info("Rank-%d fit on %s: %d iterations, loglik %.6g", rank, label, result.outer_iterations, result.final_loglik)
    return evaluate_ptc(
        density,
        result,
        hist,
        label,
        deps,
        tau=tau,
        top_t=top_t,
        mc_draws=mc_draws,
        seed=seed,
        fit_ms=fit_ms,
    )
