"""Multi-trial entropy experiments.

Runs the (trial x sample size x method x hyperparameter) cross product,
each (trial, s) pair on its own seeded sample in a worker thread, and
writes a versioned results CSV plus a JSON summary.
"""

from __future__ import annotations

import asyncio
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel

from .dependencies import EstimationDependencies
from .errors import ArgumentError, PtcError
from .histogram import as_samples, build_histogram
from .io import ingest_csv
from .pipeline import (
    EstimateRecord,
    _binning_param,
    estimate_hist,
    estimate_knn,
    evaluate_ptc,
    fit_ptc,
    make_grid,
)
from .samplers import DistributionSpec, sample, true_entropy
from .settings import ExperimentConfig

_log = logging.getLogger(__name__)

RESULTS_VERSION = "1"
RESULTS_HEADER_COMMENT = f"# ptc-entropy results v{RESULTS_VERSION}"
REFERENCE_SEED_OFFSET = 1_000_000
METHOD_ORDER = {"hist": 0, "ptc": 1, "knn": 2}

RESULT_COLUMNS = [
    "trial",
    "method",
    "param_name",
    "param_value",
    "s",
    "d",
    "bins_per_dim_or_width",
    "estimate",
    "truth",
    "abs_error",
    "rel_error",
    "occupancy",
    "nnz_bins",
    "total_bins",
    "seed",
    "runtime_ms",
    "error_tag",
    # trailing extras
    "reference",
    "retained_mass_fraction",
    "detail",
]

# Failures that become tagged rows instead of aborting the experiment.
TRIAL_ERRORS = (PtcError, ValueError, ArithmeticError, np.linalg.LinAlgError)


class ResultRow(BaseModel):
    """One line of the results CSV."""

    trial: int
    method: str
    param_name: str
    param_value: float
    s: int
    d: int
    bins_per_dim_or_width: str = ""
    estimate: float | None = None
    truth: float | None = None
    abs_error: float | None = None
    rel_error: float | None = None
    occupancy: float | None = None
    nnz_bins: int | None = None
    total_bins: int | None = None
    seed: int
    runtime_ms: float = 0.0
    error_tag: str = ""
    reference: bool = False
    retained_mass_fraction: float | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error_tag)

    @classmethod
    def from_record(cls, record: EstimateRecord, trial: int, seed: int, truth: float | None) -> ResultRow:
        abs_error = rel_error = None
        if truth is not None:
            abs_error = abs(record.estimate - truth)
            rel_error = abs_error / abs(truth) if truth != 0 else None
        return cls(
            trial=trial,
            method=record.method,
            param_name=record.param_name,
            param_value=record.param_value,
            s=record.s,
            d=record.d,
            bins_per_dim_or_width=record.binning,
            estimate=record.estimate,
            truth=truth,
            abs_error=abs_error,
            rel_error=rel_error,
            occupancy=record.occupancy,
            nnz_bins=record.nnz_bins,
            total_bins=record.total_bins,
            seed=seed,
            runtime_ms=record.runtime_ms,
            retained_mass_fraction=record.retained_mass_fraction,
            detail=record.detail,
        )

    def csv_fields(self) -> list[str]:
        out = []
        for name in RESULT_COLUMNS:
            value = getattr(self, name)
            if value is None:
                out.append("")
            elif isinstance(value, bool):
                out.append("true" if value else "false")
            elif isinstance(value, float):
                out.append(repr(value))
            else:
                out.append(str(value))
        return out


def _sort_key(row: ResultRow) -> tuple:
    return (
        not row.reference,
        row.s,
        row.trial,
        METHOD_ORDER.get(row.method, 99),
        row.param_name,
        row.param_value,
        row.detail,
    )


@dataclass
class ExperimentResult:
    """Rows and summary of a finished experiment."""

    rows: list[ResultRow]
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def all_failed(self) -> bool:
        trial_rows = [r for r in self.rows if not r.reference]
        return bool(trial_rows) and all(r.failed for r in trial_rows)

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.rows)

    def write(self, out: str | Path) -> tuple[Path, Path]:
        """Write the results CSV and ``<out stem>.summary.json`` next to it."""
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as f:
            f.write(RESULTS_HEADER_COMMENT + "\n")
            writer = csv.writer(f)
            writer.writerow(RESULT_COLUMNS)
            for row in self.rows:
                writer.writerow(row.csv_fields())
        summary_path = out.with_suffix(".summary.json")
        summary_path.write_text(json.dumps(self.summary, indent=2) + "\n", encoding="utf-8")
        return out, summary_path


def read_results_csv(path: str | Path) -> list[dict[str, str]]:
    """Read a results CSV back as dicts, skipping the version comment."""
    with open(path, newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


# ============================================
# Summary
# ============================================

def _stat(values: list[float], fn: Callable) -> float | None:
    return float(fn(values)) if values else None


def summarize(rows: list[ResultRow], selection: str = "report-all") -> dict[str, Any]:
    """Aggregate rows per (method, param, detail, s) cell.

    In ``oracle-best`` mode also picks, per (method, s, trial), the
    hyperparameter with the smallest error against the known truth.
    """
    cells: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        if row.reference:
            continue
        key = (row.method, row.param_name, row.param_value, row.detail, row.s)
        cells.setdefault(key, []).append(row)

    cell_summaries = []
    for (method, param_name, param_value, detail, s), group in sorted(
        cells.items(), key=lambda kv: (kv[0][4], METHOD_ORDER.get(kv[0][0], 99), *kv[0][1:4])
    ):
        ok = [r for r in group if not r.failed]
        estimates = [r.estimate for r in ok]
        errors = [r.abs_error for r in ok if r.abs_error is not None]
        rel = [r.rel_error for r in ok if r.rel_error is not None]
        cell_summaries.append(
            {
                "method": method,
                "param_name": param_name,
                "param_value": param_value,
                "detail": detail,
                "s": s,
                "rows": len(group),
                "failures": len(group) - len(ok),
                "mean_estimate": _stat(estimates, np.mean),
                "median_estimate": _stat(estimates, np.median),
                "mean_abs_error": _stat(errors, np.mean),
                "median_abs_error": _stat(errors, np.median),
                "min_abs_error": _stat(errors, np.min),
                "median_rel_error": _stat(rel, np.median),
            }
        )

    reference = [r.estimate for r in rows if r.reference and not r.failed]
    summary: dict[str, Any] = {
        "version": RESULTS_VERSION,
        "selection": selection,
        "truth": next((r.truth for r in rows if r.truth is not None), None),
        "reference_rows": len(reference),
        "reference_mean": _stat(reference, np.mean),
        "cells": cell_summaries,
    }
    if selection == "oracle-best":
        summary.update(_oracle_best(rows))
    return summary


def _oracle_best(rows: list[ResultRow]) -> dict[str, Any]:
    best: dict[tuple, ResultRow] = {}
    for row in rows:
        if row.reference or row.failed or row.abs_error is None:
            continue
        key = (row.method, row.s, row.trial)
        if key not in best or row.abs_error < best[key].abs_error:
            best[key] = row
    if not best:
        return {"oracle_best": [], "oracle_best_cells": [], "oracle_best_note": "no truth available"}

    picks = [
        {
            "method": r.method,
            "s": r.s,
            "trial": r.trial,
            "param_name": r.param_name,
            "param_value": r.param_value,
            "detail": r.detail,
            "estimate": r.estimate,
            "abs_error": r.abs_error,
            "rel_error": r.rel_error,
        }
        for _, r in sorted(best.items(), key=lambda kv: (kv[0][1], METHOD_ORDER.get(kv[0][0], 99), kv[0][2]))
    ]
    grouped: dict[tuple, list[ResultRow]] = {}
    for (method, s, _), r in best.items():
        grouped.setdefault((method, s), []).append(r)
    cells = []
    for (method, s), group in sorted(grouped.items(), key=lambda kv: (kv[0][1], METHOD_ORDER.get(kv[0][0], 99))):
        rel = [r.rel_error for r in group if r.rel_error is not None]
        cells.append(
            {
                "method": method,
                "s": s,
                "trials": len(group),
                "median_abs_error": float(np.median([r.abs_error for r in group])),
                "mean_abs_error": float(np.mean([r.abs_error for r in group])),
                "median_rel_error": _stat(rel, np.median),
            }
        )
    return {
        "oracle_best": picks,
        "oracle_best_cells": cells,
        "oracle_best_note": "hyperparameters chosen by error against the known truth",
    }


# ============================================
# Trials
# ============================================

@dataclass
class SampleSource:
    """Where trial samples come from: a distribution or an ingested matrix."""

    spec: DistributionSpec | None = None
    data: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.spec.dim if self.spec is not None else int(self.data.shape[1])

    def draw(self, s: int, seed: int) -> np.ndarray:
        """Seeded sample of size s; CSV data is subsampled without replacement."""
        if self.spec is not None:
            return sample(self.spec, s, seed)
        n = self.data.shape[0]
        if s > n:
            raise ArgumentError(f"Requested s={s} samples but the input has only {n} rows")
        rows = np.random.default_rng(seed).choice(n, size=s, replace=False)
        return self.data[np.sort(rows)]


def load_source(config: ExperimentConfig) -> SampleSource:
    """Resolve the configured distribution or CSV into a SampleSource."""
    spec = config.distribution()
    if spec is not None:
        return SampleSource(spec=spec)
    ingested = ingest_csv(
        config.input_csv,
        config.feature_columns,
        config.filter_column,
        config.filter_value,
    )
    data = as_samples(ingested.samples)
    if max(config.sample_sizes) > data.shape[0]:
        raise ArgumentError(
            f"Largest sample size {max(config.sample_sizes)} exceeds the {data.shape[0]} valid rows of {config.input_csv}"
        )
    return SampleSource(data=data)


def _failed_row(
    method: str,
    param: tuple[str, float],
    trial: int,
    s: int,
    d: int,
    seed: int,
    truth: float | None,
    exc: Exception,
    detail: str = "",
    label: str = "",
) -> ResultRow:
    _log.warning("Trial %d (%s %s=%g, s=%d) failed: %s", trial, method, param[0], param[1], s, exc)
    return ResultRow(
        trial=trial,
        method=method,
        param_name=param[0],
        param_value=param[1],
        s=s,
        d=d,
        bins_per_dim_or_width=label,
        truth=truth,
        seed=seed,
        error_tag=type(exc).__name__,
        detail=detail,
    )


def _ptc_evaluations(config: ExperimentConfig) -> list[dict[str, Any]]:
    evaluations: list[dict[str, Any]] = [{"tau": t} for t in config.tau_values]
    evaluations += [{"top_t": t} for t in config.top_t_values]
    if config.mc_draws is not None:
        evaluations.append({"mc_draws": config.mc_draws})
    return evaluations or [{}]


def _describe(evaluation: dict[str, Any]) -> str:
    return ";".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in evaluation.items())


def _width_constants(config: ExperimentConfig, binning: str) -> list[float]:
    return list(config.c_values) if binning == "width" else [float("nan")]


def run_trial(
    config: ExperimentConfig,
    source: SampleSource,
    trial: int,
    s: int,
    truth: float | None,
    deps: EstimationDependencies,
) -> list[ResultRow]:
    """All method/hyperparameter rows of one (trial, s) pair.

    The trial seed ``config.seed + trial`` drives the sample, the CP-APR
    initialization and Monte-Carlo draws; every method sees the same sample.
    """
    seed = config.seed + trial
    d = source.dim
    x = source.draw(s, seed)
    rows: list[ResultRow] = []

    if "hist" in config.methods:
        for c in _width_constants(config, config.hist_binning):
            param = _binning_param(config.hist_binning, config.bins_per_dim, c)
            try:
                grid, label = make_grid(x, config.hist_binning, config.bins_per_dim, c)
                record = estimate_hist(x, grid, param, label)
                rows.append(ResultRow.from_record(record, trial, seed, truth))
            except TRIAL_ERRORS as e:
                rows.append(_failed_row("hist", param, trial, s, d, seed, truth, e))

    if "ptc" in config.methods:
        evaluations = _ptc_evaluations(config)
        for c in _width_constants(config, config.ptc_binning):
            # ptc rows carry the rank as parameter; c and the evaluation go to detail
            prefix = f"c={c:g}" if config.ptc_binning == "width" else ""
            details = [";".join(filter(None, [prefix, _describe(ev)])) for ev in evaluations]
            label = ""
            try:
                grid, label = make_grid(x, config.ptc_binning, config.bins_per_dim, c)
                hist = build_histogram(x, grid)
            except TRIAL_ERRORS as e:
                for rank in config.ranks:
                    for detail in details:
                        rows.append(_failed_row("ptc", ("rank", float(rank)), trial, s, d, seed, truth, e, detail))
                continue
            for rank in config.ranks:
                param = ("rank", float(rank))
                start = time.perf_counter()
                try:
                    density, result = fit_ptc(hist, rank, seed, deps)
                except TRIAL_ERRORS as e:
                    for detail in details:
                        rows.append(_failed_row("ptc", param, trial, s, d, seed, truth, e, detail, label))
                    continue
                fit_ms = 1000.0 * (time.perf_counter() - start)
                for ev, detail in zip(evaluations, details):
                    try:
                        record = evaluate_ptc(density, result, hist, label, deps, seed=seed, fit_ms=fit_ms, **ev)
                        record.detail = detail
                        rows.append(ResultRow.from_record(record, trial, seed, truth))
                    except TRIAL_ERRORS as e:
                        rows.append(_failed_row("ptc", param, trial, s, d, seed, truth, e, detail, label))

    if "knn" in config.methods:
        for k in config.k_values:
            try:
                record = estimate_knn(x, k, deps, seed)
                rows.append(ResultRow.from_record(record, trial, seed, truth))
            except TRIAL_ERRORS as e:
                rows.append(_failed_row("knn", ("k", float(k)), trial, s, d, seed, truth, e))

    return rows


def reference_row(
    config: ExperimentConfig,
    source: SampleSource,
    trial: int,
) -> ResultRow:
    """Large-sample width-rule histogram estimate used as truth for mixtures."""
    seed = config.seed + REFERENCE_SEED_OFFSET + trial
    s = config.reference_samples
    c = 3.5
    try:
        x = source.draw(s, seed)
        grid, label = make_grid(x, "width", c=c)
        record = estimate_hist(x, grid, ("c", c), label)
        row = ResultRow.from_record(record, trial, seed, None)
    except TRIAL_ERRORS as e:
        row = _failed_row("hist", ("c", c), trial, s, source.dim, seed, None, e)
    return row.model_copy(update={"reference": True})


def _with_truth(row: ResultRow, truth: float) -> ResultRow:
    if row.failed:
        return row.model_copy(update={"truth": truth})
    abs_error = abs(row.estimate - truth)
    rel_error = abs_error / abs(truth) if truth != 0 else None
    return row.model_copy(update={"truth": truth, "abs_error": abs_error, "rel_error": rel_error})


async def run_experiment(
    config: ExperimentConfig,
    deps: EstimationDependencies,
) -> ExperimentResult:
    """Run every (trial, s) pair concurrently.

    At most ``config.jobs`` pairs run at once, or ``deps.max_parallel_jobs``
    when the config leaves jobs unset.

    Args:
        config: Experiment configuration
        deps: Estimation dependencies

    Returns:
        ExperimentResult with rows in deterministic order and the summary
    """
    source = load_source(config)
    spec = source.spec
    truth = config.truth
    if truth is None and spec is not None:
        truth = true_entropy(spec)

    jobs = config.jobs or deps.max_parallel_jobs
    semaphore = asyncio.Semaphore(jobs)

    async def bounded(fn, *args):
        async with semaphore:
            return await asyncio.to_thread(fn, *args)

    reference_rows: list[ResultRow] = []
    if truth is None and config.reference_samples is not None:
        _log.info(
            "No closed-form entropy; computing %d reference histograms at s=%d",
            config.reference_trials,
            config.reference_samples,
        )
        reference_rows = list(
            await asyncio.gather(
                *(bounded(reference_row, config, source, t) for t in range(config.reference_trials))
            )
        )
        values = [r.estimate for r in reference_rows if not r.failed]
        if values:
            truth = float(np.mean(values))

    _log.info(
        "Running %d trials x %d sample sizes with methods %s (jobs=%d)",
        config.trials,
        len(config.sample_sizes),
        ",".join(config.methods),
        jobs,
    )
    batches = await asyncio.gather(
        *(
            bounded(run_trial, config, source, trial, s, truth, deps)
            for s in config.sample_sizes
            for trial in range(config.trials)
        )
    )
    rows = reference_rows + [row for batch in batches for row in batch]
    if truth is not None:
        rows = [r if r.reference or r.truth is not None else _with_truth(r, truth) for r in rows]
    rows.sort(key=_sort_key)

    result = ExperimentResult(rows=rows)
    result.summary = summarize(rows, config.selection)
    if result.failures:
        _log.warning("%d of %d rows failed", result.failures, len(rows))
    return result
