"""Command-line interface: sample, estimate, experiment and ingest-check.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from . import __version__
from .dependencies import EstimationDependencies
from .errors import ArgumentError, CapacityError, IngestError, PtcError
from .experiment import run_experiment
from .io import ingest_csv, write_samples_csv
from .pipeline import create_dependencies, estimate_entropy
from .presets import get_catalog, normalize_preset_name
from .samplers import sample, true_entropy
from .settings import ExperimentConfig, Settings, load_experiment_config, load_settings

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

# --mc-draws given without a count: use Settings.mc_draws
CONFIGURED_DRAWS = 0

_log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _status(emoji: str, message: str) -> None:
    print(f"{emoji} {message}", file=sys.stderr)


# ============================================
# Parser
# ============================================

def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=None, help="Base RNG seed")
    parent.add_argument("--out", type=Path, default=None, help="Output path")
    parent.add_argument("--jobs", type=int, default=None, help="Concurrent trials")
    parent.add_argument("--config", type=Path, default=None, help="key=value config file (PTC_EXP_* keys)")
    parent.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parent


def _distribution_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("distribution")
    group.add_argument(
        "--family",
        choices=["uniform", "gaussian", "correlated_gaussian", "student_t", "gaussian_mixture"],
        default=None,
    )
    group.add_argument("--dim", type=int, default=None)
    group.add_argument("--low", type=float, default=None, help="Uniform cube lower bound")
    group.add_argument("--high", type=float, default=None, help="Uniform cube upper bound")
    group.add_argument("--dof", type=float, default=None, help="Student t degrees of freedom")
    group.add_argument("--components", type=int, default=None, help="Mixture components")
    group.add_argument("--separation", type=float, default=None, help="Mixture mode distance")
    return parent


def _input_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("csv input")
    group.add_argument("--columns", nargs="+", default=None, help="Feature column names or indices")
    group.add_argument("--filter-column", default=None, help="Keep rows whose label column ...")
    group.add_argument("--filter-value", default=None, help="... equals this value")
    return parent


def _ptc_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--tau", type=float, default=None, help="Factor-entry threshold in [0, 1)")
    group.add_argument("--top-t", type=int, default=None, help="Keep the t largest entries per factor column")
    group.add_argument(
        "--mc-draws",
        type=int,
        nargs="?",
        const=CONFIGURED_DRAWS,
        default=None,
        help="Monte-Carlo PTC entropy with this many draws (PTC_MC_DRAWS when no count is given)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ptc-entropy", description="Entropy estimation with Poisson tensor completion")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, dist, inp = _common_parent(), _distribution_parent(), _input_parent()

    p = sub.add_parser("sample", parents=[common, dist], help="Draw a seeded sample and write it as CSV")
    p.add_argument("--s", type=int, required=True, help="Number of samples")

    p = sub.add_parser("estimate", parents=[common, dist, inp], help="Estimate entropy of one sample")
    p.add_argument("--input", type=Path, default=None, help="Sample CSV (instead of a distribution)")
    p.add_argument("--s", type=int, default=None, help="Sample size when drawing from a distribution")
    p.add_argument("--method", choices=["hist", "ptc", "knn"], default="ptc")
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--k", type=int, default=5)
    p.add_argument(
        "--binning",
        choices=["bins", "width"],
        default=None,
        help="Default: width rule for hist without --bins, bins per dimension otherwise",
    )
    p.add_argument("--bins", type=int, default=None, help="Bins per dimension")
    p.add_argument("--c", type=float, default=3.5, help="Width-rule constant")
    _ptc_options(p)

    p = sub.add_parser("experiment", parents=[common, dist, inp], help="Run a multi-trial experiment")
    p.add_argument("--preset", default=None, help="Named experiment preset")
    p.add_argument("--list-presets", action="store_true", help="List presets and exit")
    p.add_argument("--input", type=Path, default=None, help="Sample CSV to subsample per trial")
    p.add_argument("--truth", type=float, default=None, help="Known entropy for error columns")
    p.add_argument("--sizes", type=int, nargs="+", default=None, help="Sample sizes")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--methods", choices=["hist", "ptc", "knn"], nargs="+", default=None)
    p.add_argument("--ptc-binning", choices=["bins", "width"], default=None)
    p.add_argument("--hist-binning", choices=["bins", "width"], default=None)
    p.add_argument("--bins", type=int, default=None, help="Bins per dimension")
    p.add_argument("--c-values", type=float, nargs="+", default=None)
    p.add_argument("--ranks", type=int, nargs="+", default=None)
    p.add_argument("--k-values", type=int, nargs="+", default=None)
    p.add_argument("--tau-values", type=float, nargs="+", default=None)
    p.add_argument("--top-t-values", type=int, nargs="+", default=None)
    p.add_argument("--mc-draws", type=int, nargs="?", const=CONFIGURED_DRAWS, default=None)
    p.add_argument("--selection", choices=["report-all", "oracle-best"], default=None)
    p.add_argument("--reference-samples", type=int, default=None)
    p.add_argument("--reference-trials", type=int, default=None)

    p = sub.add_parser("ingest-check", parents=[common, inp], help="Validate a CSV and report row accounting")
    p.add_argument("csv_path", type=Path)
    return parser


# ============================================
# Commands
# ============================================

def _mc_draws(args: argparse.Namespace, deps: EstimationDependencies) -> int | None:
    if args.mc_draws == CONFIGURED_DRAWS:
        return deps.mc_draws
    return args.mc_draws


def _binning(args: argparse.Namespace) -> str:
    if args.binning is not None:
        return args.binning
    return "width" if args.method == "hist" and args.bins is None else "bins"


def _experiment_config(args: argparse.Namespace, **extra) -> ExperimentConfig:
    overrides = dict(
        family=getattr(args, "family", None),
        dim=getattr(args, "dim", None),
        low=getattr(args, "low", None),
        high=getattr(args, "high", None),
        dof=getattr(args, "dof", None),
        components=getattr(args, "components", None),
        separation=getattr(args, "separation", None),
        seed=args.seed,
    )
    overrides.update(extra)
    preset = None
    if getattr(args, "preset", None):
        found = get_catalog().get_preset(args.preset)
        if found is None:
            raise ArgumentError(f"Unknown preset: {args.preset} (canonical: {normalize_preset_name(args.preset)})")
        preset = found.overrides
    return load_experiment_config(args.config, preset=preset, **overrides)


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    config = _experiment_config(args)
    spec = config.distribution()
    if spec is None:
        raise ArgumentError("sample needs --family")
    x = sample(spec, args.s, config.seed)
    write_samples_csv(x, args.out)
    if args.out is not None:
        _status("✅", f"Wrote {x.shape[0]} x {x.shape[1]} samples to {args.out}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, settings: Settings) -> int:
    deps = create_dependencies(settings)
    truth = None
    if args.input is not None:
        x = ingest_csv(args.input, args.columns, args.filter_column, args.filter_value).samples
        seed = args.seed or 0
    else:
        if args.s is None:
            raise ArgumentError("estimate needs --input or a distribution with --s")
        config = _experiment_config(args)
        spec = config.distribution()
        if spec is None:
            raise ArgumentError("estimate needs --input or --family")
        seed = config.seed
        x = sample(spec, args.s, seed)
        truth = true_entropy(spec)

    record = estimate_entropy(
        x,
        args.method,
        deps,
        rank=args.rank,
        k=args.k,
        binning=_binning(args),
        bins_per_dim=args.bins or settings.default_bins_per_dim,
        c=args.c,
        tau=args.tau,
        top_t=args.top_t,
        mc_draws=_mc_draws(args, deps),
        seed=seed,
    )
    payload = record.model_dump(mode="json")
    payload["truth"] = truth
    line = json.dumps(payload)
    if args.out is None:
        print(line)
    else:
        Path(args.out).write_text(line + "\n", encoding="utf-8")
        _status("✅", f"Wrote estimate to {args.out}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace, settings: Settings) -> int:
    if args.list_presets:
        for preset in get_catalog().list_presets():
            print(f"{preset.id:<20} {preset.runtime_hint:<10} {preset.description}")
        return EXIT_OK

    deps = create_dependencies(settings)
    config = _experiment_config(
        args,
        input_csv=args.input,
        feature_columns=args.columns,
        filter_column=args.filter_column,
        filter_value=args.filter_value,
        truth=args.truth,
        sample_sizes=args.sizes,
        trials=args.trials,
        methods=args.methods,
        ptc_binning=args.ptc_binning,
        hist_binning=args.hist_binning,
        bins_per_dim=args.bins,
        c_values=args.c_values,
        ranks=args.ranks,
        k_values=args.k_values,
        tau_values=args.tau_values,
        top_t_values=args.top_t_values,
        mc_draws=_mc_draws(args, deps),
        selection=args.selection,
        reference_samples=args.reference_samples,
        reference_trials=args.reference_trials,
        jobs=args.jobs,
        out=args.out,
    )
    _status("🔧", f"Running experiment ({config.trials} trials, sizes {config.sample_sizes})")
    result = asyncio.run(run_experiment(config, deps))
    csv_path, summary_path = result.write(config.out)
    _status("✅", f"Wrote {len(result.rows)} rows to {csv_path} and summary to {summary_path}")
    if result.failures:
        _status("⚠️ ", f"{result.failures} rows failed; see error_tag")
    if result.all_failed:
        _status("❌", "Every row failed")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_ingest_check(args: argparse.Namespace, settings: Settings) -> int:
    result = ingest_csv(args.csv_path, args.columns, args.filter_column, args.filter_value)
    report = {
        "rows": int(result.samples.shape[0]),
        "dims": int(result.samples.shape[1]),
        "dropped": result.dropped,
        "filtered": result.filtered,
        "header": result.header,
        "columns": result.columns,
    }
    print(json.dumps(report))
    if args.out is not None:
        write_samples_csv(result.samples, args.out)
        _status("✅", f"Wrote cleaned samples to {args.out}")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "ingest-check": cmd_ingest_check,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None and not args.config.is_file():
            raise FileNotFoundError(f"Config file not found: {args.config}")
        env_files = (".env", args.config) if args.config is not None else ".env"
        settings = load_settings(env_files)
        configure_logging(args.log_level or settings.log_level)
        return COMMANDS[args.command](args, settings)
    except IngestError as e:
        _status("❌", f"Ingest error: {e}")
        return EXIT_IO
    except OSError as e:
        _status("❌", f"I/O error: {e}")
        return EXIT_IO
    except CapacityError as e:
        _status("❌", f"Capacity error: {e}")
        return EXIT_USAGE
    except (ArgumentError, ValidationError, ValueError) as e:
        _status("❌", f"Usage error: {e}")
        return EXIT_USAGE
    except (PtcError, ArithmeticError) as e:
        _status("❌", f"Numerical failure: {e}")
        return EXIT_NUMERICAL


def run() -> None:
    sys.exit(main())
