"""Settings module for the PTC entropy toolkit.

Loads and validates configuration using pydantic-settings. ``Settings``
holds process-wide knobs read from the environment / ``.env``;
``ExperimentConfig`` describes one experiment and can be filled from a
key=value config file, environment variables and CLI flags (flags win).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Literal, Sequence

from dotenv import load_dotenv
from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .samplers import DistributionSpec, equidistant_mixture

ExperimentFamily = Literal["uniform", "gaussian", "correlated_gaussian", "student_t", "gaussian_mixture"]
Method = Literal["hist", "ptc", "knn"]
Binning = Literal["bins", "width"]

DEFAULT_K_VALUES = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 25, 50, 100, 200]


class Settings(BaseSettings):
    """Process-wide settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="PTC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO", description="Root log level")

    # Performance & Limits
    max_parallel_jobs: int = Field(default=4, ge=1, description="Concurrent experiment trials")
    enumeration_budget: int = Field(default=10**8, ge=1, description="Max bins enumerated for full PTC sums")
    mc_draws: int = Field(default=200_000, ge=2, description="Default Monte-Carlo draws for PTC entropy")

    # Binning
    default_bins_per_dim: int = Field(default=20, ge=1, description="Bins per dimension for tensors")

    # CP-APR
    max_outer_iters: int = Field(default=200, ge=1)
    max_inner_iters: int = Field(default=10, ge=1)
    kkt_tol: float = Field(default=1e-4, gt=0)
    log_shift: float = Field(default=1e-10, gt=0)

    # k-NN
    knn_distance_floor: float = Field(default=1e-12, gt=0)
    knn_tie_policy: Literal["floor", "jitter", "raise"] = Field(default="floor")


def load_settings(env_file: str | Path | Sequence[str | Path] | None = ".env") -> Settings:
    """Load and validate settings from the environment.

    Raises:
        ValueError: If a PTC_* variable holds an invalid value
    """
    load_dotenv()
    try:
        return Settings(_env_file=env_file)
    except Exception as e:
        error_msg = f"Failed to load settings: {e}"
        error_msg += "\n\n🔍 Check the PTC_* variables in your environment or .env file."
        error_msg += "\nCopy .env.example to .env for the documented keys."
        raise ValueError(error_msg) from e


class ExperimentConfig(BaseSettings):
    """Configuration of a multi-trial entropy experiment.

    List fields are JSON arrays in config files and environment variables,
    e.g. ``PTC_EXP_RANKS=[1,2,3]``. The ``PTC_EXP_`` prefix keeps experiment
    keys apart from the process-wide ``PTC_*`` settings loaded from ``.env``.
    """

    model_config = SettingsConfigDict(
        env_prefix="PTC_EXP_",
        env_file=None,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Data source: a distribution ...
    family: ExperimentFamily | None = Field(default=None)
    dim: int = Field(default=2, ge=1)
    low: float = Field(default=0.0, description="Uniform cube lower bound")
    high: float = Field(default=1.0, description="Uniform cube upper bound")
    dof: float = Field(default=1.0, gt=0, description="Student t degrees of freedom")
    components: int = Field(default=3, ge=1, description="Mixture components")
    separation: float = Field(default=10.0, gt=0, description="Distance between mixture modes")
    # ... or a CSV file
    input_csv: Path | None = Field(default=None)
    feature_columns: list[str] | None = Field(default=None)
    filter_column: str | None = Field(default=None)
    filter_value: str | None = Field(default=None)
    truth: float | None = Field(default=None, description="Known entropy overriding the closed form")

    # Protocol
    sample_sizes: list[int] = Field(default_factory=lambda: [2500])
    trials: int = Field(default=25, ge=1)
    methods: list[Method] = Field(default_factory=lambda: ["hist", "ptc", "knn"])
    ptc_binning: Binning = Field(default="bins")
    hist_binning: Binning = Field(default="width")
    bins_per_dim: int = Field(default=20, ge=1)
    c_values: list[float] = Field(default_factory=lambda: [3.5])
    ranks: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    k_values: list[int] = Field(default_factory=lambda: list(DEFAULT_K_VALUES))
    tau_values: list[float] = Field(default_factory=list)
    top_t_values: list[int] = Field(default_factory=list)
    mc_draws: int | None = Field(default=None, ge=2)
    selection: Literal["report-all", "oracle-best"] = Field(default="report-all")
    reference_samples: int | None = Field(default=None, ge=2)
    reference_trials: int = Field(default=25, ge=1)

    # Execution
    seed: int = Field(default=0)
    jobs: int | None = Field(default=None, ge=1, description="Concurrent trials; None uses Settings.max_parallel_jobs")
    out: Path = Field(default=Path("results.csv"))

    @field_validator("sample_sizes")
    @classmethod
    def _check_sizes(cls, v: list[int]) -> list[int]:
        if not v or any(s < 2 for s in v):
            raise ValueError("sample_sizes must be non-empty and every size >= 2")
        return v

    @field_validator("ranks", "k_values", "top_t_values")
    @classmethod
    def _check_positive_ints(cls, v: list[int]) -> list[int]:
        if any(x < 1 for x in v):
            raise ValueError("ranks, k values and top-t values must be >= 1")
        return v

    @field_validator("c_values")
    @classmethod
    def _check_c(cls, v: list[float]) -> list[float]:
        if not v or any(not (c > 0 and math.isfinite(c)) for c in v):
            raise ValueError("c_values must be non-empty and positive")
        return v

    @field_validator("tau_values")
    @classmethod
    def _check_tau(cls, v: list[float]) -> list[float]:
        if any(not 0 <= t < 1 for t in v):
            raise ValueError("tau values must lie in [0, 1)")
        return v

    @model_validator(mode="after")
    def _check_source(self) -> ExperimentConfig:
        if self.family is None and self.input_csv is None:
            raise ValueError("Set a distribution family or an input CSV")
        if not self.methods:
            raise ValueError("Select at least one method")
        return self

    def distribution(self) -> DistributionSpec | None:
        """DistributionSpec for the configured family, None for CSV input."""
        d = self.dim
        if self.family is None:
            return None
        if self.family == "uniform":
            return DistributionSpec.uniform_cube(d, self.low, self.high)
        if self.family == "gaussian":
            return DistributionSpec.standard_normal(d)
        if self.family == "correlated_gaussian":
            return DistributionSpec.correlated_normal(d)
        if self.family == "student_t":
            return DistributionSpec.student_t(d, self.dof)
        return equidistant_mixture(self.components, d, self.separation)


def load_experiment_config(
    config_file: str | Path | None = None,
    preset: dict[str, Any] | None = None,
    **overrides: Any,
) -> ExperimentConfig:
    """Build an ExperimentConfig.

    Priority: explicit overrides (CLI flags) > preset values > environment
    variables > config file > defaults. None-valued overrides are ignored.
    """
    values = dict(preset or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(_env_file=config_file, **values)
