"""Tests for settings and experiment configuration loading."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from ptc_entropy.settings import (
    DEFAULT_K_VALUES,
    ExperimentConfig,
    Settings,
    load_experiment_config,
    load_settings,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Drop PTC_* variables inherited from the shell."""
    import os

    for key in list(os.environ):
        if key.upper().startswith("PTC_"):
            monkeypatch.delenv(key)


class TestSettings:
    """Test suite for process-wide settings."""

    def test_defaults(self):
        settings = Settings(_env_file=None)
        assert settings.log_level == "INFO"
        assert settings.enumeration_budget == 10**8
        assert settings.mc_draws == 200_000
        assert settings.max_outer_iters == 200
        assert settings.kkt_tol == 1e-4
        assert settings.knn_tie_policy == "floor"

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("PTC_ENUMERATION_BUDGET", "12345")
        monkeypatch.setenv("ptc_knn_tie_policy", "raise")
        settings = load_settings(env_file=None)
        assert settings.enumeration_budget == 12345
        assert settings.knn_tie_policy == "raise"

    def test_env_file(self, tmp_path):
        env = tmp_path / "test.env"
        env.write_text("PTC_MAX_PARALLEL_JOBS=9\nPTC_LOG_LEVEL=DEBUG\n")
        settings = load_settings(env_file=env)
        assert settings.max_parallel_jobs == 9
        assert settings.log_level == "DEBUG"

    def test_invalid_value(self, monkeypatch):
        """Test that bad values surface as ValueError with a hint."""
        monkeypatch.setenv("PTC_KKT_TOL", "-1")
        with pytest.raises(ValueError, match="PTC_"):
            load_settings(env_file=None)


class TestExperimentConfig:
    """Test suite for experiment configuration."""

    def test_defaults(self):
        config = ExperimentConfig(_env_file=None, family="gaussian")
        assert config.sample_sizes == [2500]
        assert config.trials == 25
        assert config.ranks == [1, 2, 3, 4, 5]
        assert config.k_values == DEFAULT_K_VALUES
        assert config.c_values == [3.5]
        assert config.selection == "report-all"
        assert config.mc_draws is None
        assert config.jobs is None

    def test_needs_a_source(self):
        with pytest.raises(ValidationError, match="family or an input CSV"):
            ExperimentConfig(_env_file=None)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("sample_sizes", [1]),
            ("sample_sizes", []),
            ("ranks", [0]),
            ("k_values", [3, -1]),
            ("c_values", [0.0]),
            ("tau_values", [1.0]),
            ("methods", []),
            ("methods", ["kde"]),
            ("trials", 0),
        ],
    )
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ValidationError):
            ExperimentConfig(_env_file=None, family="uniform", **{field: value})

    def test_distribution(self):
        spec = ExperimentConfig(_env_file=None, family="uniform", dim=3, high=2.0).distribution()
        assert spec.family == "uniform" and spec.high == [2.0] * 3
        spec = ExperimentConfig(_env_file=None, family="gaussian_mixture", dim=3, components=3).distribution()
        assert spec.n_components == 3
        spec = ExperimentConfig(_env_file=None, family="correlated_gaussian", dim=2).distribution()
        assert spec.cov == [[1.0, 0.5], [0.5, 1.0]]
        assert ExperimentConfig(_env_file=None, input_csv=Path("x.csv")).distribution() is None


class TestLoadExperimentConfig:
    """Test suite for layered configuration."""

    def test_config_file(self, tmp_path):
        path = tmp_path / "experiment.env"
        path.write_text("PTC_EXP_FAMILY=student_t\nPTC_EXP_DIM=3\nPTC_EXP_RANKS=[1,4]\nPTC_EXP_TRIALS=2\n")
        config = load_experiment_config(config_file=path)
        assert config.family == "student_t"
        assert config.dim == 3
        assert config.ranks == [1, 4]
        assert config.trials == 2

    def test_priority(self, tmp_path, monkeypatch):
        """Test flags > preset > environment > config file."""
        path = tmp_path / "experiment.env"
        path.write_text("PTC_EXP_FAMILY=gaussian\nPTC_EXP_DIM=2\nPTC_EXP_TRIALS=2\nPTC_EXP_SEED=1\n")
        monkeypatch.setenv("PTC_EXP_DIM", "4")
        monkeypatch.setenv("PTC_EXP_TRIALS", "3")
        config = load_experiment_config(
            config_file=path,
            preset={"trials": 5, "seed": 6},
            seed=9,
        )
        assert config.family == "gaussian"
        assert config.dim == 4
        assert config.trials == 5
        assert config.seed == 9

    def test_none_overrides_ignored(self):
        config = load_experiment_config(preset={"family": "uniform", "trials": 4}, trials=None)
        assert config.trials == 4

    def test_process_settings_do_not_leak(self, monkeypatch):
        """Test that PTC_* process settings are not read as experiment fields."""
        monkeypatch.setenv("PTC_MC_DRAWS", "200000")
        monkeypatch.setenv("PTC_MAX_PARALLEL_JOBS", "7")
        monkeypatch.setenv("PTC_DIM", "5")
        config = load_experiment_config(family="uniform")
        assert config.mc_draws is None
        assert config.dim == 2
        assert config.jobs is None

    def test_experiment_prefix(self, monkeypatch):
        monkeypatch.setenv("PTC_EXP_MC_DRAWS", "5000")
        monkeypatch.setenv("PTC_EXP_JOBS", "3")
        config = load_experiment_config(family="uniform")
        assert config.mc_draws == 5000
        assert config.jobs == 3
