"""Dependencies module for the PTC entropy toolkit.

Defines the dependency dataclass passed to every pipeline call.
"""

from dataclasses import dataclass

from .cp_apr import FitConfig


@dataclass
class EstimationDependencies:
    """Knobs shared by all estimates in a run.

    Built from Settings by ``pipeline.create_dependencies`` and passed to
    pipeline functions instead of reading the environment inside them.
    """

    # Evaluation limits
    enumeration_budget: int = 10**8
    mc_draws: int = 200_000

    # CP-APR
    max_outer_iters: int = 200
    max_inner_iters: int = 10
    kkt_tol: float = 1e-4
    log_shift: float = 1e-10

    # k-NN
    knn_distance_floor: float = 1e-12
    knn_tie_policy: str = "floor"

    # Concurrency
    max_parallel_jobs: int = 4

    def fit_config(self, rank: int, seed: int) -> FitConfig:
        """FitConfig for one fit."""
        return FitConfig(
            rank=rank,
            max_outer_iters=self.max_outer_iters,
            max_inner_iters=self.max_inner_iters,
            kkt_tol=self.kkt_tol,
            log_shift=self.log_shift,
            rng_seed=seed,
        )
