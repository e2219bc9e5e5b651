"""PTC Entropy - differential entropy estimation with Poisson tensor completion.

Bins a sample into a count tensor, fits a low-rank Poisson CP model to it
and evaluates the entropy of the induced piecewise-constant density, next
to histogram and k-nearest-neighbor baselines.
"""

__version__ = "0.1.0"

from .cp_apr import FitConfig, FitResult, fit
from .dependencies import EstimationDependencies
from .estimators import (
    PtcDensity,
    knn_entropy,
    ptc_entropy,
    ptc_entropy_mc,
    ptc_entropy_thresholded,
    ptc_entropy_top_t,
)
from .histogram import BinningGrid, build_histogram, histogram_entropy
from .pipeline import create_dependencies, estimate_entropy
from .samplers import DistributionSpec, sample, true_entropy
from .settings import ExperimentConfig, load_experiment_config, load_settings
from .tensor_core import KruskalModel, SparseCountTensor

__all__ = [
    "BinningGrid",
    "DistributionSpec",
    "EstimationDependencies",
    "ExperimentConfig",
    "FitConfig",
    "FitResult",
    "KruskalModel",
    "PtcDensity",
    "SparseCountTensor",
    "build_histogram",
    "create_dependencies",
    "estimate_entropy",
    "fit",
    "histogram_entropy",
    "knn_entropy",
    "load_experiment_config",
    "load_settings",
    "ptc_entropy",
    "ptc_entropy_mc",
    "ptc_entropy_thresholded",
    "ptc_entropy_top_t",
    "sample",
    "true_entropy",
]
