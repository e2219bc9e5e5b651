"""
Experiment Preset Catalog
Named experiment configurations for the standard comparison studies
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .settings import DEFAULT_K_VALUES


@dataclass
class ExperimentPreset:
    """A named set of ExperimentConfig overrides"""

    id: str
    description: str
    overrides: Dict[str, Any] = field(default_factory=dict)
    runtime_hint: str = ""
    tags: List[str] = field(default_factory=list)


class PresetCatalog:
    """Manages the catalog of experiment presets"""

    def __init__(self):
        self.presets: Dict[str, ExperimentPreset] = {}
        self._initialize_default_catalog()

    def _initialize_default_catalog(self):
        """Initialize with the standard studies"""

        self.add_preset(ExperimentPreset(
            id="bin_size",
            description="Histogram vs PTC as the bin width shrinks: 6-D standard normal, R=5",
            overrides={
                "family": "gaussian",
                "dim": 6,
                "sample_sizes": [2500],
                "trials": 25,
                "methods": ["hist", "ptc"],
                "hist_binning": "width",
                "ptc_binning": "width",
                "c_values": [0.5, 1.0, 2.0, 3.5],
                "ranks": [5],
                # 6-D grids at c=0.5 have billions of bins
                "mc_draws": 200_000,
            },
            runtime_hint="~15 min",
            tags=["bin width", "occupancy"],
        ))

        self.add_preset(ExperimentPreset(
            id="uniform_advantage",
            description="Uniform on [0, e^2]^5 with a rank sweep and oracle-best selection",
            overrides={
                "family": "uniform",
                "dim": 5,
                "low": 0.0,
                "high": 7.38905609893065,
                "sample_sizes": [10_000],
                "trials": 25,
                "methods": ["hist", "ptc", "knn"],
                "ptc_binning": "bins",
                "hist_binning": "width",
                "bins_per_dim": 20,
                "c_values": [3.5],
                "ranks": [1, 2, 3, 4, 5],
                "k_values": list(DEFAULT_K_VALUES),
                "selection": "oracle-best",
            },
            runtime_hint="~5 min",
            tags=["comparison"],
        ))

        self.add_preset(ExperimentPreset(
            id="normal_comparison",
            description="Standard normal in 5-D, all three estimators",
            overrides={
                "family": "gaussian",
                "dim": 5,
                "sample_sizes": [10_000],
                "trials": 25,
                "methods": ["hist", "ptc", "knn"],
                "ranks": [1, 2, 3, 4, 5],
                "selection": "oracle-best",
            },
            runtime_hint="~5 min",
            tags=["comparison"],
        ))

        self.add_preset(ExperimentPreset(
            id="correlated_normal",
            description="N(0, (11^T + I)/2) in 5-D, all three estimators",
            overrides={
                "family": "correlated_gaussian",
                "dim": 5,
                "sample_sizes": [10_000],
                "trials": 25,
                "methods": ["hist", "ptc", "knn"],
                "ranks": [1, 2, 3, 4, 5],
                "selection": "oracle-best",
            },
            runtime_hint="~5 min",
            tags=["comparison"],
        ))

        self.add_preset(ExperimentPreset(
            id="heavy_tail",
            description="5-D Cauchy (Student t, 1 dof): k-NN against PTC",
            overrides={
                "family": "student_t",
                "dim": 5,
                "dof": 1.0,
                "sample_sizes": [10_000],
                "trials": 25,
                "methods": ["ptc", "knn"],
                "ranks": [1, 2, 3, 4, 5],
                "k_values": list(DEFAULT_K_VALUES),
                "selection": "oracle-best",
            },
            runtime_hint="~5 min",
            tags=["comparison", "failure mode"],
        ))

        self.add_preset(ExperimentPreset(
            id="knn_sanity",
            description="k-NN with k=5 on a 2-D standard normal",
            overrides={
                "family": "gaussian",
                "dim": 2,
                "sample_sizes": [5000],
                "trials": 25,
                "methods": ["knn"],
                "k_values": [5],
            },
            runtime_hint="<1 min",
            tags=["sanity"],
        ))

        self.add_preset(ExperimentPreset(
            id="thresholding",
            description="Thresholded PTC entropy of a rank-5 fit on uniform [0,1]^5",
            overrides={
                "family": "uniform",
                "dim": 5,
                "low": 0.0,
                "high": 1.0,
                "sample_sizes": [10_000],
                "trials": 1,
                "methods": ["ptc"],
                "bins_per_dim": 20,
                "ranks": [5],
                "tau_values": [1e-2, 1e-3, 1e-4, 0.0],
            },
            runtime_hint="~3 min",
            tags=["thresholding"],
        ))

        self.add_preset(ExperimentPreset(
            id="mixture_rank",
            description="3-component equidistant Gaussian mixture in 3-D with ranks 1..6",
            overrides={
                "family": "gaussian_mixture",
                "dim": 3,
                "components": 3,
                "separation": 10.0,
                "sample_sizes": [2500],
                "trials": 25,
                "methods": ["ptc"],
                "ranks": [1, 2, 3, 4, 5, 6],
                "reference_samples": 1_000_000,
                "reference_trials": 25,
            },
            runtime_hint="~20 min",
            tags=["mixture", "rank"],
        ))

    def add_preset(self, preset: ExperimentPreset):
        """Add a preset to the catalog"""
        self.presets[preset.id] = preset

    def get_preset(self, preset_id: str) -> Optional[ExperimentPreset]:
        """Get preset by ID or alias"""
        return self.presets.get(normalize_preset_name(preset_id))

    def list_presets(self, tag: Optional[str] = None) -> List[ExperimentPreset]:
        """List presets, optionally those carrying a tag"""
        presets = list(self.presets.values())
        if tag:
            presets = [p for p in presets if tag in p.tags]
        return presets


PRESET_ALIASES = {
    # Bin width
    "bin_size": "bin_size",
    "bin-size": "bin_size",
    "binsize": "bin_size",
    "occupancy": "bin_size",
    # Uniform
    "uniform": "uniform_advantage",
    "uniform_advantage": "uniform_advantage",
    "uniform-advantage": "uniform_advantage",
    # Gaussians
    "normal": "normal_comparison",
    "gaussian": "normal_comparison",
    "normal_comparison": "normal_comparison",
    "correlated": "correlated_normal",
    "correlated_normal": "correlated_normal",
    "correlated-normal": "correlated_normal",
    # Heavy tails
    "cauchy": "heavy_tail",
    "heavy_tail": "heavy_tail",
    "heavy-tail": "heavy_tail",
    # k-NN
    "knn": "knn_sanity",
    "knn_sanity": "knn_sanity",
    "knn-sanity": "knn_sanity",
    # Thresholding
    "threshold": "thresholding",
    "thresholding": "thresholding",
    "tau": "thresholding",
    # Mixtures
    "mixture": "mixture_rank",
    "mixture_rank": "mixture_rank",
    "mixture-rank": "mixture_rank",
}


def normalize_preset_name(name: str) -> str:
    """Map a preset name or alias to its canonical id"""
    if not name:
        return ""
    normalized = name.strip().lower()
    return PRESET_ALIASES.get(normalized, normalized)


# Global catalog instance
_catalog: Optional[PresetCatalog] = None


def get_catalog() -> PresetCatalog:
    """Get or create the global preset catalog"""
    global _catalog
    if _catalog is None:
        _catalog = PresetCatalog()
    return _catalog
