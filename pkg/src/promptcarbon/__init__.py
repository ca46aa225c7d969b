"""Prompt-level energy and carbon estimates for LLM inference.

Phase-specific (prefill / decode) regressors are trained on a merge of a
performance/energy leaderboard and a quality leaderboard, with separate
models for model sizes inside and beyond the training range.
"""

__version__ = "0.1.0"

from .bundle import ModelBundle, fit_bundle, load_bundle, save_bundle  # noqa: E402
from .carbon import CarbonEstimate, IntensityTable, energy_to_carbon  # noqa: E402
from .estimator import EnergyEstimate, EstimateQuery, derive_latencies, estimate_energy, route_regime  # noqa: E402
from .features import PhaseKind, RegimeKind  # noqa: E402

__all__ = [
    "CarbonEstimate",
    "EnergyEstimate",
    "EstimateQuery",
    "IntensityTable",
    "ModelBundle",
    "PhaseKind",
    "RegimeKind",
    "derive_latencies",
    "energy_to_carbon",
    "estimate_energy",
    "fit_bundle",
    "load_bundle",
    "route_regime",
    "save_bundle",
]
