"""AMP for penalized regression with AMP-based GDF and prediction-error estimators."""

from .amp import AmpOptions, AmpState, FixedPointReport, RegressionInstance, amp_solve, amp_sweep
from .correction import corrected_estimate, solve_support_system
from .errors import AmpGdfError
from .estimators import GdfReport, gdf_report
from .oracle import OracleOptions, coordinate_descent_solve, grid_prox, stein_divergence_fd
from .penalty import Family, PenaltySpec, prox, prox_array
from .pipeline import SyntheticConfig, prepare_real_data, sweep
from .replica import ReplicaInputs, replica_solve

__version__ = "0.1.0"

__all__ = [
    "AmpGdfError",
    "AmpOptions",
    "AmpState",
    "Family",
    "FixedPointReport",
    "GdfReport",
    "OracleOptions",
    "PenaltySpec",
    "RegressionInstance",
    "ReplicaInputs",
    "SyntheticConfig",
    "amp_solve",
    "amp_sweep",
    "coordinate_descent_solve",
    "corrected_estimate",
    "gdf_report",
    "grid_prox",
    "prepare_real_data",
    "prox",
    "prox_array",
    "replica_solve",
    "solve_support_system",
    "stein_divergence_fd",
    "sweep",
]
