"""Angle-based transfer learning for high-dimensional ridge regression."""

from ._backend import BACKEND
from .aggregation import (
    AggregationResult,
    SourceBundle,
    aggregate_spectral,
    aggregate_validation,
    similarity_diagnostics,
)
from .core import (
    AngleTLError,
    Dataset,
    FitResult,
    SourceEstimate,
    SpectralDistribution,
    load_matrix_csv,
    validate_pairing,
)
from .estimators import (
    PenaltyConfig,
    fit_angle_tl,
    fit_dist_tl,
    fit_target_only,
    predict,
    rescale_source,
)
from .rmt import RiskScenario, optimal_tuning, risk_bounds, stieltjes_v, stieltjes_v_prime
from .tuning import CvPlan, TuneGrid, cross_validate, refit_best

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AggregationResult", "SourceBundle", "aggregate_spectral", "aggregate_validation",
    "similarity_diagnostics", "AngleTLError", "Dataset", "FitResult", "SourceEstimate",
    "SpectralDistribution", "load_matrix_csv", "validate_pairing", "PenaltyConfig", "fit_angle_tl",
    "fit_dist_tl", "fit_target_only", "predict", "rescale_source", "RiskScenario", "optimal_tuning",
    "risk_bounds", "stieltjes_v", "stieltjes_v_prime", "CvPlan", "TuneGrid", "cross_validate",
    "refit_best", "__version__",
]
