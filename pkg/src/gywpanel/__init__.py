"""Generalized Yule-Walker estimation for spatio-temporal autoregressive panels.

The package fits location-specific coefficient triples of the model

    y_t = D(l0) W y_t + D(l1) y_{t-1} + D(l2) W y_{t-1} + eps_t

from the panel's sample autocovariances, with full, restricted
(relevance-selected), and ridge-penalized variants, plus simulation,
forecasting, asymptotic standard errors, a bootstrap homogeneity test,
and a replicated convergence-experiment driver.
"""

from .covariance import CovariancePair, sample_autocov
from .errors import (
    ConfigError,
    DataFormatError,
    NonStationaryError,
    NumericalError,
    SingularSystemError,
)
from .estimator import (
    EquationSystem,
    EstimationReport,
    RelevanceScores,
    asymptotic_variance,
    default_equation_count,
    equation_system,
    gyw_estimate,
    gyw_estimate_from_covariances,
    relevance_scores,
    restricted_estimate,
    restricted_from_covariances,
    ridge_restricted_estimate,
    ridge_restricted_from_covariances,
)
from .evaluation import (
    ExperimentConfig,
    ExperimentRecord,
    ExperimentResult,
    MaeResult,
    OutOfSampleResult,
    mae,
    out_of_sample_eval,
    run_experiment,
)
from .inference import HomogeneityTestReport, homogeneity_test, pooled_estimate
from .model import (
    CoefficientSet,
    FittedValues,
    ModelSpec,
    PanelSeries,
    StationarityCheck,
    TransitionForm,
    build_transition,
    draw_stable_spec,
    fitted_values,
    forecast,
    is_stationary,
    population_covariances,
    simulate,
    transition_from,
)
from .weights import (
    WeightMatrix,
    correlation_weights,
    inverse_distance_weights,
    scenario1_weights,
    scenario2_weights,
)

__version__ = "0.1.0"

__all__ = [
    "CovariancePair",
    "sample_autocov",
    "ConfigError",
    "DataFormatError",
    "NonStationaryError",
    "NumericalError",
    "SingularSystemError",
    "EquationSystem",
    "EstimationReport",
    "RelevanceScores",
    "asymptotic_variance",
    "default_equation_count",
    "equation_system",
    "gyw_estimate",
    "gyw_estimate_from_covariances",
    "relevance_scores",
    "restricted_estimate",
    "restricted_from_covariances",
    "ridge_restricted_estimate",
    "ridge_restricted_from_covariances",
    "ExperimentConfig",
    "ExperimentRecord",
    "ExperimentResult",
    "MaeResult",
    "OutOfSampleResult",
    "mae",
    "out_of_sample_eval",
    "run_experiment",
    "HomogeneityTestReport",
    "homogeneity_test",
    "pooled_estimate",
    "CoefficientSet",
    "FittedValues",
    "ModelSpec",
    "PanelSeries",
    "StationarityCheck",
    "TransitionForm",
    "build_transition",
    "draw_stable_spec",
    "fitted_values",
    "forecast",
    "is_stationary",
    "population_covariances",
    "simulate",
    "transition_from",
    "WeightMatrix",
    "correlation_weights",
    "inverse_distance_weights",
    "scenario1_weights",
    "scenario2_weights",
    "__version__",
]
