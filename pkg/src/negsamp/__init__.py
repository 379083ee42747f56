"""Nonuniform negative sampling for imbalanced logistic regression.

Keep every positive record, keep negative record i with probability
pi(x_i) = min[max{rho * t(x_i) / omega, floor}, 1], then undo the sampling
either by inverse-probability weights or by the exact log-odds offset
-log(pi).  The package covers the sampling schemes, both corrected
estimators, their plug-in asymptotic variances, pilot estimation of the
score, and a replicated simulation harness.
"""

from .backend import BACKEND
from .errors import (
    ConditioningError,
    ConfigError,
    ContractError,
    DataFormatError,
    DegenerateInputError,
    EstimabilityError,
    FitError,
    NegsampError,
    SeparationError,
    UnsupportedOperationError,
)
from .estimators import (
    FitResult,
    FitSpec,
    corrected_probability,
    fit_ipw,
    fit_lcc,
    fit_lik,
    fit_mle,
)
from .experiments import (
    DEFAULT_ALPHA,
    METHODS,
    RHO_GRID,
    Design,
    ExperimentReport,
    Table1Report,
    auc,
    calibrate_alpha,
    generate,
    paired_mse_diff,
    run_floor_sensitivity,
    run_model_misspec,
    run_mse_sweep,
    run_table1,
)
from .model import Dataset, LogOddsModel, Theta, grad_log_odds, log_odds, probability
from .pilot import (
    Perturb,
    PilotConfig,
    build_bundles,
    build_pilot,
    compute_omega,
    draw_pilot,
    fit_pilot,
    perturb_pilot,
)
from .sampling import (
    LCC,
    OPT_A,
    OPT_L,
    OPT_P,
    SCHEMES,
    UNIFORM,
    PilotBundle,
    SamplingPlan,
    Subsample,
    draw_subsample,
    draw_with_probabilities,
    sampling_probability,
    score_t,
    solve_truncation,
)
from .streams import derive_seed, record_uniforms
from .variance import VarianceReport, mse, plugin_mf, plugin_variances, verify_opt_phi

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT_ALPHA",
    "METHODS",
    "RHO_GRID",
    "LCC",
    "OPT_A",
    "OPT_L",
    "OPT_P",
    "SCHEMES",
    "UNIFORM",
    "ConditioningError",
    "ConfigError",
    "ContractError",
    "DataFormatError",
    "Dataset",
    "DegenerateInputError",
    "Design",
    "EstimabilityError",
    "ExperimentReport",
    "FitError",
    "FitResult",
    "FitSpec",
    "LogOddsModel",
    "NegsampError",
    "Perturb",
    "PilotBundle",
    "PilotConfig",
    "SamplingPlan",
    "SeparationError",
    "Subsample",
    "Table1Report",
    "Theta",
    "UnsupportedOperationError",
    "VarianceReport",
    "auc",
    "build_bundles",
    "build_pilot",
    "calibrate_alpha",
    "compute_omega",
    "corrected_probability",
    "derive_seed",
    "draw_pilot",
    "draw_subsample",
    "draw_with_probabilities",
    "fit_ipw",
    "fit_lcc",
    "fit_lik",
    "fit_mle",
    "fit_pilot",
    "generate",
    "grad_log_odds",
    "log_odds",
    "mse",
    "paired_mse_diff",
    "perturb_pilot",
    "plugin_mf",
    "plugin_variances",
    "probability",
    "record_uniforms",
    "run_floor_sensitivity",
    "run_model_misspec",
    "run_mse_sweep",
    "run_table1",
    "sampling_probability",
    "score_t",
    "solve_truncation",
    "verify_opt_phi",
]
