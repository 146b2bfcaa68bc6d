"""Model-based clustering with contaminated multivariate skew-normal
mixtures: simultaneous clustering, per-cluster outlier flagging and
missing-value imputation through one ECM fit."""

from .data import DataMatrix
from .distributions import (
    CanonicalParams,
    CmsnParams,
    MsnParams,
    cmsn_logpdf,
    delta_from_lambda,
    lambda_from_delta,
    mills_ratio,
    msn_logpdf,
    mvn_logpdf,
    psd_sqrt,
    sample_cmsn,
    tn_moments,
)
from .em import aitken_check, initialize, observed_loglik, responsibilities
from .errors import (
    CanonicalValidityError,
    DataError,
    DegenerateClusterError,
    FactorizationError,
    FitFailureError,
    SingularSystemError,
    SkewmixError,
)
from .metrics import ari, confusion_rates
from .mixture import ComponentParams, FitConfig, MixtureModel, parameter_count
from .model import FitResult, classify, detect_outliers, fit, impute
from .partition import (
    MissPattern,
    conditional_normal,
    conditional_sn,
    marginal_observed,
    scan_patterns,
)
from .simulate import (
    GroundTruth,
    ScenarioSpec,
    generate_part_a,
    generate_part_b,
    inject_mar,
    run_grid,
)

__version__ = "0.1.0"

__all__ = [
    "CanonicalParams", "CanonicalValidityError", "CmsnParams", "ComponentParams",
    "DataError", "DataMatrix", "DegenerateClusterError", "FactorizationError",
    "FitConfig", "FitFailureError", "FitResult", "GroundTruth", "MissPattern",
    "MixtureModel", "MsnParams", "ScenarioSpec", "SingularSystemError",
    "SkewmixError", "aitken_check", "ari", "classify", "cmsn_logpdf",
    "conditional_normal", "conditional_sn", "confusion_rates",
    "delta_from_lambda", "detect_outliers", "fit", "generate_part_a",
    "generate_part_b", "impute", "initialize", "inject_mar",
    "lambda_from_delta", "marginal_observed", "mills_ratio", "msn_logpdf",
    "mvn_logpdf", "observed_loglik", "parameter_count", "psd_sqrt",
    "responsibilities", "run_grid", "sample_cmsn", "scan_patterns",
    "tn_moments",
]
