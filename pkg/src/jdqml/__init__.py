"""Threshold-filtered quasi-likelihood estimation and testing for ergodic jump diffusions."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConstraintError,
    DegenerateFilterError,
    InvalidParameterError,
    JdqmlError,
    NonFiniteStateError,
    SingularDiffusionError,
)
from .model import ModelSpec, ParamBounds, ParamVector, eval_S, get_model, levy_ou_model, register_model
from .simulate import Path, PathConfig, read_path_csv, simulate_generic, simulate_levy_ou, stationary_start, write_path_csv
from .filters import Threshold, ThresholdSet, balance_diagnostics, classify, cutoff
from .likelihood import QllContext, qll_diffusion, qll_drift, qll_joint, qll_jump
from .optimize import OptimizerSettings, nelder_mead
from .estimate import (
    EstimateResult,
    EstimationConfig,
    estimate_adaptive,
    estimate_adaptive_generic,
    estimate_adaptive_levy_ou,
    estimate_constrained,
    estimate_joint,
)
from .inference import (
    AsymptoticInfo,
    TestResult,
    adaptive_qlr_test,
    asymptotic_covariance_levy_ou,
    chi2_cdf,
    chi2_quantile,
    decide_test,
    estimate_mu2,
    qlr_statistic,
    standardize,
)
from .montecarlo import (
    Scenario,
    StudyConfig,
    StudyReport,
    export_report,
    run_estimation_study,
    run_test_study,
    table1_cells,
    test_grid_cells,
)
