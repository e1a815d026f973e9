"""Semiparametric inference for sensitivity and specificity at the Youden-optimal cut-off.

Two-sample density ratio model ``f1(x) = exp(alpha + beta' q(x)) f0(x)`` fitted
by maximum empirical likelihood.
"""

from .core import (
    BasisSpec,
    DataError,
    DomainError,
    DrmFit,
    FitError,
    TwoSampleData,
    WeightedCdf,
    YoudenEstimate,
    all_candidate_bases,
    basis_eval,
    validate,
)
from .cutoff import CutoffSolution, estimate, estimate_accuracy, solve_cutoff
from .elfit import (
    ConvergenceError,
    OptimizerSettings,
    SeparationError,
    dual_log_likelihood,
    empirical_cdfs,
    fit_drm,
    fit_from_theta,
    mele_cdfs,
)
from .gof import gof_bootstrap_pvalue, gof_statistic, gof_test, information_criteria, select_basis
from .region import (
    ConfidenceRegion,
    bootstrap_sigma,
    compute_pieces,
    density_at_cutoff,
    logit_region,
    region_area,
    region_contains,
    silverman_bandwidth,
    wald_region,
)
from .simulation import make_scenario, run_simulation, true_values

__version__ = "0.1.0"
