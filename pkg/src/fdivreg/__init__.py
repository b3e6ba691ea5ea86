"""Closed-form solutions of empirical risk minimization with f-divergence regularization."""

from .divergences import BUILTIN_NAMES, DivergenceSpec, builtin, f_divergence, lambert_w0
from .equivalence import RiskTransform, risk_transform, solve_equivalent, verify_equivalence
from .errors import (ConfigurationError, DivergentIntegral, DomainError, FDRError, Inconclusive,
                     InfeasiblePointError, NoFeasibleBeta, NonConvergence, PreconditionError)
from .measures import (DiscreteMeasure, QuadratureMeasure, RiskSpec, empirical_risk, example1_gamma,
                       integrate, tabulated_density, uniform_density)
from .oracle import certify, simplex_minimize
from .solver import (BoundaryReport, Posterior, classify_boundary, constraint_integral,
                     feasible_beta_interval, min_regularization, normalization_function, objective,
                     posterior, scaled_normalization, solve_beta, stationarity_residual)

__all__ = [
    "BUILTIN_NAMES", "DivergenceSpec", "builtin", "f_divergence", "lambert_w0",
    "RiskTransform", "risk_transform", "solve_equivalent", "verify_equivalence",
    "ConfigurationError", "DivergentIntegral", "DomainError", "FDRError", "Inconclusive",
    "InfeasiblePointError", "NoFeasibleBeta", "NonConvergence", "PreconditionError",
    "DiscreteMeasure", "QuadratureMeasure", "RiskSpec", "empirical_risk", "example1_gamma",
    "integrate", "tabulated_density", "uniform_density",
    "certify", "simplex_minimize",
    "BoundaryReport", "Posterior", "classify_boundary", "constraint_integral",
    "feasible_beta_interval", "min_regularization", "normalization_function", "objective",
    "posterior", "scaled_normalization", "solve_beta", "stationarity_residual",
]
