"""Control-variate Monte Carlo integration with OLS, LASSO and LSLASSO weights."""
from .basis import BasisSpec, Family, build_design, count_indices, diagnostics, enumerate_indices
from .estimators import (EstimateResult, SampleBatch, dichotomic_search, kfold_cv, lasso_estimate,
                         lslasso_estimate, mc_estimate, ols_estimate, oracle_estimate)
from .harness import BayesConfig, ExperimentConfig, run_bayes, run_experiment
from .integrands import Integrand, make_integrand
from .qmc import halton_points

__all__ = [
    "BasisSpec", "Family", "build_design", "count_indices", "diagnostics", "enumerate_indices",
    "EstimateResult", "SampleBatch", "dichotomic_search", "kfold_cv", "lasso_estimate",
    "lslasso_estimate", "mc_estimate", "ols_estimate", "oracle_estimate",
    "BayesConfig", "ExperimentConfig", "run_bayes", "run_experiment",
    "Integrand", "make_integrand", "halton_points",
]
