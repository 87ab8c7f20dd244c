"""Gaussian copula models for correlated discrete outcomes.

The package fits copula models whose marginals are integer-valued by two
computable stand-ins for the intractable discrete likelihood (a jump-midpoint
objective and a jittered objective), checks them against an exact small-n
rectangle-probability oracle, and quantifies how far the midpoint objective
is from a true likelihood with a parametric-bootstrap diagnostic.
"""

__version__ = "0.1.0"

from .correlation import (
    AR1,
    CorrelationModel,
    ExchangeableBlocks,
    FactorizationError,
    Identity,
    dense_log_det,
    dense_quad_form_excess,
)
from .diagnostics import (
    KappaResult,
    fit_chisq_mle,
    fit_gamma_mle,
    kappa,
    kappa_grid,
    krippendorff_alpha,
    ks_test_chisq,
)
from .fit import (
    FitResult,
    default_start,
    hessian_fd,
    likelihood_ratio,
    mle_ce,
    mle_dt,
    optimize,
    score_fd,
)
from .likelihood import (
    JitterMatrix,
    alternating_orthant_prob,
    ce_std_error,
    gauss_copula_core,
    loglik_ce,
    loglik_dt,
    loglik_exact,
)
from .marginals import Bernoulli, Marginal, NegBinomial, Poisson, make_marginal
from .model import CopulaModel, ParamVector, transform
from .mvn import (
    RectangleProbResult,
    rectangle_prob,
    sample_mvn,
    std_normal_cdf,
    std_normal_log_cdf,
    std_normal_quantile,
)
from .specs import (
    ExperimentConfig,
    config_hash,
    parse_model_specs,
    read_config,
    read_dataset,
    write_dataset,
)

__all__ = [
    "__version__",
    "AR1",
    "Bernoulli",
    "CopulaModel",
    "CorrelationModel",
    "ExchangeableBlocks",
    "ExperimentConfig",
    "FactorizationError",
    "FitResult",
    "Identity",
    "JitterMatrix",
    "KappaResult",
    "Marginal",
    "NegBinomial",
    "ParamVector",
    "Poisson",
    "RectangleProbResult",
    "alternating_orthant_prob",
    "ce_std_error",
    "config_hash",
    "default_start",
    "dense_log_det",
    "dense_quad_form_excess",
    "fit_chisq_mle",
    "fit_gamma_mle",
    "gauss_copula_core",
    "hessian_fd",
    "kappa",
    "kappa_grid",
    "krippendorff_alpha",
    "ks_test_chisq",
    "likelihood_ratio",
    "loglik_ce",
    "loglik_dt",
    "loglik_exact",
    "make_marginal",
    "mle_ce",
    "mle_dt",
    "optimize",
    "parse_model_specs",
    "read_config",
    "read_dataset",
    "rectangle_prob",
    "sample_mvn",
    "score_fd",
    "std_normal_cdf",
    "std_normal_log_cdf",
    "std_normal_quantile",
    "transform",
    "write_dataset",
]
