"""Variance-aware confidence bounds and bandit algorithms for the linear logistic model."""

from .core import (
    LogisticDataset,
    MleEstimate,
    alpha_slope,
    beta_weight,
    fisher_info,
    fit_mle,
    fit_projected_mle,
    kappa_min,
    link_mu,
    link_mu_dot,
)
from .errors import (
    EmptyBucket,
    InvalidConfig,
    InvalidInstance,
    LogBanditsError,
    NoSpanningSupport,
    NonFiniteLikelihood,
    NotConverged,
    PackingFailed,
    TooFewSamples,
)

__version__ = "0.1.0"
