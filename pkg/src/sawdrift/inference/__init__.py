"""Bayesian estimation of the five model parameters per subject."""
from .diagnostics import PosteriorSummary, gelman_rubin, posterior_summary
from .dream import ChainSet, DreamConfig, dream_zs
from .posterior import LogPosterior, log_posterior
from .priors import DEFAULT_PRIOR_TABLE, PriorSpec, TruncatedGaussian, log_prior
from .recovery import RecoveryReport, SimConfig, recover

__all__ = [
    "ChainSet", "DEFAULT_PRIOR_TABLE", "DreamConfig", "LogPosterior", "PosteriorSummary",
    "PriorSpec", "RecoveryReport", "SimConfig", "TruncatedGaussian", "dream_zs",
    "gelman_rubin", "log_posterior", "log_prior", "posterior_summary", "recover",
]
