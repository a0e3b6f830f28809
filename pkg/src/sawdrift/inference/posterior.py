"""Unnormalised log-posterior for one subject's training trials."""
from __future__ import annotations

import numpy as np

from ..errors import NumericalUnderflow
from ..model.dynamics import log_likelihood
from ..model.params import ModelParams, ModelVariant
from .priors import PriorSpec


class LogPosterior:
    """Callable ``theta -> log prior + sum of trial log-likelihoods``.

    Parameters
    ----------
    trials : sequence of LatticeTrajectory or (n, 2) arrays
    priors : PriorSpec
    variant : ModelVariant
    base : ModelParams, optional
        Supplies the fixed constants (rho, nu, eta, L, window); its free
        parameters are replaced by ``theta`` on every call.
    likelihood_weight : float
        0 turns the target into the prior alone (diagnostics).

    Attributes
    ----------
    n_likelihood_calls : int
        Number of trial likelihood evaluations performed so far.
    n_underflows : int
        Proposals whose likelihood underflowed and were scored ``-inf``.
    """

    def __init__(self, trials, priors: PriorSpec | None = None, variant=ModelVariant.SAW,
                 base: ModelParams | None = None, likelihood_weight: float = 1.0):
        if len(trials) == 0:
            raise ValueError("log_posterior needs at least one trial")
        self.trials = list(trials)
        self.priors = PriorSpec.default() if priors is None else priors
        self.variant = ModelVariant.parse(variant)
        self.base = base if base is not None else ModelParams.from_theta(self.priors.means)
        self.likelihood_weight = float(likelihood_weight)
        self.n_likelihood_calls = 0
        self.n_underflows = 0

    def log_likelihood(self, theta) -> float:
        params = self.base.with_theta(theta)
        total = 0.0
        for trial in self.trials:
            self.n_likelihood_calls += 1
            total += log_likelihood(trial, params, self.variant)
        return total

    def __call__(self, theta) -> float:
        lp = self.priors.log_prior(theta)
        if not np.isfinite(lp):
            return -np.inf
        if self.likelihood_weight == 0.0:
            return lp
        try:
            ll = self.log_likelihood(theta)
        except NumericalUnderflow:
            self.n_underflows += 1
            return -np.inf
        return lp + self.likelihood_weight * ll


def log_posterior(theta, trials, variant=ModelVariant.SAW, priors: PriorSpec | None = None,
                  base: ModelParams | None = None) -> float:
    return LogPosterior(trials, priors, variant, base)(np.asarray(
        theta.theta if hasattr(theta, "theta") else theta, float))
