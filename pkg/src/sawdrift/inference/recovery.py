"""Parameter recovery: simulate a subject with known parameters and refit."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._rng import seed_sequence
from ..data_io import make_synthetic
from ..model.params import ModelParams, ModelVariant
from .diagnostics import PosteriorSummary, posterior_summary
from .dream import ChainSet, DreamConfig, dream_zs
from .posterior import LogPosterior
from .priors import PriorSpec


@dataclass
class SimConfig:
    n_train: int = 18
    n_steps: int = 1500
    base: ModelParams | None = None

    @classmethod
    def reduced(cls) -> "SimConfig":
        return cls(n_train=6, n_steps=500)


@dataclass
class RecoveryReport:
    truth: np.ndarray
    summary: PosteriorSummary
    chains: ChainSet = field(repr=False)

    @property
    def covered(self) -> np.ndarray:
        return self.summary.covers(self.truth)

    @property
    def n_covered(self) -> int:
        return int(self.covered.sum())

    @property
    def ci_widths(self) -> np.ndarray:
        return self.summary.widths

    def rows(self):
        for k, row in enumerate(self.summary.rows()):
            row = dict(row)
            row["truth"] = float(self.truth[k])
            row["covered"] = bool(self.covered[k])
            yield row


def recover(true_theta, sim_config: SimConfig | None = None,
            sampler_config: DreamConfig | None = None, rng=None,
            priors: PriorSpec | None = None, likelihood_weight: float = 1.0,
            executor=None) -> RecoveryReport:
    """Fit synthetic training trials generated at ``true_theta``.

    All trials generated here are used for fitting (``n_train`` of them);
    the report states whether each true value lies inside its 98% interval.
    """
    sim = sim_config or SimConfig()
    priors = priors or PriorSpec.default()
    theta = np.asarray(true_theta.theta if hasattr(true_theta, "theta") else true_theta, float)
    if not priors.in_support(theta):
        raise ValueError(f"true parameters {theta} lie outside the prior support")
    seed_data, seed_fit = seed_sequence(rng).spawn(2)
    base = sim.base or ModelParams.from_theta(theta)
    synth = make_synthetic(theta, 1, sim.n_train, sim.n_steps, rng=seed_data, base=base)
    subject = next(iter(synth.dataset))
    trials = subject.train + subject.test
    target = LogPosterior(trials, priors, ModelVariant.SAW, base, likelihood_weight)
    chains = dream_zs(target, priors, sampler_config, np.random.default_rng(seed_fit),
                      executor=executor)
    return RecoveryReport(theta, posterior_summary(chains), chains)
