"""Truncated-Gaussian priors over the five estimated parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import log_ndtr

from ..errors import ConfigError
from ..model.params import FREE_PARAMS


@dataclass(frozen=True)
class TruncatedGaussian:
    mean: float
    sd: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigError(f"prior sd must be positive, got {self.sd}")
        if not self.lower < self.upper:
            raise ConfigError(f"prior bounds must satisfy lower < upper, got "
                              f"[{self.lower}, {self.upper}]")

    @property
    def _ab(self):
        return (self.lower - self.mean) / self.sd, (self.upper - self.mean) / self.sd

    def log_mass(self) -> float:
        """Log of the untruncated Gaussian mass on ``[lower, upper]``."""
        a, b = self._ab
        # log(Phi(b) - Phi(a)) evaluated on the side with less cancellation
        if a > 0:
            a, b = -b, -a
        lb, la = log_ndtr(b), log_ndtr(a)
        return float(lb + np.log1p(-np.exp(la - lb)))

    def logpdf(self, x):
        x = np.asarray(x, float)
        z = (x - self.mean) / self.sd
        val = -0.5 * z * z - np.log(self.sd) - 0.5 * np.log(2 * np.pi) - self.log_mass()
        return np.where((x >= self.lower) & (x <= self.upper), val, -np.inf)

    def dist(self):
        a, b = self._ab
        return stats.truncnorm(a, b, loc=self.mean, scale=self.sd)

    def sample(self, rng, size=None):
        return self.dist().rvs(size=size, random_state=rng)

    def ppf(self, q):
        return self.dist().ppf(q)


#: truncated-Gaussian prior table (mean, sd, lower, upper)
DEFAULT_PRIOR_TABLE = {
    "lam": (2.0, 2.0, 0.3, 8.0),
    "gamma": (-2.5, 0.3, -3.8, 0.0),
    "r_i": (5.0, 5.0, 0.1, 15.0),
    "r_j": (5.0, 5.0, 0.1, 15.0),
    "phi": (1.5, 0.5, 0.5, 3.0),
}


@dataclass(frozen=True)
class PriorSpec:
    """Independent truncated-Gaussian priors, one per estimated parameter."""

    priors: dict

    @classmethod
    def default(cls) -> "PriorSpec":
        return cls({k: TruncatedGaussian(*v) for k, v in DEFAULT_PRIOR_TABLE.items()})

    @classmethod
    def from_dict(cls, table: dict) -> "PriorSpec":
        out = {}
        for name in FREE_PARAMS:
            key = "lambda" if name == "lam" and "lambda" in table else name
            if key not in table:
                raise ConfigError(f"prior table lacks an entry for {name!r}")
            v = table[key]
            if isinstance(v, dict):
                out[name] = TruncatedGaussian(float(v["mean"]), float(v["sd"]),
                                              float(v["lower"]), float(v["upper"]))
            else:
                out[name] = TruncatedGaussian(*map(float, v))
        return cls(out)

    def to_dict(self) -> dict:
        return {k: {"mean": p.mean, "sd": p.sd, "lower": p.lower, "upper": p.upper}
                for k, p in self.items()}

    def items(self):
        return [(k, self.priors[k]) for k in FREE_PARAMS]

    @property
    def names(self):
        return FREE_PARAMS

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for _, p in self.items()])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for _, p in self.items()])

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for _, p in self.items()])

    def in_support(self, theta) -> bool:
        theta = np.asarray(theta, float)
        return bool(np.all((theta >= self.lower) & (theta <= self.upper)))

    def log_prior(self, theta) -> float:
        theta = np.asarray(theta, float)
        if not self.in_support(theta):
            return -np.inf
        return float(sum(p.logpdf(x) for x, (_, p) in zip(theta, self.items())))

    def sample(self, rng, n: int) -> np.ndarray:
        """``(n, 5)`` independent draws in parameter-vector order."""
        return np.column_stack([p.sample(rng, n) for _, p in self.items()])

    def quantiles(self, q) -> np.ndarray:
        return np.array([p.ppf(q) for _, p in self.items()])


def log_prior(theta, priors: PriorSpec | None = None) -> float:
    """Sum of truncated-Gaussian log densities; ``-inf`` outside the box.

    ``theta`` may be a :class:`~sawdrift.model.ModelParams` or a vector in
    the order ``gamma, r_i, r_j, phi, lam``.
    """
    priors = PriorSpec.default() if priors is None else priors
    if hasattr(theta, "theta"):
        theta = theta.theta
    return priors.log_prior(theta)
