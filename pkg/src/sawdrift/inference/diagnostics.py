"""Convergence diagnostics and posterior summaries."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientSamples


def gelman_rubin(chains, param_index: int | None = None):
    """Potential scale reduction factor.

    Parameters
    ----------
    chains : array_like
        Either ``(n_chains, n_samples)`` for one parameter, or
        ``(n_samples, n_chains, d)`` as stored by :class:`ChainSet`, in which
        case ``param_index`` selects the parameter (all when omitted).
    """
    x = np.asarray(chains, float)
    if x.ndim == 3:
        if param_index is None:
            return np.array([gelman_rubin(x[:, :, k].T) for k in range(x.shape[2])])
        x = x[:, :, param_index].T
    m, n = x.shape
    if m < 2 or n < 10:
        raise InsufficientSamples(f"need >= 2 chains with >= 10 samples, got {m} x {n}")
    within = np.mean(np.var(x, axis=1, ddof=1))
    means = x.mean(axis=1)
    between = n * np.var(means, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    return float(np.sqrt(var_plus / within))


@dataclass
class PosteriorSummary:
    names: tuple
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rhat: np.ndarray
    n_samples: int
    ci: tuple = (0.01, 0.99)

    def rows(self):
        for k, name in enumerate(self.names):
            yield {"parameter": "lambda" if name == "lam" else name,
                   "median": float(self.median[k]), "ci_lower": float(self.lower[k]),
                   "ci_upper": float(self.upper[k]), "rhat": float(self.rhat[k]),
                   "n_samples": self.n_samples}

    def covers(self, theta) -> np.ndarray:
        theta = np.asarray(theta, float)
        return (self.lower <= theta) & (theta <= self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def write_csv(self, path) -> None:
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    @classmethod
    def read_csv(cls, path) -> "PosteriorSummary":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        names = tuple("lam" if r["parameter"] == "lambda" else r["parameter"] for r in rows)
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(names, col("median"), col("ci_lower"), col("ci_upper"), col("rhat"),
                   int(rows[0]["n_samples"]))


def posterior_summary(chains, burn_in: int | None = None, names=None,
                      ci=(0.01, 0.99)) -> PosteriorSummary:
    """Posterior medians and 98% intervals from pooled post-burn-in samples.

    ``chains`` is a :class:`ChainSet` or an array ``(n_samples, n_chains, d)``.
    """
    if hasattr(chains, "post_burn_in"):
        names = chains.names if names is None else names
        post = chains.post_burn_in(burn_in)
    else:
        post = np.asarray(chains, float)[(burn_in or 0):]
        if post.ndim == 2:
            post = post[:, None, :]
    n, m, d = post.shape
    if n * m < 100:
        raise InsufficientSamples(f"need >= 100 post-burn-in samples, got {n * m}")
    names = tuple(names) if names is not None else tuple(f"p{k}" for k in range(d))
    pooled = post.reshape(-1, d)
    med = np.median(pooled, axis=0)
    lo, hi = np.quantile(pooled, ci, axis=0)
    if m >= 2 and n >= 10:
        rhat = gelman_rubin(post)
    else:
        rhat = np.full(d, np.nan)
    return PosteriorSummary(names, med, lo, hi, np.atleast_1d(rhat), n * m, tuple(ci))
