"""DREAM_ZS: differential-evolution adaptive Metropolis with an archive of past states.

Each chain proposes by adding a scaled difference of two archived states
(parallel-direction update, with per-dimension crossover) or, with a small
probability, by a snooker update through a third archived state. Proposals
outside the prior box are rejected without evaluating the target. The
archive grows by the current chain states every ``archive_period``
generations.
"""
from __future__ import annotations

import csv
import io
import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass
class DreamConfig:
    """Sampler settings.

    ``burn_in`` is a fraction of ``n_iterations`` when below 1, otherwise a
    generation count.
    """

    n_chains: int = 3
    n_iterations: int = 4000
    burn_in: float = 0.5
    p_snooker: float = 0.1
    archive_period: int = 10
    m0: int = 50
    n_pairs: int = 1
    crossover: tuple = (1 / 3, 2 / 3, 1.0)
    jitter: float = 0.05
    noise: float = 1e-6
    p_unit_jump: float = 0.1
    outlier_correction: bool = False
    checkpoint_every: int = 0

    def validate(self, d: int) -> None:
        if self.n_chains < 3:
            raise ConfigError("DREAM_ZS needs at least 3 chains")
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be positive")
        if self.m0 < 10 * d:
            raise ConfigError(f"initial archive m0={self.m0} must hold at least 10*d={10 * d} draws")
        if self.m0 < 2 * self.n_pairs or self.m0 < 3:
            raise ConfigError("initial archive too small for the requested number of pairs")
        if not 0 <= self.p_snooker <= 1 or not 0 <= self.p_unit_jump <= 1:
            raise ConfigError("probabilities must lie in [0, 1]")
        if self.archive_period < 1:
            raise ConfigError("archive_period must be >= 1")
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1")
        if not self.crossover or any(not 0 < c <= 1 for c in self.crossover):
            raise ConfigError("crossover probabilities must lie in (0, 1]")
        if self.burn_in < 0 or (self.burn_in >= 1 and self.burn_in >= self.n_iterations):
            raise ConfigError("burn_in must leave at least one stored generation")
        if self.jitter < 0 or self.noise < 0:
            raise ConfigError("jitter and noise scales must be non-negative")

    def burn_in_length(self) -> int:
        if self.burn_in < 1:
            return int(self.burn_in * self.n_iterations)
        return int(self.burn_in)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crossover"] = list(self.crossover)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DreamConfig":
        d = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "crossover" in d:
            d["crossover"] = tuple(float(c) for c in d["crossover"])
        return cls(**d)


@dataclass
class ChainSet:
    """Sampler state plus the stored per-generation chain states."""

    names: tuple
    samples: np.ndarray          # (n_generations, n_chains, d)
    logp: np.ndarray             # (n_generations, n_chains)
    current: np.ndarray          # (n_chains, d)
    current_logp: np.ndarray     # (n_chains,)
    archive: np.ndarray          # (m, d)
    iteration: int = 0
    accepted: np.ndarray = None
    proposed: np.ndarray = None
    burn_in: int = 0
    rng_state: dict = field(default=None, repr=False)

    @property
    def n_chains(self) -> int:
        return self.current.shape[0]

    @property
    def acceptance_rate(self) -> np.ndarray:
        return self.accepted / np.maximum(self.proposed, 1)

    def post_burn_in(self, burn_in: int | None = None) -> np.ndarray:
        """Stored samples after burn-in, shape ``(n, n_chains, d)``."""
        b = self.burn_in if burn_in is None else burn_in
        return self.samples[b:self.iteration]

    def pooled(self, burn_in: int | None = None) -> np.ndarray:
        s = self.post_burn_in(burn_in)
        return s.reshape(-1, s.shape[-1])

    def write_csv(self, path) -> None:
        """One row per stored sample: chain, iteration, parameters, log_posterior."""
        header = ["chain", "iteration", *("lambda" if n == "lam" else n for n in self.names),
                  "log_posterior"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for it in range(self.iteration):
                for c in range(self.n_chains):
                    w.writerow([c, it + 1, *(repr(float(v)) for v in self.samples[it, c]),
                                repr(float(self.logp[it, c]))])

    @staticmethod
    def read_csv(path):
        """Read a chain file back as ``(samples, logp)`` arrays."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = np.array(rows[1:], dtype=float)
        n_chains = int(body[:, 0].max()) + 1
        n_it = int(body[:, 1].max())
        d = body.shape[1] - 3
        samples = np.empty((n_it, n_chains, d))
        logp = np.empty((n_it, n_chains))
        for row in body:
            c, it = int(row[0]), int(row[1]) - 1
            samples[it, c] = row[2:2 + d]
            logp[it, c] = row[-1]
        return samples, logp

    def save(self, path) -> None:
        """Checkpoint everything needed to resume, including the RNG state.

        The file is an ``.npz`` archive with fixed member timestamps, so equal
        states produce byte-identical files.
        """
        arrays = {"samples": self.samples, "logp": self.logp, "current": self.current,
                  "current_logp": self.current_logp, "archive": self.archive,
                  "accepted": self.accepted, "proposed": self.proposed,
                  "meta": np.array(json.dumps({"names": list(self.names),
                                               "iteration": self.iteration,
                                               "burn_in": self.burn_in,
                                               "rng_state": self.rng_state}))}
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name + ".npy", (1980, 1, 1, 0, 0, 0)),
                            buf.getvalue())

    @classmethod
    def load(cls, path) -> "ChainSet":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            return cls(tuple(meta["names"]), z["samples"], z["logp"], z["current"],
                       z["current_logp"], z["archive"], meta["iteration"], z["accepted"],
                       z["proposed"], meta["burn_in"], meta["rng_state"])


def _propose_parallel(x, archive, cfg: DreamConfig, rng):
    d = x.size
    m = archive.shape[0]
    idx = rng.choice(m, 2 * cfg.n_pairs, replace=False)
    diff = archive[idx[:cfg.n_pairs]].sum(axis=0) - archive[idx[cfg.n_pairs:]].sum(axis=0)
    cr = cfg.crossover[rng.integers(len(cfg.crossover))]
    mask = rng.random(d) < cr
    if not mask.any():
        mask[rng.integers(d)] = True
    d_eff = int(mask.sum())
    if rng.random() < cfg.p_unit_jump:
        gamma = 1.0
    else:
        gamma = 2.38 / np.sqrt(2 * cfg.n_pairs * d_eff)
    e = rng.uniform(-cfg.jitter, cfg.jitter, d)
    zeta = rng.normal(0.0, cfg.noise, d)
    step = (1.0 + e) * gamma * diff + zeta
    prop = x.copy()
    prop[mask] += step[mask]
    return prop, 0.0


def _propose_snooker(x, archive, cfg: DreamConfig, rng):
    d = x.size
    i0, i1, i2 = rng.choice(archive.shape[0], 3, replace=False)
    z = archive[i0]
    direction = x - z
    norm2 = direction @ direction
    if norm2 == 0.0:
        return x.copy(), 0.0
    gamma = rng.uniform(1.2, 2.2)
    proj = direction * ((archive[i1] - archive[i2]) @ direction) / norm2
    prop = x + gamma * proj
    # Jacobian of the snooker move: ratio of distances to the anchor point
    dist_new = np.linalg.norm(prop - z)
    if dist_new == 0.0:
        return prop, -np.inf
    log_jac = (d - 1) * (np.log(dist_new) - 0.5 * np.log(norm2))
    return prop, log_jac


def _correct_outliers(cs: ChainSet, upto: int) -> None:
    start = upto // 2
    mean_lp = cs.logp[start:upto].mean(axis=0)
    q1, q3 = np.percentile(mean_lp, [25, 75])
    bad = mean_lp < q1 - 2.0 * (q3 - q1)
    if bad.any():
        best = int(np.argmax(cs.current_logp))
        cs.current[bad] = cs.current[best]
        cs.current_logp[bad] = cs.current_logp[best]


def _init_chains(target, priors, cfg, rng, max_tries=100):
    current = priors.sample(rng, cfg.n_chains)
    current_logp = np.array([target(x) for x in current])
    for _ in range(max_tries):
        bad = ~np.isfinite(current_logp)
        if not bad.any():
            break
        current[bad] = priors.sample(rng, int(bad.sum()))
        current_logp[bad] = [target(x) for x in current[bad]]
    else:
        raise ConfigError("could not find finite starting points for all chains")
    return current, current_logp


def dream_zs(target, priors, config: DreamConfig | None = None, rng=None,
             initial: ChainSet | None = None, executor=None, checkpoint=None) -> ChainSet:
    """Run DREAM_ZS until ``config.n_iterations`` generations are stored.

    Parameters
    ----------
    target : callable
        ``theta -> log density`` (unnormalised); ``-inf`` is allowed.
    priors : PriorSpec
        Supplies the initial archive and chain draws and the support box.
    config : DreamConfig
    rng : numpy.random.Generator or int
    initial : ChainSet, optional
        Resume from a checkpoint. Its stored RNG state replaces ``rng`` so
        a resumed run reproduces the uninterrupted one.
    executor : concurrent.futures.Executor, optional
        Used to evaluate the chains' proposals of one generation in
        parallel. Results do not depend on scheduling.
    checkpoint : callable, optional
        Called with the ChainSet every ``config.checkpoint_every`` generations.
    """
    cfg = config or DreamConfig()
    d = len(priors.names)
    cfg.validate(d)
    rng = np.random.default_rng(rng)
    n_it = cfg.n_iterations

    if initial is None:
        archive = priors.sample(rng, cfg.m0)
        current, current_logp = _init_chains(target, priors, cfg, rng)
        cs = ChainSet(tuple(priors.names), np.empty((n_it, cfg.n_chains, d)),
                      np.empty((n_it, cfg.n_chains)), current, current_logp, archive, 0,
                      np.zeros(cfg.n_chains, int), np.zeros(cfg.n_chains, int),
                      cfg.burn_in_length())
    else:
        cs = initial
        if cs.rng_state is not None:
            rng.bit_generator.state = cs.rng_state
        if cs.samples.shape[0] < n_it:
            pad = n_it - cs.samples.shape[0]
            cs.samples = np.concatenate([cs.samples, np.empty((pad,) + cs.samples.shape[1:])])
            cs.logp = np.concatenate([cs.logp, np.empty((pad, cs.n_chains))])
        cs.burn_in = cfg.burn_in_length()

    while cs.iteration < n_it:
        props = np.empty_like(cs.current)
        log_jac = np.zeros(cs.n_chains)
        for c in range(cs.n_chains):
            if rng.random() < cfg.p_snooker:
                props[c], log_jac[c] = _propose_snooker(cs.current[c], cs.archive, cfg, rng)
            else:
                props[c], log_jac[c] = _propose_parallel(cs.current[c], cs.archive, cfg, rng)
        inside = [priors.in_support(p) and np.isfinite(lj) for p, lj in zip(props, log_jac)]
        todo = [c for c in range(cs.n_chains) if inside[c]]
        vals = np.full(cs.n_chains, -np.inf)
        if executor is not None:
            results = list(executor.map(target, [props[c] for c in todo]))
        else:
            results = [target(props[c]) for c in todo]
        vals[todo] = results
        log_u = np.log(rng.random(cs.n_chains))
        for c in range(cs.n_chains):
            cs.proposed[c] += 1
            if not np.isfinite(vals[c]):
                continue
            if log_u[c] < vals[c] - cs.current_logp[c] + log_jac[c]:
                cs.current[c] = props[c]
                cs.current_logp[c] = vals[c]
                cs.accepted[c] += 1
        cs.samples[cs.iteration] = cs.current
        cs.logp[cs.iteration] = cs.current_logp
        cs.iteration += 1
        if cs.iteration % cfg.archive_period == 0:
            cs.archive = np.vstack([cs.archive, cs.current])
            if cfg.outlier_correction and cs.iteration <= cs.burn_in:
                _correct_outliers(cs, cs.iteration)
        cs.rng_state = rng.bit_generator.state
        if checkpoint is not None and cfg.checkpoint_every and \
                cs.iteration % cfg.checkpoint_every == 0:
            checkpoint(cs)
    cs.rng_state = rng.bit_generator.state
    return cs
