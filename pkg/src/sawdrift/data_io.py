"""Gaze-data ingestion, quality filtering, lattice discretisation, train/test
splitting and synthetic-dataset generation."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import seed_sequence
from .errors import OffLattice, ParseError, SchemaError, TooFewTrials
from .model.dynamics import simulate
from .model.params import LatticeTrajectory, ModelParams, ModelVariant

log = logging.getLogger(__name__)

SAMPLING_RATE = 500.0
DEFAULT_FACTOR = 350.0
DEFAULT_L = 100
# values this close below an integer are floored up to it, so that
# re-discretising a lattice trajectory mapped back to degrees is exact
_SNAP = 1e-9


@dataclass
class RawTrial:
    x: np.ndarray
    y: np.ndarray
    subject_id: str = ""
    trial_id: str = ""
    rate: float = SAMPLING_RATE
    t: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.y = np.asarray(self.y, float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")

    def __len__(self):
        return self.x.size

    @property
    def dt(self) -> float:
        return 1.0 / self.rate

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


@dataclass
class FormatConfig:
    """Column mapping for delimited gaze files.

    ``on_gap`` decides what happens to trials containing missing samples or
    timestamp gaps: ``"reject"`` drops the trial (logged), ``"error"`` raises.
    """

    subject: str = "subject"
    trial: str = "trial"
    time: str | None = "time"
    x: str = "x"
    y: str = "y"
    delimiter: str = ","
    rate: float = SAMPLING_RATE
    time_scale: float = 1e-3
    gap_tolerance: float = 1.5
    on_gap: str = "reject"

    @classmethod
    def from_dict(cls, d: dict | None) -> "FormatConfig":
        d = d or {}
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def load(path, fmt: FormatConfig | None = None, rejections: list | None = None) -> list[RawTrial]:
    """Read a delimited gaze file into time-ordered trials.

    Rows are grouped by (subject, trial) in order of first appearance.
    Timestamps (in units of ``fmt.time_scale`` seconds) must increase
    strictly within a trial.
    """
    fmt = fmt or FormatConfig()
    path = Path(path)
    groups: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=fmt.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        needed = [fmt.subject, fmt.trial, fmt.x, fmt.y] + ([fmt.time] if fmt.time else [])
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}; header is {header}")
        col = {name: header.index(name) for name in needed}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            key = (row[col[fmt.subject]].strip(), row[col[fmt.trial]].strip())
            g = groups.setdefault(key, {"t": [], "x": [], "y": [], "gap": False})
            try:
                xv = _num(row[col[fmt.x]])
                yv = _num(row[col[fmt.y]])
                tv = float(row[col[fmt.time]]) if fmt.time else None
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if tv is not None:
                if g["t"] and not tv > g["t"][-1]:
                    raise ParseError(f"non-monotone timestamp {tv} after {g['t'][-1]} in "
                                     f"subject {key[0]} trial {key[1]}", lineno)
                g["t"].append(tv)
            if math.isnan(xv) or math.isnan(yv):
                g["gap"] = True
            g["x"].append(xv)
            g["y"].append(yv)

    trials = []
    for (subj, trial), g in groups.items():
        reason = None
        if g["gap"]:
            reason = "missing samples (blink or tracking loss)"
        elif g["t"]:
            dts = np.diff(np.asarray(g["t"])) * fmt.time_scale
            if dts.size and dts.max() > fmt.gap_tolerance / fmt.rate:
                reason = f"timestamp gap of {dts.max():.6g} s"
        if reason:
            if fmt.on_gap == "error":
                raise ParseError(f"subject {subj} trial {trial}: {reason}")
            log.info("rejecting subject %s trial %s: %s", subj, trial, reason)
            if rejections is not None:
                rejections.append({"subject": subj, "trial": trial, "reason": reason})
            continue
        t = np.asarray(g["t"]) * fmt.time_scale if g["t"] else None
        trials.append(RawTrial(g["x"], g["y"], subj, trial, fmt.rate, t))
    return trials


def _num(s: str) -> float:
    s = s.strip()
    if s == "" or s.lower() in ("nan", "na", "."):
        return math.nan
    return float(s)


def filter_trials(trials, max_excursion: float = 1.2):
    """Drop trials whose maximum distance from their own mean exceeds ``max_excursion``.

    Returns ``(kept, exclusions)``; the exclusion log holds one dict per
    dropped trial. A trial exactly at the threshold is kept.
    """
    kept, excluded = [], []
    for tr in trials:
        xy = tr.xy
        dist = np.hypot(*(xy - xy.mean(axis=0)).T)
        worst = float(dist.max()) if dist.size else 0.0
        if worst > max_excursion:
            excluded.append({"subject": tr.subject_id, "trial": tr.trial_id,
                             "reason": f"excursion {worst:.6g} deg > {max_excursion} deg",
                             "max_excursion": worst})
        else:
            kept.append(tr)
    return kept, excluded


def discretize(trial: RawTrial, factor: float = DEFAULT_FACTOR, L: int = DEFAULT_L) -> LatticeTrajectory:
    """Map a gaze trace in degrees to lattice nodes.

    The trial mean is subtracted, offsets are scaled by ``factor`` and
    floored, and the result is shifted so the mean lands on ``(L/2, L/2)``.
    Raises :class:`OffLattice` if any sample falls outside ``[0, L)``.
    """
    xy = trial.xy
    k = np.floor((xy - xy.mean(axis=0)) * factor + _SNAP).astype(np.int64)
    pos = k + L // 2
    off = ((pos < 0) | (pos >= L)).any(axis=1)
    if off.any():
        raise OffLattice(int(np.flatnonzero(off)[0]), minimal_lattice(k))
    return LatticeTrajectory(pos, dt=trial.dt, subject_id=trial.subject_id,
                             trial_id=trial.trial_id, metadata={"factor": factor, "L": L})


def minimal_lattice(offsets) -> int:
    """Smallest ``L`` whose centred lattice holds all integer offsets."""
    lo, hi = int(np.min(offsets)), int(np.max(offsets))
    L = 2
    while not (L // 2 + lo >= 0 and L // 2 + hi <= L - 1):
        L += 1
    return L


def to_degrees(traj: LatticeTrajectory, factor: float = DEFAULT_FACTOR, L: int = DEFAULT_L) -> RawTrial:
    """Inverse map of :func:`discretize` up to the trial mean."""
    deg = (traj.positions - L // 2) / factor
    rate = 1.0 / traj.dt if traj.dt else SAMPLING_RATE
    return RawTrial(deg[:, 0], deg[:, 1], traj.subject_id, traj.trial_id, rate)


def split(trials, ratio: float = 2 / 3, rng=None):
    """Disjoint train/test split; deterministic order when ``rng`` is None."""
    trials = list(trials)
    n = len(trials)
    if n < 3:
        raise TooFewTrials(f"need at least 3 trials to split, got {n}")
    n_train = min(max(int(round(n * ratio)), 1), n - 1)
    order = np.arange(n) if rng is None else np.random.default_rng(rng).permutation(n)
    train = [trials[i] for i in sorted(order[:n_train])]
    test = [trials[i] for i in sorted(order[n_train:])]
    return train, test


@dataclass
class SubjectData:
    subject_id: str
    train: list
    test: list
    raw_train: list = field(default_factory=list)
    raw_test: list = field(default_factory=list)

    @property
    def raw(self):
        return self.raw_train + self.raw_test


@dataclass
class Dataset:
    subjects: dict
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.subjects.values())

    def __len__(self):
        return len(self.subjects)

    def save(self, directory) -> None:
        """Write one CSV per subject, ``manifest.json`` and ``exclusions.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        counts = {}
        for sid, sub in self.subjects.items():
            counts[sid] = {"train": len(sub.train), "test": len(sub.test)}
            with open(d / f"subject_{sid}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["split", "trial", "sample", "i", "j", "x_deg", "y_deg"])
                for part, trajs, raws in (("train", sub.train, sub.raw_train),
                                          ("test", sub.test, sub.raw_test)):
                    for k, tr in enumerate(trajs):
                        raw = raws[k] if k < len(raws) else None
                        for s, (i, j) in enumerate(tr.positions):
                            xd = repr(float(raw.x[s])) if raw is not None else ""
                            yd = repr(float(raw.y[s])) if raw is not None else ""
                            w.writerow([part, tr.trial_id, s, int(i), int(j), xd, yd])
        manifest = dict(self.metadata)
        manifest["counts"] = counts
        exclusions = manifest.pop("exclusions", [])
        with open(d / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        with open(d / "exclusions.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["subject", "trial", "reason"], extrasaction="ignore")
            w.writeheader()
            for e in exclusions:
                w.writerow(e)

    @classmethod
    def load(cls, directory) -> "Dataset":
        d = Path(directory)
        with open(d / "manifest.json") as fh:
            meta = json.load(fh)
        dt = 1.0 / meta.get("rate", SAMPLING_RATE)
        subjects = {}
        for sid in meta["counts"]:
            parts = {"train": {}, "test": {}}
            with open(d / f"subject_{sid}.csv", newline="") as fh:
                for row in csv.DictReader(fh):
                    parts[row["split"]].setdefault(row["trial"], []).append(row)
            sub = SubjectData(sid, [], [])
            for part in ("train", "test"):
                for tid, rows in parts[part].items():
                    pos = np.array([[int(r["i"]), int(r["j"])] for r in rows])
                    getattr(sub, part).append(LatticeTrajectory(pos, dt, sid, tid))
                    if rows[0]["x_deg"] != "":
                        raw = RawTrial([float(r["x_deg"]) for r in rows],
                                       [float(r["y_deg"]) for r in rows], sid, tid, 1.0 / dt)
                        getattr(sub, "raw_" + part).append(raw)
            subjects[sid] = sub
        return cls(subjects, meta)


def prepare(trials, factor: float = DEFAULT_FACTOR, L: int = DEFAULT_L,
            max_excursion: float = 1.2, ratio: float = 2 / 3, rng=None,
            metadata: dict | None = None) -> Dataset:
    """Filter, discretise and split raw trials into a :class:`Dataset`."""
    kept, exclusions = filter_trials(trials, max_excursion)
    by_subject: dict = {}
    for tr in kept:
        by_subject.setdefault(tr.subject_id, []).append(tr)
    children = seed_sequence(rng).spawn(len(by_subject)) if rng is not None else None
    subjects = {}
    for k, (sid, raws) in enumerate(by_subject.items()):
        lattice = [discretize(tr, factor, L) for tr in raws]
        if len(raws) < 3:
            exclusions.append({"subject": sid, "trial": "*",
                               "reason": f"only {len(raws)} trials left after filtering"})
            continue
        sub_rng = None if children is None else np.random.default_rng(children[k])
        idx_train, idx_test = split(range(len(raws)), ratio, sub_rng)
        subjects[sid] = SubjectData(sid, [lattice[i] for i in idx_train],
                                    [lattice[i] for i in idx_test],
                                    [raws[i] for i in idx_train], [raws[i] for i in idx_test])
    meta = {"factor": factor, "L": L, "max_excursion": max_excursion, "ratio": ratio,
            "seed": rng if isinstance(rng, int) else None, "rate": SAMPLING_RATE,
            "exclusions": exclusions}
    meta.update(metadata or {})
    return Dataset(subjects, meta)


@dataclass
class SyntheticDataset:
    dataset: Dataset
    truth: dict

    def write_truth(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.truth, fh, indent=2, sort_keys=True)

    @staticmethod
    def read_truth(path) -> dict:
        with open(path) as fh:
            return json.load(fh)


def make_synthetic(true_theta, n_subjects: int = 1, n_trials: int = 27, n_steps: int = 1500,
                   rng=None, base: ModelParams | None = None, ratio: float = 2 / 3,
                   factor: float = DEFAULT_FACTOR, variant=ModelVariant.SAW) -> SyntheticDataset:
    """Simulate subjects with known parameters, packaged like experimental data.

    ``true_theta`` is one parameter vector shared by all subjects or an
    ``(n_subjects, 5)`` array. Every trial starts from the lattice centre
    with a fresh activation field, consistent with the likelihood.
    """
    theta = np.atleast_2d(np.asarray(true_theta.theta if hasattr(true_theta, "theta")
                                     else true_theta, float))
    if theta.shape[0] == 1:
        theta = np.repeat(theta, n_subjects, axis=0)
    base = base or ModelParams.from_theta(theta[0])
    subject_seeds = seed_sequence(rng).spawn(n_subjects)
    subjects = {}
    truth = {"subjects": {}, "n_trials": n_trials, "n_steps": n_steps,
             "fixed": {k: v for k, v in base.to_dict().items()
                       if k not in ("gamma", "r_i", "r_j", "phi", "lam")}}
    for s in range(n_subjects):
        sid = f"S{s + 1:02d}"
        params = base.with_theta(theta[s])
        trial_seeds = subject_seeds[s].spawn(n_trials)
        trajs = []
        for k in range(n_trials):
            res = simulate(params, variant, n_steps, rng=np.random.default_rng(trial_seeds[k]))
            tr = res.trajectory
            tr.subject_id, tr.trial_id = sid, f"T{k + 1:02d}"
            trajs.append(tr)
        train, test = split(trajs, ratio)
        raw = lambda ts: [to_degrees(t, factor, base.L) for t in ts]  # noqa: E731
        subjects[sid] = SubjectData(sid, train, test, raw(train), raw(test))
        truth["subjects"][sid] = dict(zip(("gamma", "r_i", "r_j", "phi", "lambda"),
                                          map(float, theta[s])))
    meta = {"factor": factor, "L": base.L, "ratio": ratio, "rate": SAMPLING_RATE,
            "synthetic": True, "seed": rng if isinstance(rng, int) else None}
    return SyntheticDataset(Dataset(subjects, meta), truth)
