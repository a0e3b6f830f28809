"""Velocity-threshold microsaccade detection and onset randomisation.

Velocities come from a 5-sample moving-window differentiator; a sample is
supra-threshold when it lies outside the ellipse with radii
``lambda_thresh * sigma`` per axis, where ``sigma`` is a median-based scale
of that axis' velocity. Runs of at least ``min_duration`` supra-threshold
samples are events.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateScale, TrialTooShort

MAX_AMPLITUDE = 1.0


@dataclass
class VelocitySeries:
    v: np.ndarray       # (n, 2) deg/s, NaN where masked
    mask: np.ndarray    # True where the velocity is defined

    def __len__(self):
        return len(self.v)


@dataclass(frozen=True)
class MicrosaccadeEvent:
    onset: int
    offset: int
    peak_velocity: float
    amplitude: float
    trial_id: str = ""
    subject_id: str = ""

    @property
    def duration(self) -> int:
        """Number of samples spanned, inclusive of both ends."""
        return self.offset - self.onset + 1


@dataclass
class DetectionConfig:
    lambda_thresh: float = 6.0
    min_duration: int = 3
    max_amplitude: float = MAX_AMPLITUDE


def velocity(xy, dt: float) -> VelocitySeries:
    """Smoothed velocity ``(x[n+2] + x[n+1] - x[n-1] - x[n-2]) / (6 dt)``."""
    xy = np.asarray(xy, float)
    if xy.ndim == 1:
        xy = xy[:, None]
    n = len(xy)
    if n < 5:
        raise TrialTooShort(f"velocity needs at least 5 samples, got {n}")
    v = np.full(xy.shape, np.nan)
    v[2:-2] = (xy[4:] + xy[3:-1] - xy[1:-3] - xy[:-4]) / (6.0 * dt)
    mask = np.zeros(n, bool)
    mask[2:-2] = True
    return VelocitySeries(v, mask)


def robust_scale(v) -> np.ndarray:
    """Per-axis ``sqrt(median(v**2) - median(v)**2)`` over defined samples."""
    v = np.asarray(v, float)
    v = v[~np.isnan(v).any(axis=1)]
    return np.sqrt(np.maximum(np.median(v ** 2, axis=0) - np.median(v, axis=0) ** 2, 0.0))


def _runs(flags):
    """``(start, stop)`` inclusive index pairs of maximal True runs."""
    padded = np.concatenate([[False], flags, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2] - 1))


def detect(trial, config: DetectionConfig | None = None, dt: float | None = None,
           trial_id: str | None = None, subject_id: str | None = None):
    """Detect microsaccades in one trial of gaze positions in degrees.

    ``trial`` is a :class:`~sawdrift.data_io.RawTrial` or an ``(n, 2)``
    array (then ``dt`` is required). Events are sorted and never overlap.
    """
    cfg = config or DetectionConfig()
    if hasattr(trial, "xy"):
        xy, dt = trial.xy, trial.dt if dt is None else dt
        trial_id = trial.trial_id if trial_id is None else trial_id
        subject_id = trial.subject_id if subject_id is None else subject_id
    else:
        xy = np.asarray(trial, float)
        if dt is None:
            raise ValueError("dt is required for array input")
    vs = velocity(xy, dt)
    sigma = robust_scale(vs.v)
    if np.any(sigma == 0):
        raise DegenerateScale(f"zero velocity scale on axis {int(np.flatnonzero(sigma == 0)[0])}")
    radius = cfg.lambda_thresh * sigma
    crit = np.zeros(len(xy))
    crit[vs.mask] = ((vs.v[vs.mask] / radius) ** 2).sum(axis=1)
    events = []
    for on, off in _runs(crit > 1.0):
        if off - on + 1 < cfg.min_duration:
            continue
        amp = float(np.hypot(*(xy[off] - xy[on])))
        if amp >= cfg.max_amplitude:
            continue
        peak = float(np.hypot(*vs.v[on:off + 1].T).max())
        events.append(MicrosaccadeEvent(int(on), int(off), peak, amp, trial_id or "",
                                        subject_id or ""))
    return events


def randomize_onsets(events, trial_lengths: dict, rng=None):
    """Move each event to a uniformly random valid onset among a subject's trials.

    ``trial_lengths`` maps trial id to sample count. Durations and the event
    count are preserved; every valid (trial, onset) pair is equally likely.
    """
    rng = np.random.default_rng(rng)
    ids = list(trial_lengths)
    lengths = np.array([trial_lengths[t] for t in ids])
    out = []
    for ev in events:
        span = ev.offset - ev.onset
        slots = np.maximum(lengths - span, 0)
        total = int(slots.sum())
        if total == 0:
            raise ValueError(f"no trial is long enough for an event of {span + 1} samples")
        k = int(rng.integers(total))
        t = int(np.searchsorted(np.cumsum(slots), k, side="right"))
        onset = k - int(slots[:t].sum())
        out.append(replace(ev, onset=onset, offset=onset + span, trial_id=ids[t]))
    return out


EVENT_COLUMNS = ["subject", "trial", "onset", "offset", "peak_velocity", "amplitude"]


def write_events(events, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow([e.subject_id, e.trial_id, e.onset, e.offset, repr(e.peak_velocity),
                        repr(e.amplitude)])


def read_events(path):
    with open(path, newline="") as fh:
        return [MicrosaccadeEvent(int(r["onset"]), int(r["offset"]), float(r["peak_velocity"]),
                                  float(r["amplitude"]), r["trial"], r["subject"])
                for r in csv.DictReader(fh)]
