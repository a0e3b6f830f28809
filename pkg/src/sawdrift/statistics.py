"""Trajectory statistics: step sizes, turning angles, MSD, Hurst exponents and
activation traces aligned on microsaccades.

Model trajectories are measured in lattice units and raw gaze in degrees;
every result carries a ``unit`` tag so the two are never mixed silently.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import LagTooLarge, NoEvents, NoMovement, NonPositiveMsd, TrajectoryTooShort

N_ANGLE_BINS = 72
SHORT_RANGE_MS = (4.0, 40.0)
LONG_RANGE_MS = (200.0, 1000.0)
MAX_LAG_MS = 1000.0


def _xy(traj):
    """Positions, sample interval and unit of a trajectory-like object."""
    if hasattr(traj, "positions"):
        return np.asarray(traj.positions, float), traj.dt, "lattice"
    if hasattr(traj, "xy"):
        return traj.xy, traj.dt, "deg"
    return np.asarray(traj, float), 0.002, "lattice"


@dataclass
class StepSizes:
    distances: np.ndarray
    mean: float
    unit: str = "lattice"


def step_sizes(traj) -> StepSizes:
    """Euclidean distances between consecutive samples and their mean."""
    xy, _, unit = _xy(traj)
    if len(xy) < 2:
        raise TrajectoryTooShort(f"need at least 2 samples, got {len(xy)}")
    d = np.hypot(*np.diff(xy, axis=0).T)
    return StepSizes(d, float(d.mean()), unit)


@dataclass
class AngleDensity:
    """Histogram density of turning angles on bins over (-180, 180] degrees."""

    centers: np.ndarray
    density: np.ndarray
    mode: str
    n: int = 0

    @property
    def width(self) -> float:
        return 360.0 / len(self.centers)

    @property
    def probabilities(self) -> np.ndarray:
        return self.density * self.width


def angle_bin(angles, n_bins: int = N_ANGLE_BINS) -> np.ndarray:
    """Index of the half-open bin ``(lo, hi]`` holding each angle in degrees."""
    a = np.asarray(angles, float)
    a = np.where(a <= -180.0, a + 360.0, a)
    width = 360.0 / n_bins
    idx = np.ceil((a + 180.0) / width - 1e-12).astype(int) - 1
    return np.clip(idx, 0, n_bins - 1)


def turning_angles(traj, mode: str = "absolute", n_bins: int = N_ANGLE_BINS) -> AngleDensity:
    """Density of absolute step directions or of signed turns between steps.

    Zero-length displacements are dropped before angles are formed, so a
    relative angle compares consecutive *moves*.
    """
    if mode not in ("absolute", "relative"):
        raise ValueError(f"mode must be 'absolute' or 'relative', got {mode!r}")
    xy, _, _ = _xy(traj)
    d = np.diff(xy, axis=0)
    d = d[np.any(d != 0, axis=1)]
    if len(d) == 0:
        raise NoMovement("trajectory never moves")
    if mode == "absolute":
        ang = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
    else:
        if len(d) < 2:
            raise TrajectoryTooShort("relative angles need two non-zero displacements")
        a, b = d[:-1], d[1:]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        ang = np.degrees(np.arctan2(cross, (a * b).sum(axis=1)))
    counts = np.bincount(angle_bin(ang, n_bins), minlength=n_bins)
    width = 360.0 / n_bins
    centers = -180.0 + width * (np.arange(n_bins) + 0.5)
    return AngleDensity(centers, counts / (counts.sum() * width), mode, int(counts.sum()))


def pooled_angles(trajs, mode: str = "absolute", n_bins: int = N_ANGLE_BINS) -> AngleDensity:
    """Angle density over several trials, weighting every angle equally."""
    parts = [turning_angles(t, mode, n_bins) for t in trajs]
    counts = sum(p.probabilities * p.n for p in parts)
    width = 360.0 / n_bins
    return AngleDensity(parts[0].centers, counts / (counts.sum() * width), mode,
                        int(round(counts.sum())))


def ecdf_auc(density) -> float:
    """Mean of the discrete ECDF over bins sorted by position.

    ``density`` is an :class:`AngleDensity` or a vector of bin weights
    (counts or probabilities) already in bin order.
    """
    if isinstance(density, AngleDensity):
        order = np.argsort(density.centers)
        p = density.probabilities[order]
    else:
        p = np.asarray(density, float)
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or p.sum() <= 0:
        raise ValueError("density must be a non-empty, non-negative vector with positive mass")
    ecdf = np.cumsum(p / p.sum())
    return float(ecdf.mean())


@dataclass
class MsdCurve:
    lags: np.ndarray       # in samples
    msd: np.ndarray
    dt: float = 0.002
    unit: str = "lattice"

    @property
    def lag_ms(self) -> np.ndarray:
        return self.lags * self.dt * 1e3

    def to_degrees(self, factor: float) -> "MsdCurve":
        if self.unit == "deg":
            return self
        return MsdCurve(self.lags, self.msd / factor ** 2, self.dt, "deg")


def dyadic_lags(max_lag: int) -> np.ndarray:
    """``0, 1, 2, 4, ...`` below ``max_lag``, with ``max_lag`` itself appended."""
    lags = [0] + [2 ** k for k in range(int(np.log2(max(max_lag, 1))) + 1) if 2 ** k < max_lag]
    return np.array(lags + [max_lag] if max_lag > 0 else lags)


def msd(traj, max_lag: int | None = None, lags=None) -> MsdCurve:
    """Mean squared displacement over all start times for each lag.

    By default lags are dyadic up to 1000 ms.
    """
    xy, dt, unit = _xy(traj)
    if lags is None:
        max_lag = int(round(MAX_LAG_MS * 1e-3 / dt)) if max_lag is None else int(max_lag)
        lags = dyadic_lags(max_lag)
    lags = np.asarray(lags, int)
    if lags.max() >= len(xy):
        raise LagTooLarge(f"lag {lags.max()} needs more than {len(xy)} samples")
    out = np.array([0.0 if k == 0 else float(((xy[k:] - xy[:-k]) ** 2).sum(axis=1).mean())
                    for k in lags])
    return MsdCurve(lags, out, dt, unit)


def mean_msd(curves) -> MsdCurve:
    """Average of per-trial curves evaluated on identical lags."""
    curves = list(curves)
    c0 = curves[0]
    if any(c.unit != c0.unit or not np.array_equal(c.lags, c0.lags) for c in curves):
        raise ValueError("curves must share lags and unit")
    return MsdCurve(c0.lags, np.mean([c.msd for c in curves], axis=0), c0.dt, c0.unit)


def hurst_exponents(curve: MsdCurve, short_range=SHORT_RANGE_MS, long_range=LONG_RANGE_MS):
    """Half the log-log MSD slope within a short and a long lag range (ms)."""
    ms = curve.lag_ms
    out = []
    for lo, hi in (short_range, long_range):
        sel = (ms >= lo - 1e-9) & (ms <= hi + 1e-9)
        if sel.sum() < 2:
            raise ValueError(f"curve has fewer than 2 lags in [{lo}, {hi}] ms")
        y = curve.msd[sel]
        if np.any(y <= 0):
            raise NonPositiveMsd(f"non-positive MSD in [{lo}, {hi}] ms")
        slope = np.polyfit(np.log(ms[sel]), np.log(y), 1)[0]
        out.append(float(slope / 2))
    return tuple(out)


@dataclass
class ActivationTrace:
    """Event-aligned mean of the driving value at the occupied node."""

    lags: np.ndarray          # samples relative to the event
    onset_mean: np.ndarray
    onset_se: np.ndarray
    offset_mean: np.ndarray
    offset_se: np.ndarray
    n_onset: int
    n_offset: int
    dt: float = 0.002

    @property
    def t_ms(self) -> np.ndarray:
        return self.lags * self.dt * 1e3

    def peak(self, which: str = "onset"):
        """``(lag of the maximum, height above the mean of the two edges)``."""
        m = self.onset_mean if which == "onset" else self.offset_mean
        k = int(np.nanargmax(m))
        return int(self.lags[k]), float(m[k] - 0.5 * (m[0] + m[-1]))


def _aligned(q, anchor, half):
    lo, hi = anchor - half, anchor + half + 1
    if lo < 0 or hi > len(q):
        return None
    return q[lo:hi]


def _mean_se(segs, width):
    if not segs:
        return np.full(width, np.nan), np.full(width, np.nan)
    s = np.asarray(segs)
    se = s.std(axis=0, ddof=1) / np.sqrt(len(s)) if len(s) > 1 else np.full(width, np.nan)
    return s.mean(axis=0), se


def activation_around_events(trials, params, variant, events, window_ms: float = 200.0,
                             dt: float = 0.002, q_cache: dict | None = None) -> ActivationTrace:
    """Average ``q_t`` at the occupied node in a window around event onsets and offsets.

    Parameters
    ----------
    trials : dict
        Trial id to lattice trajectory (or ``(n, 2)`` array).
    params : ModelParams
        Usually the posterior median.
    events : sequence of MicrosaccadeEvent
        Their ``trial_id`` must be keys of ``trials``.
    q_cache : dict, optional
        Reused across calls (e.g. for randomised controls) to avoid
        replaying the same trial twice.

    Segments that would run past either end of a trial are dropped.
    """
    from .model.dynamics import replay

    events = list(events)
    if not events:
        raise NoEvents("no events to align on")
    half = int(round(window_ms * 1e-3 / dt))
    cache = {} if q_cache is None else q_cache
    on, off = [], []
    for ev in events:
        key = (ev.trial_id, getattr(variant, "value", variant))
        if key not in cache:
            cache[key] = replay(trials[ev.trial_id], params, variant).q_trace
        q = cache[key]
        for anchor, bucket in ((ev.onset, on), (ev.offset, off)):
            seg = _aligned(q, anchor, half)
            if seg is not None:
                bucket.append(seg)
    if not on and not off:
        raise NoEvents("every event window runs past its trial bounds")
    width = 2 * half + 1
    om, ose = _mean_se(on, width)
    fm, fse = _mean_se(off, width)
    return ActivationTrace(np.arange(-half, half + 1), om, ose, fm, fse, len(on), len(off), dt)


def write_rows(path, header, rows) -> None:
    """Columnar text with full-precision floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_trace(path, traces: dict) -> None:
    """Write labelled traces to one file.

    Keys are ``(subject, source)`` pairs, e.g. ``("all", "control")``.
    """
    rows = []
    for (subject, source), tr in traces.items():
        for k in range(len(tr.lags)):
            rows.append([subject, source, int(tr.lags[k]), float(tr.t_ms[k]),
                         float(tr.onset_mean[k]), float(tr.onset_se[k]),
                         float(tr.offset_mean[k]), float(tr.offset_se[k]),
                         tr.n_onset, tr.n_offset])
    write_rows(path, ["subject", "source", "lag", "t_ms", "onset_mean", "onset_se",
                      "offset_mean", "offset_se", "n_onset", "n_offset"], rows)
