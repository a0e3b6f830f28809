"""Run configuration: nested key-value YAML merged over built-in defaults."""
from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .inference.dream import DreamConfig
from .inference.priors import DEFAULT_PRIOR_TABLE

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "data": {
        "input": None,
        "dataset": None,
        "fits": None,
        "format": {"subject": "subject", "trial": "trial", "time": "time", "x": "x",
                   "y": "y", "delimiter": ",", "rate": 500.0, "time_scale": 1e-3,
                   "gap_tolerance": 1.5, "on_gap": "reject"},
    },
    "discretization": {"factor": 350.0, "L": 100, "max_excursion": 1.2, "ratio": 2 / 3},
    "model": {"variant": "saw", "window": None, "rho": 12.0, "nu": 3.0, "eta": 1.0},
    "priors": {("lambda" if k == "lam" else k): {"mean": m, "sd": s, "lower": lo, "upper": hi}
               for k, (m, s, lo, hi) in DEFAULT_PRIOR_TABLE.items()},
    "sampler": dict(DreamConfig(checkpoint_every=100).to_dict()),
    "simulate": {"steps": 1500, "n_trials": 1, "warmup": 0, "snapshots": []},
    "synthetic": {"n_subjects": 1, "n_trials": 27, "steps": 1500},
    "recover": {"preset": "reduced", "n_iterations": None},
    "detection": {"lambda_thresh": 6.0, "min_duration": 3, "max_amplitude": 1.0,
                  "n_controls": 100, "window_ms": 200.0},
    "microsaccades": {"variants": ["saw", "w", "saw-np"]},
    "statistics": {"short_range_ms": [4.0, 40.0], "long_range_ms": [200.0, 1000.0],
                   "max_lag_ms": 1000.0, "n_angle_bins": 72},
}


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, unknown keys are rejected."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if k not in out:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and k != "priors":
            if not isinstance(v, dict):
                raise ConfigError(f"config key {k!r} must be a mapping")
            out[k] = merge(out[k], v)
        elif k == "priors":
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def _plain(obj):
    """Convert numpy scalars and tuples so YAML output stays plain."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_config(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            user = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {p}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config {p} must be a mapping at the top level")
        cfg = merge(cfg, user)
    if overrides:
        cfg = merge(cfg, overrides)
    return _plain(cfg)


def dump_config(cfg: dict, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(cfg), fh, sort_keys=True, default_flow_style=False)


def read_theta(path) -> dict:
    """Parameter file (YAML or JSON): gamma, r_i, r_j, phi, lambda."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"parameter file not found: {p}")
    try:
        d = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse parameter file {p}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"parameter file {p} must be a mapping")
    d = {("lam" if k == "lambda" else k): v for k, v in d.items()}
    missing = [k for k in ("gamma", "r_i", "r_j", "phi", "lam") if k not in d]
    if missing:
        raise ConfigError(f"parameter file {p} lacks {', '.join(missing)}")
    return d
