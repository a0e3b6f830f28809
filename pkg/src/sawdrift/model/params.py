"""Parameter containers and model variants for the lattice walk."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import ConfigError

#: names of the estimated parameters, in vector order
FREE_PARAMS = ("gamma", "r_i", "r_j", "phi", "lam")

#: initial activation of every node
A0 = 0.1


class ModelVariant(enum.Enum):
    """The four model variants used for ablation.

    ``SAW``     self-activation plus confining potential (the full model)
    ``W``       random walk in the potential, activation frozen at ``A0``
    ``W_NP``    random walk without potential, weights flat up to the kernel
    ``SAW_NP``  self-activation without potential
    """

    SAW = "saw"
    W = "w"
    W_NP = "w-np"
    SAW_NP = "saw-np"

    @property
    def generative(self) -> bool:
        return self in (ModelVariant.SAW, ModelVariant.W)

    @property
    def self_activating(self) -> bool:
        return self in (ModelVariant.SAW, ModelVariant.SAW_NP)

    @property
    def has_potential(self) -> bool:
        return self in (ModelVariant.SAW, ModelVariant.W)

    @property
    def code(self) -> int:
        # integer tag understood by the compiled kernels
        return _VARIANT_CODES[self]

    @classmethod
    def parse(cls, value) -> "ModelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise ConfigError(f"unknown model variant {value!r}; expected one of "
                          f"{[v.value for v in cls]}")


_VARIANT_CODES = {ModelVariant.SAW: 0, ModelVariant.W: 1,
                  ModelVariant.W_NP: 2, ModelVariant.SAW_NP: 3}


@dataclass(frozen=True)
class ModelParams:
    """Free parameters plus the fixed constants of the lattice model.

    Parameters
    ----------
    gamma : float
        Decay exponent; the per-step retention factor is ``1 - 10**gamma``.
    r_i, r_j : float
        Stepping-kernel half-widths along the two lattice axes.
    phi : float
        Stepping-kernel slope exponent.
    lam : float
        Slope of the confining potential.
    rho : float
        Full minor-axis length of the activation ellipse.
    nu : float
        Shape exponent of the potential.
    eta : float
        Exponent applied to the summed activation and potential.
    L : int
        Lattice side length.
    window : int or None
        Half-width of the square selection window around the current
        position. ``None`` means the whole lattice is always a candidate.
    """

    gamma: float
    r_i: float
    r_j: float
    phi: float
    lam: float
    rho: float = 12.0
    nu: float = 3.0
    eta: float = 1.0
    L: int = 100
    window: int | None = None
    a0: float = field(default=A0)

    def __post_init__(self):
        if not self.gamma <= 0:
            raise ConfigError(f"gamma must be <= 0, got {self.gamma}")
        if not (self.r_i > 0 and self.r_j > 0):
            raise ConfigError("stepping half-widths must be positive")
        if not self.phi > 0:
            raise ConfigError("phi must be positive")
        if not self.lam >= 0:
            raise ConfigError("lam must be non-negative")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if int(self.L) != self.L or self.L < 2:
            raise ConfigError(f"L must be an integer >= 2, got {self.L}")
        if self.window is not None and self.window < 1:
            raise ConfigError("window half-width must be >= 1")
        if not self.a0 > 0:
            raise ConfigError("initial activation must be positive")

    @property
    def epsilon(self) -> float:
        """Per-step activation retention factor."""
        return 1.0 - 10.0 ** self.gamma

    @property
    def half_width(self) -> int:
        """Effective window half-width (the full lattice when unset)."""
        full = int(self.L) - 1
        return full if self.window is None else min(int(self.window), full)

    @property
    def theta(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in FREE_PARAMS], dtype=float)

    def with_theta(self, theta) -> "ModelParams":
        return replace(self, **dict(zip(FREE_PARAMS, map(float, theta))))

    @classmethod
    def from_theta(cls, theta, **fixed) -> "ModelParams":
        return cls(**dict(zip(FREE_PARAMS, map(float, theta))), **fixed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "lambda" in d and "lam" not in known:
            known["lam"] = d["lambda"]
        return cls(**known)


@dataclass
class LatticeTrajectory:
    """Time-ordered lattice positions of one trial."""

    positions: np.ndarray
    dt: float = 0.002
    subject_id: str = ""
    trial_id: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (n, 2)")
        if pos.size and not np.issubdtype(pos.dtype, np.integer):
            if not np.all(pos == np.floor(pos)):
                raise ValueError("lattice positions must be integers")
        self.positions = pos.astype(np.int64)

    def __len__(self):
        return len(self.positions)

    def check_on_lattice(self, L: int) -> None:
        bad = np.flatnonzero(((self.positions < 0) | (self.positions >= L)).any(axis=1))
        if bad.size:
            from ..errors import OffLattice
            raise OffLattice(int(bad[0]))
