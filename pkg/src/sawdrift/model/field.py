"""Single-step building blocks of the lattice model.

These functions operate on an explicit :class:`ActivationField` and are
written for clarity; the compiled loops in :mod:`sawdrift.model._kernels`
run the same recurrences for long trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalUnderflow
from .params import ModelParams, ModelVariant

#: activations and weights are clamped here before taking powers
FLOOR = 1e-300

# absolute slack on the ellipse membership test, so nodes lying exactly on
# the boundary are included irrespective of rounding in the two square roots
ELLIPSE_TOL = 1e-9


def potential_value(i, j, params: ModelParams):
    """Confining potential at node(s) ``(i, j)``; zero at ``(L/2, L/2)``."""
    half = params.L / 2.0
    dist = np.sqrt((np.asarray(i, float) - half) ** 2 + (np.asarray(j, float) - half) ** 2)
    return params.lam * dist ** params.nu / float(params.L) ** params.nu


def build_potential(params: ModelParams) -> np.ndarray:
    idx = np.arange(params.L)
    return potential_value(idx[:, None], idx[None, :], params)


@dataclass
class ActivationField:
    a: np.ndarray
    u: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, params: ModelParams) -> "ActivationField":
        L = params.L
        return cls(a=np.full((L, L), params.a0), u=build_potential(params), t=0)

    def copy(self) -> "ActivationField":
        return ActivationField(self.a.copy(), self.u.copy(), self.t)

    def q(self, params: ModelParams, variant: ModelVariant = ModelVariant.SAW) -> np.ndarray:
        """Summed activation and potential that drives step selection."""
        variant = ModelVariant.parse(variant)
        if variant is ModelVariant.SAW:
            return self.a + self.u
        if variant is ModelVariant.W:
            return params.a0 + self.u
        if variant is ModelVariant.SAW_NP:
            return self.a.copy()
        return np.full_like(self.a, params.a0)


def decay_activation(field: ActivationField, params: ModelParams) -> ActivationField:
    return ActivationField(field.a * params.epsilon, field.u, field.t + 1)


def ellipse_sites(p_prev, p_cur, rho: float, L: int | None = None) -> np.ndarray:
    """Lattice nodes inside the ellipse with foci ``p_prev`` and ``p_cur``.

    The semi-minor axis is ``rho / 2``. Returns an ``(m, 2)`` integer array,
    clipped to ``[0, L)`` when ``L`` is given.
    """
    p1 = np.asarray(p_prev, float)
    p2 = np.asarray(p_cur, float)
    c = 0.5 * np.hypot(*(p2 - p1))
    major = 2.0 * np.sqrt((rho / 2.0) ** 2 + c ** 2)
    mid = 0.5 * (p1 + p2)
    half = major / 2.0
    lo = np.floor(mid - half).astype(int)
    hi = np.ceil(mid + half).astype(int)
    if L is not None:
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, L - 1)
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    d = np.hypot(ii - p1[0], jj - p1[1]) + np.hypot(ii - p2[0], jj - p2[1])
    inside = d <= major + ELLIPSE_TOL
    return np.column_stack([ii[inside], jj[inside]]).astype(np.int64)


def add_trace_activation(field: ActivationField, p_prev, p_cur, params: ModelParams,
                         variant: ModelVariant = ModelVariant.SAW) -> ActivationField:
    variant = ModelVariant.parse(variant)
    if not variant.self_activating:
        return field
    a = field.a.copy()
    sites = ellipse_sites(p_prev, p_cur, params.rho, params.L)
    a[sites[:, 0], sites[:, 1]] += 1.0
    return ActivationField(a, field.u, field.t)


def stepping_kernel(di, dj, params: ModelParams):
    """Unnormalised stepping weight for displacement ``(di, dj)``."""
    return np.exp(-stepping_exponent(di, dj, params))


def stepping_exponent(di, dj, params: ModelParams):
    return ((np.abs(np.asarray(di, float)) / params.r_i) ** params.phi
            + (np.abs(np.asarray(dj, float)) / params.r_j) ** params.phi)


@dataclass
class SelectionMap:
    """Normalised next-step probabilities over the (clipped) window.

    ``probs[k, l]`` is the probability of moving to lattice node
    ``(i0 + k, j0 + l)``.
    """

    probs: np.ndarray
    i0: int
    j0: int
    center: tuple

    def prob(self, i, j) -> float:
        k, l = i - self.i0, j - self.j0
        if 0 <= k < self.probs.shape[0] and 0 <= l < self.probs.shape[1]:
            return float(self.probs[k, l])
        return 0.0

    def nodes(self) -> np.ndarray:
        k, l = np.indices(self.probs.shape)
        return np.column_stack([(k + self.i0).ravel(), (l + self.j0).ravel()])

    def expected_abs_displacement(self) -> tuple[float, float]:
        k, l = np.indices(self.probs.shape)
        di = np.abs(k + self.i0 - self.center[0])
        dj = np.abs(l + self.j0 - self.center[1])
        return float((self.probs * di).sum()), float((self.probs * dj).sum())


def window_bounds(p_cur, params: ModelParams):
    """Inclusive lattice bounds ``(i0, i1, j0, j1)`` of the window."""
    h = params.half_width
    L = params.L
    i, j = int(p_cur[0]), int(p_cur[1])
    return max(i - h, 0), min(i + h, L - 1), max(j - h, 0), min(j + h, L - 1)


def selection_map(field: ActivationField, p_cur, params: ModelParams,
                  variant: ModelVariant = ModelVariant.SAW, floor: float = FLOOR) -> SelectionMap:
    i0, i1, j0, j1 = window_bounds(p_cur, params)
    q = field.q(params, variant)[i0:i1 + 1, j0:j1 + 1]
    di = np.arange(i0, i1 + 1) - int(p_cur[0])
    dj = np.arange(j0, j1 + 1) - int(p_cur[1])
    expo = stepping_exponent(di[:, None], dj[None, :], params)
    w = np.maximum(q, floor) ** (-params.eta) * np.exp(-expo)
    total = w.sum()
    if not total >= floor:
        raise NumericalUnderflow(f"selection mass {total!r} below floor {floor!r}")
    return SelectionMap(w / total, i0, j0, (int(p_cur[0]), int(p_cur[1])))


def linear_select(probs, u):
    """Cumulative-sum inversion: flat index selected by uniform(s) ``u``."""
    cdf = np.cumsum(np.ravel(probs))
    k = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    # u * total can round up to the last cumulative value
    k = np.minimum(k, cdf.size - 1)
    return int(k) if k.ndim == 0 else k


def step(field: ActivationField, p_cur, params: ModelParams, variant, rng) -> tuple[int, int]:
    """Draw the next position from the selection map with one uniform."""
    smap = selection_map(field, p_cur, params, variant)
    k = linear_select(smap.probs, rng.random())
    nk, nl = divmod(k, smap.probs.shape[1])
    return smap.i0 + nk, smap.j0 + nl


def truncation_mass(params: ModelParams, p_cur=None) -> float:
    """Stepping-kernel mass on lattice nodes outside the selection window.

    Measured relative to the kernel mass over the whole lattice, from
    ``p_cur`` (default: the lattice centre). Zero in full-lattice mode.
    """
    L = params.L
    p = (L // 2, L // 2) if p_cur is None else (int(p_cur[0]), int(p_cur[1]))
    idx = np.arange(L)
    w = stepping_kernel(idx[:, None] - p[0], idx[None, :] - p[1], params)
    i0, i1, j0, j1 = window_bounds(p, params)
    inside = w[i0:i1 + 1, j0:j1 + 1].sum()
    return float(1.0 - inside / w.sum())
