"""Forward simulation and sequential likelihood of the lattice walk."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonGenerativeVariant, NumericalUnderflow, StepOutOfWindow
from . import _kernels
from .field import ELLIPSE_TOL, FLOOR, ActivationField, build_potential
from .params import LatticeTrajectory, ModelParams, ModelVariant


class _State:
    """Private activation state (grid ``b`` at scale ``s``) for one evaluation."""

    def __init__(self, params: ModelParams, variant: ModelVariant):
        self.params = params
        self.variant = variant
        self.b = np.full((params.L, params.L), params.a0)
        self.scale = np.ones(1)
        self.u = build_potential(params)
        self.ki, self.kj, self.lki, self.lkj = _kernels.kernel_tables(params)

    def field(self, t: int = 0) -> ActivationField:
        return ActivationField(self.b * self.scale[0], self.u, t)


def _raise_status(status: int, pos) -> None:
    if status > 0:
        raise StepOutOfWindow(status, tuple(int(v) for v in pos[status] - pos[status - 1]))
    if status < 0:
        raise NumericalUnderflow(f"selection mass below floor at t={-status}")


@dataclass
class SimulationResult:
    trajectory: LatticeTrajectory
    q_trace: np.ndarray
    final_field: ActivationField
    snapshots: dict = field(default_factory=dict)


def simulate(params: ModelParams, variant=ModelVariant.SAW, n_steps: int = 1500,
             init_pos=None, rng=None, warmup: int = 0, allow_nongenerative: bool = False,
             snapshot_steps=(), dt: float = 0.002, floor: float = FLOOR) -> SimulationResult:
    """Simulate ``n_steps`` moves of the walker.

    Each step relaxes the activation, selects the next node by linear
    selection on one uniform variate, then activates the ellipse spanned by
    the old and new positions. ``warmup`` steps are run first and discarded;
    the recorded trajectory starts where the warm-up ended.

    Parameters
    ----------
    init_pos : tuple, optional
        Starting node; defaults to the lattice centre.
    rng : numpy.random.Generator or int, optional
    snapshot_steps : iterable of int
        Recorded-step indices at which a copy of the activation grid is kept.

    Returns
    -------
    SimulationResult
        The trajectory (``n_steps + 1`` positions), the driving value ``q``
        at the occupied node for every sample, the final field and snapshots.
    """
    variant = ModelVariant.parse(variant)
    if not variant.generative and not allow_nongenerative:
        raise NonGenerativeVariant(
            f"variant {variant.value} has no confining potential and cannot be simulated "
            "meaningfully; pass allow_nongenerative=True for diagnostics")
    rng = np.random.default_rng(rng)
    L = params.L
    start = (L // 2, L // 2) if init_pos is None else tuple(int(v) for v in init_pos)
    if not (0 <= start[0] < L and 0 <= start[1] < L):
        raise ValueError(f"init_pos {start} is not on the lattice")
    st = _State(params, variant)
    # uniforms for warm-up first, then for the recorded steps
    uniforms = rng.random(warmup + n_steps)
    if warmup:
        wpos = np.zeros((warmup + 1, 2), dtype=np.int64)
        wpos[0] = start
        _run_sim(st, wpos, uniforms[:warmup], floor)
        start = tuple(wpos[-1])

    pos = np.zeros((n_steps + 1, 2), dtype=np.int64)
    pos[0] = start
    q_trace = np.empty(n_steps + 1)
    snaps = {}
    cuts = sorted({int(k) for k in snapshot_steps if 0 <= int(k) <= n_steps})
    done = 0
    for cut in cuts + [n_steps]:
        if cut > done:
            seg = pos[done:cut + 1]
            qseg = _run_sim(st, seg, uniforms[warmup + done:warmup + cut], floor)
            q_trace[done:cut] = qseg[:-1]
            done = cut
        if cut in cuts:
            snaps[cut] = st.b * st.scale[0]
    q_trace[n_steps] = _final_q(st, pos[-1])

    meta = {"variant": variant.value, "generative": variant.generative,
            "warmup": warmup, "params": params.to_dict()}
    if not variant.generative:
        meta["diagnostic_only"] = True
    traj = LatticeTrajectory(pos, dt=dt, metadata=meta)
    return SimulationResult(traj, q_trace, st.field(warmup + n_steps), snaps)


def _run_sim(st: _State, pos, uniforms, floor):
    p = st.params
    out_q = np.empty(len(pos))
    status = _kernels.simulate_kernel(
        pos, np.ascontiguousarray(uniforms), st.b, st.scale, st.u, st.ki, st.kj,
        p.epsilon, p.a0, float(p.eta), float(p.rho), ELLIPSE_TOL, p.half_width,
        st.variant.code, floor, out_q)
    _raise_status(status, pos)
    return out_q


def _final_q(st: _State, p_cur):
    # the kernels report q one relaxation after the last move
    i, j = int(p_cur[0]), int(p_cur[1])
    a = st.b[i, j] * st.scale[0]
    if st.variant.self_activating:
        a *= st.params.epsilon
    if st.variant is ModelVariant.SAW:
        return a + st.u[i, j]
    if st.variant is ModelVariant.SAW_NP:
        return a
    if st.variant is ModelVariant.W:
        return st.params.a0 + st.u[i, j]
    return st.params.a0


@dataclass
class LikelihoodResult:
    total: float
    per_step: np.ndarray
    q_trace: np.ndarray


def replay(trajectory, params: ModelParams, variant=ModelVariant.SAW,
           floor: float = FLOOR) -> LikelihoodResult:
    """Run the model conditioned on observed positions.

    Returns the summed log-likelihood, the per-step log-probabilities
    ``log pi_t(x_t)`` and the driving value ``q`` at each occupied node.
    """
    variant = ModelVariant.parse(variant)
    pos = trajectory.positions if isinstance(trajectory, LatticeTrajectory) else trajectory
    pos = np.ascontiguousarray(pos, dtype=np.int64)
    if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
        raise ValueError("trajectory must be a non-empty (n, 2) array")
    if ((pos < 0) | (pos >= params.L)).any():
        from ..errors import OffLattice
        raise OffLattice(int(np.flatnonzero(((pos < 0) | (pos >= params.L)).any(axis=1))[0]))
    st = _State(params, variant)
    n = len(pos) - 1
    out_ll = np.empty(n)
    out_q = np.empty(n + 1)
    status = _kernels.loglik_kernel(
        pos, st.b, st.scale, st.u, st.ki, st.kj, st.lki, st.lkj, params.epsilon,
        params.a0, float(params.eta), float(params.rho), ELLIPSE_TOL, params.half_width,
        variant.code, floor, out_ll, out_q)
    _raise_status(status, pos)
    return LikelihoodResult(float(out_ll.sum()), out_ll, out_q)


def log_likelihood(trajectory, params: ModelParams, variant=ModelVariant.SAW,
                   per_step: bool = False):
    """Natural-log likelihood of one trial; optionally also the per-step terms."""
    res = replay(trajectory, params, variant)
    if per_step:
        return res.total, res.per_step
    return res.total
