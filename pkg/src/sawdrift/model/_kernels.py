"""Compiled inner loops for simulation and sequential likelihood.

The activation grid is stored as ``b`` with a global scale ``s`` so that the
true activation is ``s * b``; decay is then a scalar update. When the scale
drops below ``RESCALE`` the grid is folded back to unit scale.

Status codes returned by the kernels: 0 success, ``k > 0`` an observed step
at time ``k`` outside the window, ``-k < 0`` selection mass below the floor
at time ``k``.
"""
import math

import numpy as np
from numba import njit

RESCALE = 1e-100

SAW, W, W_NP, SAW_NP = 0, 1, 2, 3


@njit(cache=True, nogil=True)
def _decay(b, state, eps):
    s = state[0] * eps
    if s < RESCALE:
        n0, n1 = b.shape
        for i in range(n0):
            for j in range(n1):
                b[i, j] *= s
        s = 1.0
    state[0] = s


@njit(cache=True, nogil=True)
def _activate(b, state, pi, pj, ci, cj, rho, tol):
    L0, L1 = b.shape
    c = 0.5 * math.sqrt((ci - pi) ** 2 + (cj - pj) ** 2)
    major = 2.0 * math.sqrt((rho / 2.0) ** 2 + c * c)
    mi = 0.5 * (pi + ci)
    mj = 0.5 * (pj + cj)
    half = major / 2.0
    i_lo = max(int(math.floor(mi - half)), 0)
    i_hi = min(int(math.ceil(mi + half)), L0 - 1)
    j_lo = max(int(math.floor(mj - half)), 0)
    j_hi = min(int(math.ceil(mj + half)), L1 - 1)
    inc = 1.0 / state[0]
    for i in range(i_lo, i_hi + 1):
        for j in range(j_lo, j_hi + 1):
            d = (math.sqrt((i - pi) ** 2 + (j - pj) ** 2)
                 + math.sqrt((i - ci) ** 2 + (j - cj) ** 2))
            if d <= major + tol:
                b[i, j] += inc


@njit(cache=True, nogil=True)
def _q(b, s, u, a0, mode, i, j):
    if mode == SAW:
        return s * b[i, j] + u[i, j]
    if mode == W:
        return a0 + u[i, j]
    if mode == SAW_NP:
        return s * b[i, j]
    return a0


@njit(cache=True, nogil=True)
def _w(q, eta, floor):
    q = max(q, floor)
    if eta == 1.0:
        return 1.0 / q
    return math.exp(-eta * math.log(q))


@njit(cache=True, nogil=True, error_model="numpy", fastmath={"reassoc"})
def _row_mass(b, s, u, kj, a0, eta, mode, floor, off, cj, i, j0, j1):
    # one loop per variant: a branch inside the loop defeats vectorisation
    row = 0.0
    if eta == 1.0:
        if mode == SAW:
            for j in range(j0, j1 + 1):
                row += kj[j - cj + off] / max(s * b[i, j] + u[i, j], floor)
        elif mode == W:
            for j in range(j0, j1 + 1):
                row += kj[j - cj + off] / max(a0 + u[i, j], floor)
        elif mode == SAW_NP:
            for j in range(j0, j1 + 1):
                row += kj[j - cj + off] / max(s * b[i, j], floor)
        else:
            for j in range(j0, j1 + 1):
                row += kj[j - cj + off] / max(a0, floor)
    else:
        for j in range(j0, j1 + 1):
            q = max(_q(b, s, u, a0, mode, i, j), floor)
            row += kj[j - cj + off] * math.exp(-eta * math.log(q))
    return row


@njit(cache=True, nogil=True)
def _mass(b, s, u, ki, kj, a0, eta, mode, floor, off, ci, cj, i0, i1, j0, j1, rows):
    """Unnormalised selection mass of the window; row sums go to ``rows``."""
    total = 0.0
    for i in range(i0, i1 + 1):
        kio = ki[i - ci + off]
        if kio == 0.0:
            rows[i] = 0.0
            continue
        r = kio * _row_mass(b, s, u, kj, a0, eta, mode, floor, off, cj, i, j0, j1)
        rows[i] = r
        total += r
    return total


@njit(cache=True, nogil=True)
def loglik_kernel(pos, b, state, u, ki, kj, lki, lkj, eps, a0, eta, rho, tol, half, mode,
                  floor, out_ll, out_q):
    """Condition the field on observed positions; fill per-step log-probabilities.

    ``out_q[t]`` receives the driving value ``q`` at the occupied node
    ``pos[t]`` at the moment the step out of it is selected.
    """
    L = b.shape[0]
    off = L - 1
    n = pos.shape[0] - 1
    rows = np.empty(L)
    for t in range(1, n + 1):
        ci = pos[t - 1, 0]
        cj = pos[t - 1, 1]
        if mode == SAW or mode == SAW_NP:
            _decay(b, state, eps)
        s = state[0]
        out_q[t - 1] = _q(b, s, u, a0, mode, ci, cj)
        ni = pos[t, 0]
        nj = pos[t, 1]
        if abs(ni - ci) > half or abs(nj - cj) > half:
            return t
        i0 = max(ci - half, 0)
        i1 = min(ci + half, L - 1)
        j0 = max(cj - half, 0)
        j1 = min(cj + half, L - 1)
        total = _mass(b, s, u, ki, kj, a0, eta, mode, floor, off, ci, cj, i0, i1, j0, j1, rows)
        if not total >= floor:
            return -t
        qn = max(_q(b, s, u, a0, mode, ni, nj), floor)
        out_ll[t - 1] = (lki[ni - ci + off] + lkj[nj - cj + off] - eta * math.log(qn)
                         - math.log(total))
        if mode == SAW or mode == SAW_NP:
            _activate(b, state, ci, cj, ni, nj, rho, tol)
    # value at the final sample, one relaxation later
    ci = pos[n, 0]
    cj = pos[n, 1]
    s = state[0] * eps if (mode == SAW or mode == SAW_NP) else state[0]
    out_q[n] = _q(b, s, u, a0, mode, ci, cj)
    return 0


@njit(cache=True, nogil=True)
def simulate_kernel(pos, uniforms, b, state, u, ki, kj, eps, a0, eta, rho, tol, half,
                    mode, floor, out_q):
    """Generate ``pos[1:]`` from ``pos[0]`` by decay, linear selection, activation."""
    L = b.shape[0]
    off = L - 1
    n = pos.shape[0] - 1
    rows = np.empty(L)
    for t in range(1, n + 1):
        ci = pos[t - 1, 0]
        cj = pos[t - 1, 1]
        if mode == SAW or mode == SAW_NP:
            _decay(b, state, eps)
        s = state[0]
        out_q[t - 1] = _q(b, s, u, a0, mode, ci, cj)
        i0 = max(ci - half, 0)
        i1 = min(ci + half, L - 1)
        j0 = max(cj - half, 0)
        j1 = min(cj + half, L - 1)
        total = _mass(b, s, u, ki, kj, a0, eta, mode, floor, off, ci, cj, i0, i1, j0, j1, rows)
        if not total >= floor:
            return -t
        target = uniforms[t - 1] * total
        # locate the row by its cumulative mass, then the column inside it
        acc = 0.0
        ni = -1
        for i in range(i0, i1 + 1):
            if rows[i] > 0.0:
                ni = i
                if acc + rows[i] > target:
                    break
                acc += rows[i]
        kio = ki[ni - ci + off]
        nj = -1
        for j in range(j0, j1 + 1):
            wgt = kio * kj[j - cj + off] * _w(_q(b, s, u, a0, mode, ni, j), eta, floor)
            if wgt > 0.0:
                nj = j
                acc += wgt
                if acc > target:
                    break
        pos[t, 0] = ni
        pos[t, 1] = nj
        if mode == SAW or mode == SAW_NP:
            _activate(b, state, ci, cj, ni, nj, rho, tol)
    ci = pos[n, 0]
    cj = pos[n, 1]
    s = state[0] * eps if (mode == SAW or mode == SAW_NP) else state[0]
    out_q[n] = _q(b, s, u, a0, mode, ci, cj)
    return 0


def kernel_tables(params):
    """1-D log stepping factors indexed by displacement ``+ (L - 1)``."""
    d = np.abs(np.arange(-(params.L - 1), params.L, dtype=float))
    lki = -(d / params.r_i) ** params.phi
    lkj = -(d / params.r_j) ** params.phi
    return np.exp(lki), np.exp(lkj), lki, lkj
