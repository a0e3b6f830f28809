import math

import numpy as np
import pytest
from hypothesis import given, strategies as hst

from oracles import disc_count, ellipse_mask, loglik_steps, potential
from sawdrift.errors import (ConfigError, NonGenerativeVariant, NumericalUnderflow,
                             OffLattice, StepOutOfWindow)
from sawdrift.model import (ActivationField, LatticeTrajectory, ModelParams, ModelVariant,
                            add_trace_activation, build_potential, decay_activation,
                            ellipse_sites, linear_select, log_likelihood, potential_value,
                            replay, selection_map, simulate, step, truncation_mass)

MEANS = (-2.5, 5.0, 5.0, 1.5, 2.0)


def params(theta=MEANS, **kw):
    return ModelParams.from_theta(theta, **kw)


# -- parameters and variants -------------------------------------------------

def test_variant_flags():
    assert ModelVariant.SAW.generative and ModelVariant.W.generative
    assert not ModelVariant.W_NP.generative and not ModelVariant.SAW_NP.generative
    assert ModelVariant.parse("w-np") is ModelVariant.W_NP
    assert ModelVariant.parse("SAW_NP") is ModelVariant.SAW_NP
    with pytest.raises(ConfigError):
        ModelVariant.parse("nope")


def test_params_round_trip_and_validation():
    p = params(window=7, L=40)
    assert ModelParams.from_dict(p.to_dict()) == p
    d = p.to_dict()
    d["lambda"] = d.pop("lam")
    assert ModelParams.from_dict(d) == p
    assert p.epsilon == pytest.approx(1 - 10 ** -2.5)
    assert params(L=40).half_width == 39
    with pytest.raises(ConfigError):
        params((0.5, 5, 5, 1.5, 2))
    with pytest.raises(ConfigError):
        params((-2, 0, 5, 1.5, 2))


# -- potential ---------------------------------------------------------------

def test_potential_centre_is_zero():
    assert potential_value(50, 50, params()) == 0.0


def test_potential_edge_value():
    assert potential_value(100, 50, params((-2, 5, 5, 1.5, 2.0))) == pytest.approx(0.25, abs=1e-15)


def test_potential_corner_value():
    # (sqrt(5000))**3 / 1e6
    assert potential_value(0, 0, params((-2, 5, 5, 1.5, 1.0))) == pytest.approx(
        0.35355339059327373, rel=1e-14)


def test_potential_grid_matches_oracle():
    p = params((-2, 5, 5, 1.5, 3.3), L=17)
    u = build_potential(p)
    ref = np.array([[potential(i, j, 17, 3.3) for j in range(17)] for i in range(17)])
    np.testing.assert_allclose(u, ref, rtol=1e-14)
    assert u.min() >= 0


# -- activation --------------------------------------------------------------

def test_initial_field_and_decay():
    f = ActivationField.initial(params())
    assert np.all(f.a == 0.1)
    assert np.all(decay_activation(f, params((0.0, 5, 5, 1.5, 2))).a == 0.0)
    g = ActivationField(np.ones((3, 3)), np.zeros((3, 3)))
    np.testing.assert_allclose(decay_activation(g, params((-1.0, 5, 5, 1.5, 2))).a, 0.9)


def test_decay_over_a_trial():
    p = params((-3.75, 5, 5, 1.5, 2))
    f = ActivationField.initial(p)
    for _ in range(1500):
        f = decay_activation(f, p)
    # (1 - 10**-3.75)**1500 * 0.1
    assert f.a[0, 0] == pytest.approx(0.07659, abs=5e-5)


def test_ellipse_degenerate_is_disc_of_113():
    s = ellipse_sites((50, 50), (50, 50), 12.0)
    assert len(s) == disc_count(6) == 113


def test_ellipse_matches_brute_force_scan():
    s = ellipse_sites((50, 50), (54, 50), 12.0, 100)
    m = ellipse_mask(100, (50, 50), (54, 50))
    assert {tuple(x) for x in s} == set(zip(*np.nonzero(m)))


@given(hst.integers(0, 29), hst.integers(0, 29), hst.integers(0, 29), hst.integers(0, 29))
def test_ellipse_contains_foci_and_stays_on_lattice(a, b, c, d):
    s = ellipse_sites((a, b), (c, d), 12.0, 30)
    pts = {tuple(x) for x in s}
    assert (a, b) in pts and (c, d) in pts
    assert s.min() >= 0 and s.max() < 30


def test_trace_activation_saw_and_w():
    p = params()
    f = ActivationField.initial(p)
    g = add_trace_activation(f, (50, 50), (50, 50), p, ModelVariant.SAW)
    assert np.count_nonzero(np.isclose(g.a, 1.1)) == 113
    assert np.count_nonzero(np.isclose(g.a, 0.1)) == 100 * 100 - 113
    h = add_trace_activation(g, (50, 50), (50, 50), p, ModelVariant.SAW)
    assert np.count_nonzero(np.isclose(h.a, 2.1)) == 113
    assert add_trace_activation(f, (50, 50), (52, 53), p, ModelVariant.W) is f


# -- selection map -----------------------------------------------------------

def test_selection_map_dihedral_symmetry():
    p = params((-2, 4, 4, 0.8, 2), L=21)
    f = ActivationField(np.full((21, 21), 0.3), np.zeros((21, 21)))
    m = selection_map(f, (10, 10), p, ModelVariant.SAW)
    P = m.probs
    for Q in (P.T, P[::-1], P[:, ::-1], np.rot90(P)):
        np.testing.assert_allclose(P, Q, rtol=1e-13)


def test_selection_map_ratio():
    p = params((-2, 4, 4, 1.0, 0.0), L=11)
    a = np.full((11, 11), 0.5)
    a[5, 7] = 1.0          # q twice that of (5, 3), same |displacement|
    m = selection_map(ActivationField(a, np.zeros((11, 11))), (5, 5), p, ModelVariant.SAW_NP)
    assert m.prob(5, 7) / m.prob(5, 3) == pytest.approx(0.5, rel=1e-13)


@given(hst.integers(0, 2**32 - 1))
def test_selection_map_normalised(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(5, 40))
    theta = (rng.uniform(-3.8, 0), *rng.uniform(0.1, 15, 2), rng.uniform(0.5, 3), rng.uniform(0.3, 8))
    window = None if rng.random() < 0.5 else int(rng.integers(1, L))
    p = params(theta, L=L, window=window)
    f = ActivationField(rng.exponential(2.0, (L, L)), build_potential(p))
    v = list(ModelVariant)[int(rng.integers(4))]
    m = selection_map(f, tuple(rng.integers(0, L, 2)), p, v)
    assert abs(m.probs.sum() - 1.0) < 1e-12
    assert np.all(m.probs >= 0)


def test_selection_map_underflow_raises():
    p = params((-2, 0.1, 0.1, 3.0, 2), L=10, window=1)
    f = ActivationField(np.full((10, 10), 1e300), np.zeros((10, 10)))
    with pytest.raises(NumericalUnderflow):
        selection_map(f, (5, 5), p, ModelVariant.SAW_NP, floor=1e-200)


def test_expected_displacement_increases_with_r_i():
    rng = np.random.default_rng(5)
    for _ in range(100):
        L = 25
        a = rng.exponential(1.0, (L, L))
        theta = [rng.uniform(-3, -1), rng.uniform(0.5, 10), rng.uniform(0.5, 10),
                 rng.uniform(0.5, 3), rng.uniform(0.3, 8)]
        lo = params(theta, L=L)
        theta[1] *= 1.3
        hi = params(theta, L=L)
        pos = tuple(rng.integers(0, L, 2))
        f = ActivationField(a, build_potential(lo))
        e_lo = selection_map(f, pos, lo).expected_abs_displacement()[0]
        e_hi = selection_map(f, pos, hi).expected_abs_displacement()[0]
        assert e_hi > e_lo


def test_truncation_mass_full_lattice_is_zero():
    assert truncation_mass(params((-2, 15, 15, 0.5, 2))) == 0.0
    assert truncation_mass(params((-2, 15, 15, 0.5, 2), window=25)) > 1e-6


# -- step selection ----------------------------------------------------------

def test_linear_select_inverts_cdf():
    probs = np.array([0.1, 0.0, 0.6, 0.3])
    assert linear_select(probs, 0.0) == 0
    assert linear_select(probs, 0.1) == 2
    assert linear_select(probs, 0.6999) == 2
    assert linear_select(probs, 0.7) == 3
    assert linear_select(probs, 0.999999999) == 3


def test_linear_select_frequencies():
    rng = np.random.default_rng(11)
    probs = rng.dirichlet(np.ones(12))
    n = 10**6
    idx = linear_select(probs, rng.random(n))
    counts = np.bincount(idx, minlength=12)
    sd = np.sqrt(n * probs * (1 - probs))
    assert np.all(np.abs(counts - n * probs) < 4 * sd)


def test_step_single_admissible_node():
    p = params((-2, 1, 1, 1, 2), L=2, window=1)
    f = ActivationField(np.full((2, 2), 0.1), np.zeros((2, 2)))
    # every node but one carries a floor-level weight
    f.a[:] = 1e300
    f.a[1, 0] = 0.1
    assert step(f, (0, 0), p, ModelVariant.SAW_NP, np.random.default_rng(0)) == (1, 0)


def test_step_deterministic_given_seed():
    p = params(L=30)
    f = ActivationField.initial(p)
    a = step(f, (15, 15), p, ModelVariant.SAW, np.random.default_rng(4))
    b = step(f, (15, 15), p, ModelVariant.SAW, np.random.default_rng(4))
    assert a == b


# -- simulation --------------------------------------------------------------

def test_simulate_zero_steps():
    res = simulate(params(L=30), n_steps=0, init_pos=(3, 4), rng=1)
    assert res.trajectory.positions.tolist() == [[3, 4]]


def test_simulate_refuses_nongenerative():
    with pytest.raises(NonGenerativeVariant):
        simulate(params(), ModelVariant.W_NP, 10)
    res = simulate(params(L=20), ModelVariant.W_NP, 10, rng=0, allow_nongenerative=True)
    assert res.trajectory.metadata["diagnostic_only"]


def test_simulate_is_reproducible():
    a = simulate(params(), n_steps=300, rng=9).trajectory.positions
    b = simulate(params(), n_steps=300, rng=9).trajectory.positions
    np.testing.assert_array_equal(a, b)


def test_simulate_matches_reference_stepper():
    p = params((-1.5, 3, 4, 1.2, 3.0), L=24)
    n = 200
    fast = simulate(p, ModelVariant.SAW, n, rng=np.random.default_rng(3)).trajectory.positions
    rng = np.random.default_rng(3)
    f = ActivationField.initial(p)
    cur = (12, 12)
    ref = [cur]
    for _ in range(n):
        f = decay_activation(f, p)
        nxt = step(f, cur, p, ModelVariant.SAW, rng)
        f = add_trace_activation(f, cur, nxt, p, ModelVariant.SAW)
        cur = nxt
        ref.append(cur)
    np.testing.assert_array_equal(fast, np.array(ref))


def test_strong_potential_confines_without_self_activation():
    p = params((-2.5, 5, 5, 1.5, 300.0))
    pos = simulate(p, ModelVariant.W, 1500, rng=0).trajectory.positions
    assert np.hypot(*(pos - 50).T).max() < 35


def test_confinement_grows_with_lambda():
    msds = []
    for lam in (0.5, 4.0, 30.0):
        pos = simulate(params((-2.5, 5, 5, 1.5, lam)), n_steps=100_000, rng=1).trajectory.positions
        msds.append(float(((pos - 50.0) ** 2).sum(axis=1).mean()))
    assert np.isfinite(msds).all()
    assert msds[0] > msds[1] > msds[2]


def test_self_avoidance_against_frozen_activation():
    # share of steps landing inside the ellipse activated by the previous step
    def revisits(variant):
        p = params((-3.8, 3, 3, 1.5, 0.3))
        pos = simulate(p, variant, 3000, rng=7).trajectory.positions
        hits = 0
        for t in range(2, len(pos)):
            s = {tuple(x) for x in ellipse_sites(pos[t - 2], pos[t - 1], 12.0, 100)}
            hits += tuple(pos[t]) in s
        return hits / (len(pos) - 2)

    assert revisits(ModelVariant.SAW) < revisits(ModelVariant.W)


# -- likelihood --------------------------------------------------------------

@pytest.mark.parametrize("variant", ["saw", "w", "w-np", "saw-np"])
def test_single_step_likelihood_matches_enumeration(variant):
    theta = (-2.2, 2.5, 4.0, 1.3, 3.0)
    pos = np.array([[7, 7], [9, 6]])
    ll = log_likelihood(pos, params(theta, L=15), variant)
    assert ll == pytest.approx(loglik_steps(pos, theta, 15, variant)[0], abs=1e-12)


def test_flat_kernel_uniform_likelihood():
    # huge half-widths make the stepping kernel flat over an M-node window
    p = params((-2, 1e12, 1e12, 1.0, 2.0), L=40, window=3)
    pos = np.array([[20, 20], [21, 19], [23, 20], [20, 22], [19, 19]])
    total = log_likelihood(pos, p, ModelVariant.W_NP)
    assert total == pytest.approx(-4 * math.log(49), abs=1e-9)
    p_full = params((-2, 1e12, 1e12, 1.0, 2.0), L=12)
    assert log_likelihood(pos[:, :] % 12, p_full, "w-np") == pytest.approx(
        -4 * math.log(144), abs=1e-9)


def test_likelihood_non_positive_and_reproducible():
    p = params()
    tr = simulate(p, n_steps=400, rng=5).trajectory
    a, steps = log_likelihood(tr, p, per_step=True)
    assert a <= 0 and np.all(steps <= 0)
    assert a == log_likelihood(tr, p)
    assert a == pytest.approx(steps.sum())


def test_likelihood_step_out_of_window():
    p = params(L=40, window=3)
    with pytest.raises(StepOutOfWindow) as exc:
        log_likelihood(np.array([[20, 20], [21, 20], [26, 20]]), p)
    assert exc.value.t == 2


def test_likelihood_off_lattice():
    with pytest.raises(OffLattice):
        log_likelihood(np.array([[5, 5], [5, 40]]), params(L=40))


def test_replay_q_trace_is_q_at_occupied_node():
    p = params((-2, 3, 3, 1.5, 2.0), L=20)
    pos = np.array([[10, 10], [11, 10], [11, 12], [9, 12]])
    res = replay(pos, p, "saw")
    f = ActivationField.initial(p)
    for t in range(len(pos)):
        f = decay_activation(f, p)
        assert res.q_trace[t] == pytest.approx(f.q(p, "saw")[tuple(pos[t])], rel=1e-12)
        if t + 1 < len(pos):
            f = add_trace_activation(f, pos[t], pos[t + 1], p, "saw")


def test_lattice_trajectory_checks():
    tr = LatticeTrajectory(np.array([[1, 2], [3, 4]]))
    tr.check_on_lattice(5)
    with pytest.raises(OffLattice):
        tr.check_on_lattice(4)


@pytest.mark.parametrize("variant", ["saw", "w", "w-np", "saw-np"])
def test_trajectory_likelihood_matches_enumeration_per_step(variant):
    theta = (-1.7, 3.0, 2.0, 1.1, 4.0)
    p = params(theta, L=15)
    pos = simulate(p, "saw", 40, init_pos=(7, 7), rng=13).trajectory.positions
    total, steps = log_likelihood(pos, p, variant, per_step=True)
    ref = loglik_steps(pos, theta, 15, variant)
    np.testing.assert_allclose(steps, ref, rtol=0, atol=1e-10)
    assert total == pytest.approx(ref.sum(), abs=1e-9)
