import numpy as np
import pytest
from hypothesis import given, strategies as hst

from sawdrift.data_io import RawTrial
from sawdrift.errors import DegenerateScale, TrialTooShort
from sawdrift.microsaccades import (DetectionConfig, MicrosaccadeEvent, detect, randomize_onsets,
                                    read_events, robust_scale, velocity, write_events)

DT = 0.002


def jitter(n=1500, sd=5e-4, seed=0):
    return np.random.default_rng(seed).normal(0, sd, (n, 2))


def inject(xy, start, n_samples, amplitude, angle=0.3):
    """Add a linear ramp of ``amplitude`` deg over ``n_samples`` sample intervals."""
    xy = xy.copy()
    ramp = np.clip((np.arange(len(xy)) - start) / n_samples, 0, 1) * amplitude
    xy[:, 0] += ramp * np.cos(angle)
    xy[:, 1] += ramp * np.sin(angle)
    return xy


# -- velocity ----------------------------------------------------------------

def test_velocity_constant_is_zero():
    vs = velocity(np.ones((20, 2)), DT)
    assert np.all(vs.v[vs.mask] == 0)
    assert not vs.mask[:2].any() and not vs.mask[-2:].any()


def test_velocity_linear_is_exact():
    n = np.arange(30)
    vs = velocity(np.column_stack([2.5 * n * DT, -0.7 * n * DT]), DT)
    np.testing.assert_allclose(vs.v[vs.mask], [[2.5, -0.7]] * 26, rtol=1e-12)


def test_velocity_hand_example():
    vs = velocity(np.array([0, 0, 0, 0.006, 0.012]), DT)
    assert vs.v[2, 0] == pytest.approx(1.5, rel=1e-12)


def test_velocity_too_short():
    with pytest.raises(TrialTooShort):
        velocity(np.zeros((4, 2)), DT)


def test_robust_scale():
    v = np.array([[1.0, 2.0], [-1.0, -2.0], [1.0, 2.0], [-1.0, -2.0], [np.nan, np.nan]])
    np.testing.assert_allclose(robust_scale(v), [1.0, 2.0])


# -- detection ---------------------------------------------------------------

def test_subthreshold_jitter_has_no_events():
    assert detect(jitter(), dt=DT) == []


@pytest.mark.parametrize("amplitude", [0.3, 8 * DT * 30.0])
def test_injected_saccade_is_one_event(amplitude):
    ev = detect(inject(jitter(), 700, 8, amplitude), dt=DT)
    assert len(ev) == 1
    e = ev[0]
    assert abs(e.onset - 700) <= 1 and abs(e.offset - 708) <= 1
    assert e.amplitude == pytest.approx(amplitude, abs=0.01)
    assert e.peak_velocity == pytest.approx(amplitude / (8 * DT), rel=0.1)


def test_duration_filter():
    xy = jitter()
    xy[700:702, 0] += [0.05, -0.05]     # two-sample spike, back to baseline
    assert detect(xy, dt=DT, config=DetectionConfig(min_duration=20)) == []
    # the same trial with a real saccade keeps only that one
    xy = inject(xy, 1000, 8, 0.3)
    ev = detect(xy, dt=DT, config=DetectionConfig(min_duration=6))
    assert [e.onset for e in ev] == [999]


def test_short_burst_rejected_by_min_duration():
    # a single-sample jump: the differentiator smears it over a few samples
    xy = jitter(sd=1e-4)
    vs = velocity(xy, DT)
    sigma = robust_scale(vs.v)
    step = np.zeros(len(xy))
    step[801] = 1.0
    xy2 = xy.copy()
    xy2[:, 0] += np.cumsum(step) * 0.02
    vs2 = velocity(xy2, DT)
    crit = ((vs2.v[vs2.mask] / (6 * sigma)) ** 2).sum(axis=1)
    n_supra = int((crit > 1).sum())
    assert n_supra >= 1
    short = DetectionConfig(min_duration=n_supra + 1)
    assert detect(xy2, dt=DT, config=short) == []
    assert len(detect(xy2, dt=DT, config=DetectionConfig(min_duration=1))) == 1


def test_large_amplitude_discarded():
    assert detect(inject(jitter(), 700, 8, 1.5), dt=DT) == []


def test_degenerate_scale():
    xy = np.zeros((100, 2))
    xy[:, 0] = np.random.default_rng(0).normal(0, 1e-3, 100)
    with pytest.raises(DegenerateScale):
        detect(xy, dt=DT)


def test_detect_on_raw_trial_copies_ids():
    xy = inject(jitter(), 300, 8, 0.3)
    ev = detect(RawTrial(xy[:, 0], xy[:, 1], "s7", "t3"))
    assert (ev[0].subject_id, ev[0].trial_id) == ("s7", "t3")
    with pytest.raises(ValueError):
        detect(xy)


@given(hst.integers(0, 2**32 - 1), hst.floats(-5, 5), hst.floats(-5, 5))
def test_detection_equivariance(seed, cx, cy):
    rng = np.random.default_rng(seed)
    xy = inject(jitter(600, seed=seed), int(rng.integers(50, 500)), int(rng.integers(4, 12)),
                float(rng.uniform(0.05, 0.8)), float(rng.uniform(0, 2 * np.pi)))
    base = [(e.onset, e.offset) for e in detect(xy, dt=DT)]
    shifted = [(e.onset, e.offset) for e in detect(xy + [cx, cy], dt=DT)]
    swapped = [(e.onset, e.offset) for e in detect(xy[:, ::-1], dt=DT)]
    assert base == shifted == swapped


# -- randomised onsets -------------------------------------------------------

def _ev(onset, dur, trial="a"):
    return MicrosaccadeEvent(onset, onset + dur - 1, 10.0, 0.1, trial, "s")


def test_randomize_empty():
    assert randomize_onsets([], {"a": 100}, rng=0) == []


@given(hst.lists(hst.integers(1, 30), max_size=20), hst.integers(0, 2**32 - 1))
def test_randomize_preserves_durations(durs, seed):
    lengths = {"a": 100, "b": 40, "c": 1500}
    evs = [_ev(0, d) for d in durs]
    out = randomize_onsets(evs, lengths, rng=seed)
    assert sorted(e.duration for e in out) == sorted(durs)
    for e in out:
        assert 0 <= e.onset and e.offset < lengths[e.trial_id]
    assert out == randomize_onsets(evs, lengths, rng=seed)


def test_randomize_uniform_onsets():
    ev = _ev(10, 5)
    out = randomize_onsets([ev] * 10_000, {"a": 1500}, rng=1)
    onsets = np.array([e.onset for e in out])
    n_valid = 1500 - 4
    assert onsets.min() >= 0 and onsets.max() < n_valid
    bins = 20
    counts = np.bincount(onsets * bins // n_valid, minlength=bins)
    p = np.bincount(np.arange(n_valid) * bins // n_valid, minlength=bins) / n_valid
    expect = 10_000 * p
    sd = np.sqrt(10_000 * p * (1 - p))
    assert np.all(np.abs(counts - expect) < 4 * sd)


def test_randomize_weights_trials_by_valid_slots():
    out = randomize_onsets([_ev(0, 1)] * 20_000, {"a": 100, "b": 300}, rng=2)
    share = np.mean([e.trial_id == "b" for e in out])
    assert share == pytest.approx(0.75, abs=0.015)


def test_randomize_impossible():
    with pytest.raises(ValueError):
        randomize_onsets([_ev(0, 50)], {"a": 10}, rng=0)


def test_events_file_round_trip(tmp_path):
    evs = [MicrosaccadeEvent(3, 9, 41.25, 0.1234567890123, "t1", "s1"),
           MicrosaccadeEvent(30, 35, 12.0, 0.2, "t2", "s1")]
    write_events(evs, tmp_path / "e.csv")
    assert read_events(tmp_path / "e.csv") == evs
