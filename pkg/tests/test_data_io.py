import numpy as np
import pytest
from hypothesis import given, strategies as hst

from sawdrift.data_io import (Dataset, FormatConfig, RawTrial, SyntheticDataset, discretize,
                              filter_trials, load, make_synthetic, minimal_lattice, prepare,
                              split, to_degrees)
from sawdrift.errors import OffLattice, ParseError, SchemaError, TooFewTrials
from sawdrift.model import ModelParams

MEANS = (-2.5, 5.0, 5.0, 1.5, 2.0)


def _write(path, rows, header="subject,trial,time,x,y"):
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


def _trial_rows(subject, trial, n, x0=0.0, rng=None):
    rng = rng or np.random.default_rng(0)
    xy = x0 + np.cumsum(rng.normal(0, 1e-3, (n, 2)), axis=0)
    return [(subject, trial, 2 * k, *xy[k]) for k in range(n)]


# -- loading -----------------------------------------------------------------

def test_load_two_trials(tmp_path):
    rows = _trial_rows("s1", "1", 10) + _trial_rows("s1", "2", 12)
    trials = load(_write(tmp_path / "g.csv", rows))
    assert [(t.subject_id, t.trial_id, len(t)) for t in trials] == [("s1", "1", 10), ("s1", "2", 12)]
    assert trials[0].dt == pytest.approx(0.002)


def test_load_full_length_trial_unchanged(tmp_path):
    rows = _trial_rows("s1", "1", 1500)
    tr = load(_write(tmp_path / "g.csv", rows))[0]
    assert len(tr) == 1500
    np.testing.assert_array_equal(tr.x, [float(str(r[3])) for r in rows])
    np.testing.assert_allclose(np.diff(tr.t), 0.002)


def test_load_non_monotone_time(tmp_path):
    rows = _trial_rows("s1", "1", 5)
    rows[3] = ("s1", "1", 2, *rows[3][3:])
    with pytest.raises(ParseError) as exc:
        load(_write(tmp_path / "g.csv", rows))
    assert exc.value.line == 5


def test_load_missing_column(tmp_path):
    with pytest.raises(SchemaError):
        load(_write(tmp_path / "g.csv", [("s1", "1", 0, 0.1)], header="subject,trial,time,x"))


def test_load_bad_number(tmp_path):
    with pytest.raises(ParseError):
        load(_write(tmp_path / "g.csv", [("s1", "1", 0, "abc", 0.0)]))


def test_load_rejects_blinks_and_gaps(tmp_path):
    blink = _trial_rows("s1", "1", 6)
    blink[2] = ("s1", "1", 4, "nan", "nan")
    gap = _trial_rows("s1", "2", 6)
    gap[4] = ("s1", "2", 40, *gap[4][3:])
    gap[5] = ("s1", "2", 42, *gap[5][3:])
    ok = _trial_rows("s1", "3", 6)
    rej = []
    trials = load(_write(tmp_path / "g.csv", blink + gap + ok), rejections=rej)
    assert [t.trial_id for t in trials] == ["3"]
    assert [r["trial"] for r in rej] == ["1", "2"]
    with pytest.raises(ParseError):
        load(tmp_path / "g.csv", FormatConfig(on_gap="error"))


def test_load_custom_columns(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("id\tblock\tgx\tgy\n" + "\n".join(f"a\tb\t{k * 1e-3}\t0" for k in range(4)))
    fmt = FormatConfig(subject="id", trial="block", time=None, x="gx", y="gy", delimiter="\t")
    tr = load(p, fmt)[0]
    assert tr.t is None and len(tr) == 4


# -- filtering ---------------------------------------------------------------

def _trial(x, y, tid="t"):
    return RawTrial(np.asarray(x, float), np.asarray(y, float), "s", tid)


def test_filter_keeps_confined_trial():
    th = np.linspace(0, 2 * np.pi, 50)
    kept, excl = filter_trials([_trial(0.2 * np.cos(th), 0.2 * np.sin(th))])
    assert len(kept) == 1 and excl == []


def test_filter_excludes_large_excursion():
    x = np.zeros(100)
    x[50] = 2.0
    kept, excl = filter_trials([_trial(x, np.zeros(100))])
    assert kept == [] and excl[0]["max_excursion"] > 1.2


def test_filter_tie_is_kept():
    # symmetric about 0: max distance from the mean is exactly 1.2
    kept, _ = filter_trials([_trial([-1.2, 1.2], [0.0, 0.0])])
    assert len(kept) == 1
    kept, _ = filter_trials([_trial([-1.2000001, 1.2000001], [0.0, 0.0])])
    assert kept == []


# -- discretisation ----------------------------------------------------------

def test_discretize_examples():
    tr = discretize(_trial([0.0, 0.01, -0.01, -0.003, 0.003], np.zeros(5)))
    # mean is zero, so offsets map directly
    assert tr.positions[:, 0].tolist() == [50, 53, 46, 48, 51]
    assert np.all(tr.positions[:, 1] == 50)


def test_discretize_off_lattice():
    with pytest.raises(OffLattice) as exc:
        discretize(_trial([0.0, 0.2, -0.2], [0, 0, 0]))
    assert exc.value.index == 1
    assert exc.value.suggested_L == 141


def test_minimal_lattice():
    assert minimal_lattice([-50, 49]) == 100
    assert minimal_lattice([0]) == 2


@given(hst.integers(0, 2**32 - 1))
def test_discretize_round_trip_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    xy = np.cumsum(rng.normal(0, 2e-3, (200, 2)), axis=0)
    xy -= xy.mean(axis=0)
    lat = discretize(_trial(*xy.T), L=400)
    again = discretize(to_degrees(lat, L=400), L=400)
    # the lattice trace has a non-zero mean offset; recentering can only
    # shift it by a constant
    shift = again.positions - lat.positions
    assert np.all(shift == shift[0])
    third = discretize(to_degrees(again, L=400), L=400)
    np.testing.assert_array_equal(third.positions, again.positions)


# -- split -------------------------------------------------------------------

def test_split_sizes():
    tr, te = split(range(27))
    assert (len(tr), len(te)) == (18, 9)
    assert len(split(range(3))[0]) == 2


def test_split_disjoint_exhaustive_and_seeded():
    a = split(range(27), rng=4)
    b = split(range(27), rng=4)
    assert a == b
    assert sorted(a[0] + a[1]) == list(range(27))
    assert not set(a[0]) & set(a[1])
    assert split(range(27), rng=5) != a


def test_split_too_few():
    with pytest.raises(TooFewTrials):
        split([1, 2])


# -- prepare / dataset files -------------------------------------------------

def test_prepare_and_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    trials = []
    for s in ("a", "b"):
        for k in range(4):
            xy = np.cumsum(rng.normal(0, 1e-3, (30, 2)), axis=0)
            trials.append(RawTrial(xy[:, 0], xy[:, 1], s, str(k)))
    big = np.zeros(30)
    big[3] = 3.0
    trials.append(RawTrial(big, np.zeros(30), "a", "9"))
    ds = prepare(trials, rng=2)
    assert [len(s.train) for s in ds] == [3, 3]
    assert ds.metadata["exclusions"][0]["trial"] == "9"
    ds.save(tmp_path / "d")
    back = Dataset.load(tmp_path / "d")
    for sid, sub in ds.subjects.items():
        got = back.subjects[sid]
        for a, b in zip(sub.train + sub.test, got.train + got.test):
            np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(sub.raw_test[0].x, got.raw_test[0].x)
    assert "9" in (tmp_path / "d" / "exclusions.csv").read_text()


# -- synthetic data ----------------------------------------------------------

def test_synthetic_layout_matches_experiment():
    syn = make_synthetic(MEANS, n_subjects=1, n_trials=27, n_steps=20, rng=0)
    sub = next(iter(syn.dataset))
    assert (len(sub.train), len(sub.test)) == (18, 9)
    assert all(len(t) == 21 for t in sub.train + sub.test)
    assert np.all(sub.train[0].positions[0] == 50)


def test_synthetic_truth_round_trip(tmp_path):
    syn = make_synthetic([MEANS, (-3.0, 2, 3, 1, 4)], n_subjects=2, n_trials=3, n_steps=5, rng=1)
    syn.write_truth(tmp_path / "truth.json")
    assert SyntheticDataset.read_truth(tmp_path / "truth.json") == syn.truth
    assert syn.truth["subjects"]["S02"]["lambda"] == 4.0


def test_synthetic_seeds_differ():
    a = make_synthetic(MEANS, n_trials=3, n_steps=50, rng=1)
    b = make_synthetic(MEANS, n_trials=3, n_steps=50, rng=2)
    pa = next(iter(a.dataset)).train[0].positions
    pb = next(iter(b.dataset)).train[0].positions
    assert pa.shape == pb.shape and not np.array_equal(pa, pb)


def test_synthetic_degrees_rediscretize_exactly():
    syn = make_synthetic(MEANS, n_trials=3, n_steps=100, rng=3,
                         base=ModelParams.from_theta(MEANS))
    sub = next(iter(syn.dataset))
    raw, lat = sub.raw_train[0], sub.train[0]
    np.testing.assert_allclose(raw.x * 350 + 50, lat.positions[:, 0], atol=1e-9)
