"""Command-line pipeline: prepare, simulate, fit, recover, ppc, microsaccades, compare.

Every command writes ``config.yaml`` (the resolved configuration) and
``VERSION.txt`` next to its outputs. Exit codes: 0 success, 1 usage or
configuration error, 2 runtime model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import data_io, microsaccades as ms, statistics as st
from ._rng import seed_sequence
from .config import dump_config, load_config, read_theta
from .errors import (ConfigError, DegenerateScale, MissingFit, ModelError, NoEvents,
                     ParseError, SawDriftError, SchemaError, TooFewTrials, TrialTooShort)
from .inference import (ChainSet, DreamConfig, LogPosterior, PosteriorSummary, PriorSpec,
                        SimConfig, dream_zs, posterior_summary, recover)
from .model import FREE_PARAMS, ModelParams, ModelVariant, log_likelihood, replay, simulate

log = logging.getLogger("sawdrift")

USAGE_ERRORS = (ConfigError, MissingFit, SchemaError, ParseError, TooFewTrials,
                FileNotFoundError)
PARAM_COLUMNS = ("gamma", "r_i", "r_j", "phi", "lambda")
RECOVERY_PRESETS = {"reduced": (SimConfig.reduced, 2000), "full": (SimConfig, 4000)}


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(p, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d, help="master seed (u64)")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--threads", type=int, default=d, help="worker threads for chains")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sawdrift", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"sawdrift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = command("prepare", "ingest raw gaze or synthesise a dataset")
    p.add_argument("--input", help="delimited gaze file")
    p.add_argument("--synthetic", action="store_true", help="simulate a dataset instead")
    p.add_argument("--theta-file", help="true parameters for --synthetic")
    p.add_argument("--n-subjects", type=int)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--steps", type=int)

    p = command("simulate", "simulate trajectories")
    p.add_argument("--theta-file", help="parameter file (YAML/JSON); prior means if omitted")
    p.add_argument("--steps", type=int)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--variant")
    p.add_argument("--allow-nongenerative", action="store_true")
    p.add_argument("--snapshots", help="comma-separated step indices to store the field at")

    p = command("fit", "estimate parameters per subject")
    p.add_argument("--dataset")
    p.add_argument("--subjects", help="comma-separated subset")
    p.add_argument("--iterations", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--resume", action="store_true", help="continue from checkpoints")

    p = command("recover", "parameter recovery on a synthetic subject")
    p.add_argument("--preset", choices=sorted(RECOVERY_PRESETS))
    p.add_argument("--theta-file")
    p.add_argument("--iterations", type=int)

    for name, help in (("ppc", "posterior predictive statistics"),
                       ("microsaccades", "detect events and align activation"),
                       ("compare", "test log-likelihood of model variants")):
        p = command(name, help)
        p.add_argument("--dataset")
        p.add_argument("--fits", help="output directory of a fit run")
        if name == "microsaccades":
            p.add_argument("--variants", help="comma-separated variants")
            p.add_argument("--n-controls", type=int)
    return parser


# -- helpers ---------------------------------------------------------------

def _base_params(cfg, L=None) -> ModelParams:
    m = cfg["model"]
    means = PriorSpec.from_dict(cfg["priors"]).means
    return ModelParams.from_theta(means, rho=float(m["rho"]), nu=float(m["nu"]),
                                  eta=float(m["eta"]), window=m["window"],
                                  L=int(L if L is not None else cfg["discretization"]["L"]))


def _theta(args, cfg) -> np.ndarray:
    if getattr(args, "theta_file", None):
        d = read_theta(args.theta_file)
        return np.array([float(d[k]) for k in FREE_PARAMS])
    return PriorSpec.from_dict(cfg["priors"]).means


def _executor(cfg):
    n = int(cfg["threads"] or 1)
    return ThreadPoolExecutor(n) if n > 1 else nullcontext(None)


def _dataset(args, cfg) -> data_io.Dataset:
    path = getattr(args, "dataset", None) or cfg["data"]["dataset"]
    if not path:
        raise ConfigError("no dataset given (--dataset or data.dataset)")
    if not (Path(path) / "manifest.json").is_file():
        raise ConfigError(f"not a prepared dataset directory: {path}")
    return data_io.Dataset.load(path)


def _fits(args, cfg, dataset) -> dict:
    """Posterior medians per subject from a fit output directory."""
    path = getattr(args, "fits", None) or cfg["data"]["fits"]
    if not path:
        raise MissingFit("no fit directory given (--fits or data.fits)")
    out = {}
    for sid in dataset.subjects:
        f = Path(path) / "fits" / sid / "summary.csv"
        if not f.is_file():
            raise MissingFit(f"no fitted summary for subject {sid} at {f}")
        out[sid] = PosteriorSummary.read_csv(f)
    return out


def _write_rows(path, header, rows):
    st.write_rows(path, header, rows)


def _stamp(out: Path, cfg: dict, args) -> None:
    out.mkdir(parents=True, exist_ok=True)
    record = {k: v for k, v in sorted(vars(args).items())
              if k not in ("out", "config") and v is not None}
    dump_config({"command": args.command, "arguments": record, "resolved": cfg},
                out / "config.yaml")
    import numba
    import scipy
    (out / "VERSION.txt").write_text(
        f"sawdrift {__version__}\npython {platform.python_version()}\n"
        f"numpy {np.__version__}\nscipy {scipy.__version__}\nnumba {numba.__version__}\n")


def _sampler(cfg, args=None) -> DreamConfig:
    d = dict(cfg["sampler"])
    if args is not None and getattr(args, "iterations", None):
        d["n_iterations"] = args.iterations
    if args is not None and getattr(args, "chains", None):
        d["n_chains"] = args.chains
    return DreamConfig.from_dict(d)


# -- commands --------------------------------------------------------------

def cmd_prepare(args, cfg, out: Path) -> None:
    disc = cfg["discretization"]
    factor, L = float(disc["factor"]), int(disc["L"])
    if args.synthetic:
        syn = cfg["synthetic"]
        sy = data_io.make_synthetic(
            _theta(args, cfg), args.n_subjects or syn["n_subjects"],
            args.n_trials or syn["n_trials"], args.steps or syn["steps"],
            rng=cfg["seed"], base=_base_params(cfg, L), ratio=float(disc["ratio"]),
            factor=factor)
        sy.dataset.save(out)
        sy.write_truth(out / "truth.json")
        return
    path = args.input or cfg["data"]["input"]
    if not path:
        raise ConfigError("prepare needs --input (or data.input) or --synthetic")
    if not Path(path).is_file():
        raise ConfigError(f"input file not found: {path}")
    rejections: list = []
    trials = data_io.load(path, data_io.FormatConfig.from_dict(cfg["data"]["format"]),
                          rejections)
    ds = data_io.prepare(trials, factor, L, float(disc["max_excursion"]),
                         float(disc["ratio"]), rng=cfg["seed"],
                         metadata={"source": str(path)})
    ds.metadata["exclusions"] = rejections + ds.metadata.get("exclusions", [])
    ds.save(out)


def cmd_simulate(args, cfg, out: Path) -> None:
    sim = cfg["simulate"]
    variant = ModelVariant.parse(args.variant or cfg["model"]["variant"])
    params = _base_params(cfg).with_theta(_theta(args, cfg))
    steps = args.steps or sim["steps"]
    n_trials = args.n_trials or sim["n_trials"]
    snaps = ([int(s) for s in args.snapshots.split(",")] if args.snapshots
             else list(sim["snapshots"]))
    children = seed_sequence(cfg["seed"]).spawn(n_trials)
    for k in range(n_trials):
        res = simulate(params, variant, steps, rng=np.random.default_rng(children[k]),
                       warmup=int(sim["warmup"]), allow_nongenerative=args.allow_nongenerative,
                       snapshot_steps=snaps)
        pos = res.trajectory.positions
        _write_rows(out / f"trajectory_{k + 1:02d}.csv", ["sample", "i", "j", "q"],
                    [[t, int(pos[t, 0]), int(pos[t, 1]), float(res.q_trace[t])]
                     for t in range(len(pos))])
        for t, grid in sorted(res.snapshots.items()):
            np.save(out / f"snapshot_{k + 1:02d}_{t:05d}.npy", grid)
    with open(out / "params.json", "w") as fh:
        json.dump({**params.to_dict(), "variant": variant.value}, fh, indent=2, sort_keys=True)


def _fit_subject(sid, trials, cfg, sampler, priors, base, variant, seed, sdir: Path,
                 resume: bool, executor):
    sdir.mkdir(parents=True, exist_ok=True)
    ckpt = sdir / "checkpoint.npz"
    initial = ChainSet.load(ckpt) if resume and ckpt.is_file() else None
    target = LogPosterior(trials, priors, variant, base)
    chains = dream_zs(target, priors, sampler, np.random.default_rng(seed), initial=initial,
                      executor=executor, checkpoint=lambda cs: cs.save(ckpt))
    chains.save(ckpt)
    chains.write_csv(sdir / "chains.csv")
    summary = posterior_summary(chains)
    summary.write_csv(sdir / "summary.csv")
    return summary, chains


def cmd_fit(args, cfg, out: Path) -> None:
    ds = _dataset(args, cfg)
    sampler = _sampler(cfg, args)
    priors = PriorSpec.from_dict(cfg["priors"])
    variant = ModelVariant.parse(cfg["model"]["variant"])
    base = _base_params(cfg, ds.metadata.get("L"))
    sids = sorted(ds.subjects)
    seeds = dict(zip(sids, seed_sequence(cfg["seed"]).spawn(len(sids))))
    chosen = args.subjects.split(",") if args.subjects else sids
    unknown = [s for s in chosen if s not in ds.subjects]
    if unknown:
        raise ConfigError(f"unknown subjects: {', '.join(unknown)}")
    rows, rhat_rows, failures = [], [], []
    with _executor(cfg) as ex:
        for sid in chosen:
            try:
                summary, chains = _fit_subject(sid, ds.subjects[sid].train, cfg, sampler,
                                               priors, base, variant, seeds[sid],
                                               out / "fits" / sid, args.resume, ex)
            except SawDriftError as exc:
                failures.append([sid, type(exc).__name__, str(exc)])
                log.warning("fit failed for %s: %s", sid, exc)
                continue
            for r in summary.rows():
                rows.append([sid, r["parameter"], r["median"], r["ci_lower"], r["ci_upper"],
                             r["rhat"], r["n_samples"]])
                rhat_rows.append([sid, r["parameter"], r["rhat"], bool(r["rhat"] < 1.1)])
            rhat_rows.append([sid, "acceptance", float(chains.acceptance_rate.mean()), ""])
    _write_rows(out / "summary.csv", ["subject", "parameter", "median", "ci_lower", "ci_upper",
                                      "rhat", "n_samples"], rows)
    _write_rows(out / "rhat.csv", ["subject", "parameter", "value", "converged"], rhat_rows)
    _write_rows(out / "failures.csv", ["subject", "error", "message"], failures)
    if failures and len(failures) == len(chosen):
        raise ModelError(f"all {len(chosen)} subject fits failed; see failures.csv")


def cmd_recover(args, cfg, out: Path) -> None:
    preset = args.preset or cfg["recover"]["preset"]
    make_sim, default_its = RECOVERY_PRESETS[preset]
    sampler = _sampler(cfg)
    n_it = args.iterations or cfg["recover"]["n_iterations"] or default_its
    sampler = replace(sampler, n_iterations=int(n_it), checkpoint_every=0)
    sim = make_sim()
    sim.base = _base_params(cfg)
    with _executor(cfg) as ex:
        rep = recover(_theta(args, cfg), sim, sampler, rng=cfg["seed"],
                      priors=PriorSpec.from_dict(cfg["priors"]), executor=ex)
    _write_rows(out / "recovery.csv", ["parameter", "truth", "median", "ci_lower", "ci_upper",
                                       "rhat", "covered"],
                [[r["parameter"], r["truth"], r["median"], r["ci_lower"], r["ci_upper"],
                  r["rhat"], r["covered"]] for r in rep.rows()])
    rep.chains.write_csv(out / "chains.csv")


def _simulate_matched(params, trials, seed):
    """One simulated trial per observed trial, with identical length."""
    children = seed_sequence(seed).spawn(len(trials))
    out = []
    for tr, ch in zip(trials, children):
        res = simulate(params, ModelVariant.SAW, len(tr) - 1, rng=np.random.default_rng(ch))
        out.append(res.trajectory)
    return out


def cmd_ppc(args, cfg, out: Path) -> None:
    ds = _dataset(args, cfg)
    fits = _fits(args, cfg, ds)
    base = _base_params(cfg, ds.metadata.get("L"))
    sc = cfg["statistics"]
    nb = int(sc["n_angle_bins"])
    sids = sorted(ds.subjects)
    seeds = dict(zip(sids, seed_sequence(cfg["seed"]).spawn(len(sids))))
    steps, step_params, angles, aucs, msd_rows, hurst = [], [], {}, [], [], []
    for sid in sids:
        data = ds.subjects[sid].test
        params = base.with_theta(fits[sid].median)
        sims = _simulate_matched(params, data, seeds[sid])
        means = {}
        for source, trajs in (("data", data), ("sim", sims)):
            sizes = [st.step_sizes(t).mean for t in trajs]
            means[source] = float(np.mean(sizes))
            steps += [[sid, source, k + 1, s] for k, s in enumerate(sizes)]
            dt = trajs[0].dt
            max_lag = int(round(float(sc["max_lag_ms"]) * 1e-3 / dt))
            curve = st.mean_msd(st.msd(t, max_lag) for t in trajs)
            msd_rows += [[sid, source, float(curve.lag_ms[k]), float(curve.msd[k]), curve.unit]
                         for k in range(len(curve.lags))]
            means["H_" + source] = st.hurst_exponents(curve, sc["short_range_ms"],
                                                      sc["long_range_ms"])
        step_params.append([sid, *map(float, fits[sid].median), means["data"], means["sim"]])
        hurst.append([sid, *means["H_data"], *means["H_sim"]])
        for mode in ("absolute", "relative"):
            dens = {src: st.pooled_angles(trajs, mode, nb)
                    for src, trajs in (("data", data), ("sim", sims))}
            angles.setdefault(mode, [])
            for src, d in dens.items():
                angles[mode] += [[sid, src, float(c), float(v)]
                                 for c, v in zip(d.centers, d.density)]
            aucs.append([sid, mode, st.ecdf_auc(dens["data"]), st.ecdf_auc(dens["sim"])])
    _write_rows(out / "step_sizes.csv", ["subject", "source", "trial", "mean_step"], steps)
    _write_rows(out / "step_size_params.csv",
                ["subject", *PARAM_COLUMNS, "mean_step_data", "mean_step_sim"], step_params)
    for mode, rows in angles.items():
        _write_rows(out / f"angles_{mode}.csv", ["subject", "source", "bin_center", "density"],
                    rows)
    _write_rows(out / "ecdf_auc.csv", ["subject", "mode", "auc_data", "auc_sim"], aucs)
    _write_rows(out / "msd.csv", ["subject", "source", "lag_ms", "msd", "unit"], msd_rows)
    _write_rows(out / "hurst.csv", ["subject", "h_short_data", "h_long_data", "h_short_sim",
                                    "h_long_sim"], hurst)


def cmd_microsaccades(args, cfg, out: Path) -> None:
    ds = _dataset(args, cfg)
    fits = _fits(args, cfg, ds)
    base = _base_params(cfg, ds.metadata.get("L"))
    det = cfg["detection"]
    dcfg = ms.DetectionConfig(float(det["lambda_thresh"]), int(det["min_duration"]),
                              float(det["max_amplitude"]))
    n_controls = args.n_controls if args.n_controls is not None else int(det["n_controls"])
    names = args.variants.split(",") if args.variants else cfg["microsaccades"]["variants"]
    variants = [ModelVariant.parse(v) for v in names]
    sids = sorted(ds.subjects)
    seeds = dict(zip(sids, seed_sequence(cfg["seed"]).spawn(len(sids))))
    all_events, skipped = [], []
    per_subject = {}
    for sid in sids:
        sub = ds.subjects[sid]
        if len(sub.raw) != len(sub.train) + len(sub.test):
            skipped.append([sid, "no raw gaze stored with the dataset"])
            continue
        lattice = {f"{sid}/{t.trial_id}": t for t in sub.train + sub.test}
        events = []
        for raw in sub.raw:
            key = f"{sid}/{raw.trial_id}"
            try:
                found = ms.detect(raw, dcfg)
            except (DegenerateScale, TrialTooShort) as exc:
                skipped.append([sid, f"trial {raw.trial_id}: {type(exc).__name__}: {exc}"])
                continue
            events += [replace(e, trial_id=key) for e in found]
        all_events += events
        if not events:
            skipped.append([sid, "NoEvents: no microsaccades detected"])
            continue
        rng = np.random.default_rng(seeds[sid])
        lengths = {k: len(t) for k, t in lattice.items()}
        controls = [e for _ in range(n_controls)
                    for e in ms.randomize_onsets(events, lengths, rng)]
        per_subject[sid] = (lattice, events, controls)

    ms.write_events([replace(e, trial_id=e.trial_id.split("/", 1)[1]) for e in all_events],
                    out / "events.csv")
    window = float(det["window_ms"])
    for variant in variants:
        cache, traces = {}, {}
        pooled_lattice, pooled_events, pooled_controls = {}, [], []
        for sid, (lattice, events, controls) in per_subject.items():
            params = base.with_theta(fits[sid].median)
            for key, tr in lattice.items():
                cache[(key, variant.value)] = replay(tr, params, variant).q_trace
            try:
                traces[(sid, "data")] = st.activation_around_events(
                    lattice, params, variant, events, window, q_cache=cache)
                traces[(sid, "control")] = st.activation_around_events(
                    lattice, params, variant, controls, window, q_cache=cache)
            except NoEvents as exc:
                skipped.append([sid, f"{variant.value}: NoEvents: {exc}"])
                continue
            pooled_lattice.update(lattice)
            pooled_events += events
            pooled_controls += controls
        if pooled_events:
            # every trial is already cached, so the subject parameters are not needed here
            traces[("all", "data")] = st.activation_around_events(
                pooled_lattice, None, variant, pooled_events, window, q_cache=cache)
            traces[("all", "control")] = st.activation_around_events(
                pooled_lattice, None, variant, pooled_controls, window, q_cache=cache)
        st.write_trace(out / f"activation_{variant.value}.csv", traces)
    _write_rows(out / "skipped.csv", ["subject", "reason"], skipped)


def cmd_compare(args, cfg, out: Path) -> None:
    ds = _dataset(args, cfg)
    fits = _fits(args, cfg, ds)
    base = _base_params(cfg, ds.metadata.get("L"))
    avg = base.with_theta(np.mean([f.median for f in fits.values()], axis=0))
    models = [(v.value, v, None) for v in ModelVariant] + [("saw-avg", ModelVariant.SAW, avg)]
    rows, totals = [], {}
    for sid in sorted(ds.subjects):
        params = base.with_theta(fits[sid].median)
        for tr in ds.subjects[sid].test:
            for name, variant, p in models:
                try:
                    ll = log_likelihood(tr, p or params, variant)
                except ModelError:
                    ll = -np.inf
                rows.append([sid, tr.trial_id, name, float(ll)])
                totals.setdefault(name, []).append(ll)
    _write_rows(out / "compare.csv", ["subject", "trial", "model", "loglik"], rows)
    _write_rows(out / "compare_summary.csv", ["model", "mean_loglik", "n_trials"],
                [[name, float(np.mean(v)), len(v)] for name, v in totals.items()])


COMMANDS = {"prepare": cmd_prepare, "simulate": cmd_simulate, "fit": cmd_fit,
            "recover": cmd_recover, "ppc": cmd_ppc, "microsaccades": cmd_microsaccades,
            "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        overrides = {k: getattr(args, k) for k in ("seed", "threads")
                     if getattr(args, k, None) is not None}
        cfg = load_config(args.config, overrides)
        out = Path(args.out or "sawdrift_out")
        _stamp(out, cfg, args)
        COMMANDS[args.command](args, cfg, out)
    except USAGE_ERRORS as exc:
        print(f"sawdrift {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except SawDriftError as exc:
        print(f"sawdrift {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
