"""Scoring trajectories: the sequential likelihood and the four model variants.

Data generated by the full model are scored under each variant with the
generating parameters. Removing either the memory or the potential costs
likelihood on every trial.

Run:  python3 demos/02_variants_and_likelihood.py
"""
import numpy as np

from sawdrift.inference import PriorSpec
from sawdrift.model import ModelParams, ModelVariant, log_likelihood, replay, simulate

params = ModelParams.from_theta(PriorSpec.default().means)
trials = [simulate(params, n_steps=1500, rng=100 + k).trajectory for k in range(20)]

scores = {v: np.array([log_likelihood(tr, params, v) for tr in trials]) for v in ModelVariant}
ref = scores[ModelVariant.SAW]
print(f"{'variant':>8} {'mean loglik':>12} {'trials below saw':>17}")
for v, s in scores.items():
    print(f"{v.value:>8} {s.mean():12.1f} {int(np.sum(s < ref)):>12d}/{len(s)}")

# per-step contributions: where the model is surprised
res = replay(trials[0], params)
worst = np.argsort(res.per_step)[:3]
print("\nleast likely steps of trial 1:")
for t in sorted(worst):
    a, b = trials[0].positions[t], trials[0].positions[t + 1]
    print(f"  step {t + 1:4d}: {a.tolist()} -> {b.tolist()}, log p = {res.per_step[t]:.2f}, "
          f"q = {res.q_trace[t]:.3f}")
