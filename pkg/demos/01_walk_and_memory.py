"""A single drift trajectory: how the activation memory and the confining
bowl shape the walk.

Run:  python3 demos/01_walk_and_memory.py
"""
import numpy as np

from sawdrift import statistics as st
from sawdrift.inference import PriorSpec
from sawdrift.model import ModelParams, simulate

theta = PriorSpec.default().means
params = ModelParams.from_theta(theta)
print("parameters at the prior means:", params.to_dict())

# one 3 s trial (1500 samples at 500 Hz), keeping a few field snapshots
res = simulate(params, n_steps=1500, rng=1, snapshot_steps=(0, 500, 1500))
traj = res.trajectory
print(f"\nstart {traj.positions[0].tolist()}, end {traj.positions[-1].tolist()}")
print(f"distinct nodes visited: {len(np.unique(traj.positions, axis=0))} of {len(traj)}")

for t, a in sorted(res.snapshots.items()):
    print(f"  step {t:4d}: activation max {a.max():.2f}, mean {a.mean():.4f}")

# the walk moves away from what it just visited: compare with the memoryless variant
w = simulate(params, "w", n_steps=1500, rng=1).trajectory
for name, tr in (("saw", traj), ("w", w)):
    revisits = len(tr) - len(np.unique(tr.positions, axis=0))
    print(f"{name:>4}: revisits {revisits:4d}, mean step {st.step_sizes(tr).mean:.2f} lattice units")

# persistence at short lags, weaker growth at long lags
curves = [st.msd(simulate(params, n_steps=1500, rng=k).trajectory) for k in range(8)]
h_short, h_long = st.hurst_exponents(st.mean_msd(curves))
print(f"\nHurst exponent: short range {h_short:.2f}, long range {h_long:.2f}")

# the bowl: stronger lambda keeps the walk nearer the centre
for lam in (0.5, 8.0, 100.0):
    p = params.with_theta(np.r_[theta[:4], lam])
    d = [np.hypot(*(simulate(p, n_steps=1500, rng=k).trajectory.positions - 50).T).mean()
         for k in range(4)]
    print(f"lambda {lam:6.1f}: mean distance from centre {np.mean(d):5.1f}")
