"""Fitting a synthetic subject with DREAM_ZS and checking that the truth is
recovered.

This uses the reduced preset (6 trials of 500 steps). With the default 2000
generations it takes several minutes; pass a smaller number as the first
argument (at least 70) for a quick look (intervals will be wide and R-hat high).

Run:  python3 demos/03_parameter_recovery.py [generations]
"""
import sys

from sawdrift.inference import DreamConfig, PriorSpec, SimConfig, recover

n_gen = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
truth = PriorSpec.default().means

report = recover(truth, SimConfig.reduced(), DreamConfig(n_iterations=n_gen), rng=0)
print(f"{'param':>7} {'truth':>7} {'median':>8} {'98% interval':>20} {'R-hat':>6}")
for row in report.rows():
    print(f"{row['parameter']:>7} {row['truth']:7.2f} {row['median']:8.2f} "
          f"[{row['ci_lower']:7.2f}, {row['ci_upper']:7.2f}] {row['rhat']:6.3f}")
print(f"\n{report.n_covered}/5 true values inside their intervals")
