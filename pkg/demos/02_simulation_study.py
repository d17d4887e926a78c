"""A small replication study comparing private and non-private intervals.

Run: python3 demos/02_simulation_study.py [replications]
"""

import sys

from dpwate import SimulationConfig, run_study

R = int(sys.argv[1]) if len(sys.argv) > 1 else 20

for eta in (2.0, 4.0):
    summary = run_study(SimulationConfig(eta=eta, gamma=1.0, replications=R, seed=100))
    print(f"\neta={eta}: {R} replications, {summary.failures} failed")
    print(f"{'estimand':8} {'pipeline':12} {'mean tau':>9} {'RMSE':>7} {'coverage':>9} {'length':>7}")
    for row in summary.rows:
        print(f"{row['estimand']:8} {row['pipeline']:12} {row['mean_true_tau']:9.3f} {row['rmse']:7.3f} "
              f"{row['coverage']:9.2f} {row['mean_ci_length']:7.3f}")

# The overlap histogram (true propensities by arm) is part of every summary.
hist = summary.histogram
print("\ntreated/control counts per propensity bin at eta=4:")
for lo, c, t in zip(hist["bin_edges"], hist["control"], hist["treated"]):
    print(f"  [{lo:.2f}, {lo + 0.05:.2f})  control={c:6d}  treated={t:6d}")
