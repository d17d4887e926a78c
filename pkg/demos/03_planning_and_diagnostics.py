"""Choosing M before touching the data, then measuring how far the normal
approximation behind the private interval sits from the non-private one.

Run: python3 demos/03_planning_and_diagnostics.py
"""

import numpy as np

from dpwate import SimulationConfig, dp_wate, nonprivate_wate, simulate_dataset
from dpwate.diagnostics import exceedance_frequency, kl_normal, plan_M, theorem3_bound

plan = plan_M(epsilon=1.0, pi=0.5, a=0.05, n=30162, delta=0.10, treated_fraction=0.25)
print("planner:", plan.to_dict())

for M in (50, 100, 200):
    print(f"asymptotic bound on P(KL > 0.5) at M={M}: {theorem3_bound(M, 1.0, 0.5, V=0.0005, c=0.5):.3g}")

# KL(N(tau_bar', V_bar') || N(tau_hat, V_hat)) over several privacy seeds.
# V_bar averages per-partition variances, each roughly M times the full-sample
# V_hat, so the U2 term sits near M/2 however small the noise is.
data, _, _ = simulate_dataset(SimulationConfig(n=10000, eta=2.0), seed=3)
ref = nonprivate_wate(data, "ATE")
kls = []
for seed in range(20):
    release = next(iter(dp_wate(data, ["ATE"], M=100, seed=seed).values())).release
    d = kl_normal(release.tau_private, max(release.v_private, 1e-9), ref.tau_hat, ref.v_hat)
    kls.append(d.kl_value)
print(f"last seed components: U1={d.u1:.3g} U2={d.u2:.3g} U3={d.u3:.3g}")
print(f"median KL over 20 seeds: {np.median(kls):.3g}; share above 0.5: {exceedance_frequency(kls, 0.5):.2f}")
