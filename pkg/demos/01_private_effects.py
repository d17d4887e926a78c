"""Private ATE/ATT/ATC estimates on one synthetic dataset.

Run: python3 demos/01_private_effects.py
"""

from dpwate import PosteriorConfig, PrivacyLedger, SimulationConfig, dp_wate, nonprivate_wate, simulate_dataset

# A dataset from the simulation design with good overlap (eta=2) and a real effect (gamma=1).
data, truth, _ = simulate_dataset(SimulationConfig(n=10000, eta=2.0, gamma=1.0), seed=1)
print(f"n={data.n}, treated={data.n_treated}, control={data.n_control}")

# Each released estimand spends the full epsilon; the ledger keeps the running total.
ledger = PrivacyLedger()
results = dp_wate(data, ["ATE", "ATT", "ATC"], M=100, a=0.05, epsilon=1.0, pi=0.5, seed=1,
                  posterior=PosteriorConfig(L=10000), ledger=ledger)

print(f"{'':4} {'truth':>7} {'non-private (95% CI)':>28} {'private (95% interval)':>30}")
for est, res in results.items():
    np_est = nonprivate_wate(data, est)
    lo, hi = np_est.confidence_interval()
    s = res.summary
    print(f"{est.value:4} {truth[est]:7.3f} {np_est.tau_hat:8.3f} ({lo:6.3f}, {hi:6.3f})      "
          f"{s.point:8.3f} ({s.lower:6.3f}, {s.upper:6.3f})")

# Only the release is publishable; res.debug holds confidential per-partition values.
print("release:", results[next(iter(results))].release.to_dict())
print("epsilon spent on this dataset:", ledger.total(data.fingerprint()))
