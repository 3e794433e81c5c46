"""
Simulating a two-arm adherence trial
====================================

Builds a person-period panel for a randomized trial in which adherence
drifts over time, then looks at what came out.
"""

import os

import numpy as np

from sepadh.panel import emit_csv
from sepadh.risk import empirical_cumulative_incidence
from sepadh.simulate import ScenarioConfig, simulate_trial

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

# one config object drives everything: cohort size per arm, number of
# intervals, the adherence feedback model, and the master seed
cfg = ScenarioConfig(n_per_arm=20_000, horizon=12, seed=20260818,
                     adherence_model=2)
panel = simulate_trial(cfg)

print(f"{panel.n_individuals} individuals, {len(panel)} person-periods, "
      f"horizon {panel.horizon}")

# adherence decays differently by arm because the assigned treatment
# feeds back into side effects and symptoms
z = panel.column("z")
a = panel.column("a")
ks = panel.column("k")
for arm in (0, 1):
    rows = z == arm
    prev = [a[rows & (ks == k)].mean() for k in (1, 4, 8, 12)]
    print(f"arm {arm} adherence at k=1,4,8,12: "
          + ", ".join(f"{p:.3f}" for p in prev))

# cumulative incidence by arm, the as-randomized comparison
for arm in (0, 1):
    curve = empirical_cumulative_incidence(panel, arm)
    print(f"arm {arm} risk at k=12: {curve.final_risk:.4f}")

# panels round-trip through a plain CSV
path = os.path.join(out_dir, "trial_panel.csv")
emit_csv(panel, path)
print(f"panel written to {path}")

# the same seed always reproduces the same panel, byte for byte
again = simulate_trial(cfg)
assert np.array_equal(panel.column("y"), again.column("y"))
print("re-simulation with the same seed is identical")
