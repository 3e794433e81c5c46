"""
Weighted estimation of a separable effect
=========================================

Estimates the risk that would be seen if the adherence component were
held at 1 while the outcome component is held at 0, from a simulated
trial where no such arm exists. Bootstrap bands come from resampling
individuals.
"""

import os

import numpy as np

from sepadh.ipw import estimate_separable, weighted_marginal
from sepadh.oracle import markov_gformula
from sepadh.render import risk_plot
from sepadh.simulate import ScenarioConfig, simulate_trial

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

cfg = ScenarioConfig(n_per_arm=20_000, horizon=12, seed=4, adherence_model=2)
panel = simulate_trial(cfg)

# the full pipeline: fit nuisance models, build cumulative weights,
# compute the weighted risk curve with percentile bands
report = estimate_separable(panel, z_a=1, z_y=0, bootstrap=100, seed=0)
print(report.render())

# the simulator's generating process is known here, so the estimate can
# be scored against the exact interventional risk
truth = markov_gformula(cfg.equations, 1, 0, cfg.horizon)
err = report.curve.final_risk - float(truth[-1])
print(f"exact risk at k=12: {truth[-1]:.4f} (estimation error {err:+.4f})")

# weight diagnostics flag unstable intervals before they bite
worst = max(report.diagnostics, key=lambda d: d["max"])
print(f"largest weight {worst['max']:.2f} at k={worst['k']}, "
      f"effective sample size {worst['ess']:.0f} of {worst['n']}")

# under this generating process holding the outcome channel at 0 leaves
# adherence where the z=1 arm put it, and the weighted marginal agrees
adherence = weighted_marginal(panel, report.weights, "a")
z = panel.column("z")
ks = panel.column("k")
a = panel.column("a")
arm1 = np.array([a[(z == 1) & (ks == k)].mean()
                 for k in adherence.ks])
gap = np.abs(adherence.value - arm1).max()
print(f"weighted adherence vs arm 1 adherence: max gap {gap:.4f}")

# both curves on one deterministic SVG
report.curve.label = "adherence channel 1, outcome channel 0"
report.comparator.label = "arm 1 as randomized"
path = os.path.join(out_dir, "separable_risk.svg")
risk_plot("separable-effect risk", [report.curve,
                                    report.comparator]).write(path)
print(f"plot written to {path}")
