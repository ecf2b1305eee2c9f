"""
Trajectory fits and selection ratios
====================================

Fits the saturating exponential f(E) = f_inf (1 - A exp(-k E / B_max)) to
the averaged best-so-far trajectory of an energy-budgeted run, and bins
operator choices by the fraction of budget already spent.
"""

import numpy as np

from eij_meta import ExperimentConfig, run_experiment
from eij_meta.analysis import fit_records, selection_ratio_curve

B_MAX = 60.0

cfg = ExperimentConfig(
    problem="nk",
    problem_params={"n": 50, "K": 4},
    algorithm="ssga",
    mode="eos",
    stop_kind="energy",
    stop_value=B_MAX,
    trials=8,
    master_seed=5,
)
recs = run_experiment(cfg, write=False)

fit = fit_records(recs, B_MAX)
print(f"f_inf={fit.f_inf:.4f} A={fit.A:.3f} k={fit.k_rate:.2f} sse={fit.residual_sse:.2e} converged={fit.converged}")
for frac in (0.1, 0.5, 1.0):
    print(f"  model at {frac:.0%} of budget: {fit.predict(frac * B_MAX, B_MAX):.4f}")

edges, ratios = selection_ratio_curve(recs, n_bins=5)
print("budget bin   " + "  ".join(f"{op:>9}" for op in ratios))
for i in range(len(edges) - 1):
    row = "  ".join(f"{ratios[op][i]:9.3f}" for op in ratios)
    print(f"{edges[i]:3.0f}-{edges[i + 1]:3.0f}%     {row}")

print("mean final fitness:", np.mean([r.final_fitness for r in recs]).round(4))
