"""
Adaptive vs single-operator search
==================================

Runs the adaptive (EOS) variant of each metaheuristic against its two
single-operator baselines on an NK landscape with a fixed evaluation
budget, then compares final fitness and energy.
"""

import numpy as np

from eij_meta import ExperimentConfig, mann_whitney_u, run_experiment
from eij_meta.solvers import OPERATORS

TRIALS = 10  # raise to 30 or 100 for real comparisons

results = {}
for alg in ("pso", "ils"):
    for mode in ["eos"] + [f"static:{o}" for o in OPERATORS[alg]]:
        cfg = ExperimentConfig(
            problem="nk",
            problem_params={"n": 50, "K": 4},
            algorithm=alg,
            mode=mode,
            stop_kind="evals",
            stop_value=5000,
            trials=TRIALS,
            master_seed=4,
        )
        recs = run_experiment(cfg, write=False)
        results[cfg.method] = recs
        fit = [r.final_fitness for r in recs]
        en = [r.total_energy_j for r in recs]
        print(f"{cfg.method:>10}: fitness {np.mean(fit):.4f} +- {np.std(fit, ddof=1):.4f}   energy {np.mean(en):6.1f} J")

for eos, base in (("EOS-PSO", "PSO-Light"), ("EOS-ILS", "ILS-5")):
    t = mann_whitney_u([r.final_fitness for r in results[eos]], [r.final_fitness for r in results[base]])
    print(f"{eos} vs {base}: U={t.u_statistic:.0f} p={t.p_value:.3g}")

# how the adaptive ILS split its effort
sel = [op for r in results["EOS-ILS"] for op in r.selections()]
print("EOS-ILS selection share:", {op: round(sel.count(op) / len(sel), 3) for op in OPERATORS["ils"]})
