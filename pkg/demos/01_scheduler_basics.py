"""
The EI/J scheduler in isolation
===============================

Two synthetic operators: one cheap with small gains, one expensive with
larger gains. We feed the scheduler noisy observations and watch which
operator it prefers as the remaining budget shrinks.
"""

import numpy as np

from eij_meta import Budget, EIJScheduler, SchedulerConfig
from eij_meta.scheduler import budget_penalty, expected_energy, selection_probability

rng = np.random.default_rng(0)
sched = EIJScheduler(["cheap", "pricey"], SchedulerConfig(alpha=0.9), rng)

# ground truth: (mean gain, mean joules)
truth = {"cheap": (0.2, 0.5), "pricey": (1.5, 5.0)}

budget = Budget(200.0)
picks = []
while not budget.exhausted:
    op = sched.select(budget)
    gain, joules = truth[op]
    df = rng.normal(gain, 0.3)
    e = joules * np.exp(rng.normal(0, 0.1))
    sched.observe(op, df, e)
    budget.debit(e)
    picks.append(op)

print(f"{len(picks)} selections, first two: {picks[:2]}")
for q in range(4):
    chunk = picks[q * len(picks) // 4 : (q + 1) * len(picks) // 4]
    print(f"  quarter {q + 1}: pricey share {chunk.count('pricey') / len(chunk):.2f}")

# the belief state after the run
for op, s in sched.snapshot().items():
    print(f"{op:>7}: mu_df={s.mu_df:+.3f}  E[E]={expected_energy(s):.3f} J  n={s.n_samples}")

# with a large budget the penalty is close to 1; with a tiny one it bites
s = sched.snapshot()["pricey"]
for b in (1000.0, 10.0, 1.0):
    print(f"penalty(pricey, B={b:>6}) = {budget_penalty(s, b):.3f}")

p = selection_probability(sched.snapshot()["cheap"], s, 1000.0, 20000, rng)
print(f"P(cheap beats pricey | B=1000) ~ {p:.3f}")
