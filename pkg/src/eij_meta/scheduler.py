"""Expected-improvement-per-joule (EI/J) operator scheduler.

Each operator carries an EWMA belief over its fitness change (normal) and its
log-energy (log-normal). Selection draws one Thompson sample of both, forms
the sampled improvement-per-joule ratio, multiplies it by the budget penalty
``B / (B + E[E])`` and takes the argmax. Operators that have never been
applied are tried first, in random order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from .core import ContractError, make_rng
from .energy import EnergySample

DEFAULT_ALPHA = 0.9


@dataclass(frozen=True)
class OperatorStats:
    mu_df: float = 0.0
    var_df: float = 0.0
    mu_lnE: float = 0.0
    var_lnE: float = 0.0
    n_samples: int = 0

    def as_tuple(self):
        return (self.mu_df, self.var_df, self.mu_lnE, self.var_lnE)


@dataclass(frozen=True)
class SchedulerConfig:
    alpha: float = DEFAULT_ALPHA
    mc_samples: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ContractError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mc_samples < 1:
            raise ContractError("mc_samples must be positive")


@dataclass
class Budget:
    """Remaining energy. May end slightly negative after the final step."""

    initial_j: float
    remaining_j: float | None = None

    def __post_init__(self):
        if not self.initial_j > 0:
            raise ContractError("initial budget must be > 0")
        if self.remaining_j is None:
            self.remaining_j = float(self.initial_j)
        if self.remaining_j > self.initial_j:
            raise ContractError("remaining budget cannot exceed the initial budget")

    def debit(self, joules: float) -> None:
        self.remaining_j -= float(joules)

    @property
    def exhausted(self) -> bool:
        return self.remaining_j <= 0


def _joules(energy) -> float:
    return float(energy.joules if isinstance(energy, EnergySample) else energy)


def _remaining(budget) -> float:
    return float(budget.remaining_j if isinstance(budget, Budget) else budget)


def update_stats(s: OperatorStats, delta_f: float, energy, alpha: float = DEFAULT_ALPHA) -> OperatorStats:
    """Fold one observation into the EWMA belief.

    The very first observation seeds the means directly with zero variances.
    Variances are updated against the freshly updated mean.
    """
    e = _joules(energy)
    delta_f = float(delta_f)
    if not (math.isfinite(delta_f) and math.isfinite(e)):
        raise ContractError("update_stats requires finite inputs")
    if e <= 0:
        raise ContractError("energy must be > 0")
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"alpha must lie in (0, 1), got {alpha}")
    ln_e = math.log(e)
    if s.n_samples == 0:
        return OperatorStats(delta_f, 0.0, ln_e, 0.0, 1)
    beta = 1.0 - alpha
    mu_df = alpha * s.mu_df + beta * delta_f
    var_df = alpha * s.var_df + beta * (delta_f - mu_df) ** 2
    mu_lnE = alpha * s.mu_lnE + beta * ln_e
    var_lnE = alpha * s.var_lnE + beta * (ln_e - mu_lnE) ** 2
    return OperatorStats(mu_df, var_df, mu_lnE, var_lnE, s.n_samples + 1)


def _require_seen(s: OperatorStats) -> None:
    if s.n_samples < 1:
        raise ContractError("operator has no observations yet")


def sample_improvement(s: OperatorStats, rng) -> float:
    _require_seen(s)
    if s.var_df == 0.0:
        return s.mu_df
    return s.mu_df + math.sqrt(s.var_df) * rng.standard_normal()


def sample_energy(s: OperatorStats, rng) -> float:
    _require_seen(s)
    if s.var_lnE == 0.0:
        return math.exp(s.mu_lnE)
    return math.exp(s.mu_lnE + math.sqrt(s.var_lnE) * rng.standard_normal())


def robust_eij(df_sample: float, e_sample: float) -> float:
    if not e_sample > 0:
        raise ContractError("sampled energy must be > 0")
    return df_sample / e_sample


def expected_energy(s: OperatorStats) -> float:
    """Mean of the log-normal energy belief."""
    _require_seen(s)
    return math.exp(s.mu_lnE + s.var_lnE / 2.0)


def budget_penalty(s: OperatorStats, budget) -> float:
    b = _remaining(budget)
    if not b > 0:
        raise ContractError("budget penalty needs a positive remaining budget")
    if math.isinf(b):
        return 1.0
    return b / (b + expected_energy(s))


def priority(s: OperatorStats, budget, rng) -> float:
    """One Thompson draw of the budget-penalised EI/J."""
    df = sample_improvement(s, rng)
    e = sample_energy(s, rng)
    return robust_eij(df, e) * budget_penalty(s, budget)


def select_operator(all_stats: Mapping[Hashable, OperatorStats], budget, rng):
    if not all_stats:
        raise ContractError("no operators registered")
    ops = list(all_stats)
    unseen = [o for o in ops if all_stats[o].n_samples == 0]
    if unseen:
        return unseen[int(rng.integers(len(unseen)))]
    scores = np.array([priority(all_stats[o], budget, rng) for o in ops])
    best = np.flatnonzero(scores == scores.max())
    if best.size == 1:
        return ops[best[0]]
    return ops[best[int(rng.integers(best.size))]]


def selection_probability(s1: OperatorStats, s2: OperatorStats, budget, mc_samples: int, rng) -> float:
    """Monte Carlo estimate of P(priority(s1) > priority(s2))."""
    if mc_samples < 1:
        raise ContractError("mc_samples must be positive")
    _require_seen(s1)
    _require_seen(s2)
    pen1 = budget_penalty(s1, budget)
    pen2 = budget_penalty(s2, budget)

    def draws(s):
        z = rng.standard_normal((2, mc_samples))
        df = s.mu_df + math.sqrt(s.var_df) * z[0]
        e = np.exp(s.mu_lnE + math.sqrt(s.var_lnE) * z[1])
        return df / e

    p1 = draws(s1) * pen1
    p2 = draws(s2) * pen2
    return float(np.mean(p1 > p2))


class EIJScheduler:
    """Owns the belief state of one trial's operator portfolio."""

    def __init__(self, operators, config: SchedulerConfig | None = None, rng=None):
        ops = list(operators)
        if not ops:
            raise ContractError("no operators registered")
        self.config = config or SchedulerConfig()
        self.rng = make_rng(0 if rng is None else rng)
        self.stats = {o: OperatorStats() for o in ops}

    @property
    def operators(self):
        return list(self.stats)

    def select(self, budget):
        return select_operator(self.stats, budget, self.rng)

    def observe(self, op, delta_f: float, energy) -> OperatorStats:
        self.stats[op] = update_stats(self.stats[op], delta_f, energy, self.config.alpha)
        return self.stats[op]

    def snapshot(self) -> dict:
        return dict(self.stats)
