"""Post-hoc statistics over run records.

Saturating-exponential fits of average best-so-far trajectories, the
Mann-Whitney U test, operator selection ratios against consumed budget and
summary tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ContractError

GRADIENT_TOL = 1e-8
MAX_ITER = 200
K_STARTS = (1.0, 5.0, 20.0)
EXACT_MAX_PRODUCT = 400


# ----------------------------------------------------------------------- fits


@dataclass(frozen=True)
class FitResult:
    f_inf: float
    A: float
    k_rate: float
    residual_sse: float
    converged: bool

    def predict(self, energy, B_max: float):
        return saturating_exponential(np.asarray(energy, dtype=float) / B_max, self.f_inf, self.A, self.k_rate)


def saturating_exponential(u, f_inf, A, k):
    """``f_inf * (1 - A * exp(-k * u))`` with ``u`` the budget fraction."""
    return f_inf * (1.0 - A * np.exp(-k * u))


def _residual_and_jacobian(theta, u, y):
    f_inf, A, k = theta
    e = np.exp(-k * u)
    model = f_inf * (1.0 - A * e)
    J = np.column_stack([1.0 - A * e, -f_inf * e, f_inf * A * u * e])
    return model - y, J


def _lm(theta, u, y):
    """Damped Gauss-Newton (Levenberg-Marquardt) from one start."""
    lam = 1e-3
    r, J = _residual_and_jacobian(theta, u, y)
    sse = float(r @ r)
    scale = max(1.0, float(np.sqrt(np.mean(y**2))))
    for _ in range(MAX_ITER):
        g = J.T @ r
        if np.linalg.norm(g) <= GRADIENT_TOL * scale * max(1.0, math.sqrt(len(y))):
            return theta, sse, True
        JTJ = J.T @ J
        improved = False
        while lam < 1e16:
            H = JTJ + lam * np.diag(np.maximum(np.diag(JTJ), 1e-12))
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + step
            r_new, J_new = _residual_and_jacobian(cand, u, y)
            sse_new = float(r_new @ r_new)
            if np.isfinite(sse_new) and sse_new <= sse:
                stalled = np.all(np.abs(step) <= 1e-15 * (np.abs(theta) + 1e-15))
                theta, r, J, sse = cand, r_new, J_new, sse_new
                lam = max(lam / 10.0, 1e-12)
                improved = True
                if stalled:
                    return theta, sse, True
                break
            lam *= 10.0
        if not improved:
            # no descent direction left at machine precision
            return theta, sse, bool(np.linalg.norm(g) <= 1e-6 * scale * max(1.0, math.sqrt(len(y))))
    g = J.T @ r
    return theta, sse, bool(np.linalg.norm(g) <= GRADIENT_TOL * scale * max(1.0, math.sqrt(len(y))))


def fit_saturating_exponential(energy, fitness, B_max: float) -> FitResult:
    """Least-squares fit of ``f(E) = f_inf (1 - A exp(-k E / B_max))``.

    Multi-start over ``k`` in {1, 5, 20}; the best converged start wins.
    Constant data returns ``A = 0`` with ``f_inf`` equal to the constant.
    """
    E = np.asarray(energy, dtype=float)
    y = np.asarray(fitness, dtype=float)
    if E.shape != y.shape or E.ndim != 1:
        raise ContractError("energy and fitness must be equal-length 1-D sequences")
    if E.size < 4:
        raise ContractError("need at least 4 points to fit")
    if not B_max > 0:
        raise ContractError("B_max must be positive")
    u = E / B_max

    if np.all(y == y[0]):
        return FitResult(float(y[0]), 0.0, K_STARTS[0], 0.0, True)

    first = int(np.argmin(u))
    f0 = float(y[np.argmax(u)])
    best = None
    for k0 in K_STARTS:
        A0 = (1.0 - y[first] / f0) * math.exp(k0 * u[first]) if f0 != 0 else 0.5
        theta, sse, ok = _lm(np.array([f0, A0, k0]), u, y)
        cand = (not ok, sse, theta, ok)
        if best is None or cand[:2] < best[:2]:
            best = cand
    _, sse, theta, ok = best
    return FitResult(float(theta[0]), float(theta[1]), float(theta[2]), float(sse), bool(ok))


def resample_best_so_far(records, grid) -> np.ndarray:
    """Best-so-far of each record at each grid energy (previous-value hold).

    Grid points before a record's first logged step take the initial fitness
    when known, else the first logged value. Returns shape ``(len(records), len(grid))``.
    """
    grid = np.asarray(grid, dtype=float)
    out = np.empty((len(records), grid.size))
    for r, rec in enumerate(records):
        e = np.array([p.cum_energy_j for p in rec.trajectory])
        f = np.array([p.best_fitness for p in rec.trajectory])
        idx = np.searchsorted(e, grid, side="right") - 1
        before = f[0] if math.isnan(rec.initial_fitness) else rec.initial_fitness
        out[r] = np.where(idx >= 0, f[np.clip(idx, 0, None)], before)
    return out


def fit_records(records, B_max: float, n_grid: int = 200) -> FitResult:
    grid = np.linspace(0.0, B_max, n_grid)
    mean = resample_best_so_far(records, grid).mean(axis=0)
    return fit_saturating_exponential(grid, mean, B_max)


# ------------------------------------------------------------- Mann-Whitney


@dataclass(frozen=True)
class TestResult:
    u_statistic: float
    p_value: float
    n1: int
    n2: int
    method: str = "exact"

    __test__ = False  # not a pytest class


@lru_cache(maxsize=256)
def _u_distribution(n1: int, n2: int) -> np.ndarray:
    """Counts of rank arrangements giving each U in 0..n1*n2, assuming no ties.

    The largest observation either comes from the first sample (adding ``n``
    to U) or from the second (adding nothing).
    """
    one = np.ones(1, dtype=object)
    prev = [one] * (n1 + 1)  # sizes (m, 0)
    for n in range(1, n2 + 1):
        cur = [one]
        for m in range(1, n1 + 1):
            c = np.zeros(m * n + 1, dtype=object)
            c[n:] += cur[m - 1]
            c[: prev[m].size] += prev[m]
            cur.append(c)
        prev = cur
    return prev[n1]


def _rank(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size)
    sv = values[order]
    i = 0
    while i < sv.size:
        j = i
        while j + 1 < sv.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a, b, method: str = "auto") -> TestResult:
    """Two-sided Mann-Whitney U test; ``u_statistic`` is U for sample ``a``.

    ``method="auto"`` uses the exact null distribution when ``n1*n2 <= 400``
    and the tie- and continuity-corrected normal approximation otherwise.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ContractError("both samples must be non-empty")
    if method not in ("auto", "exact", "asymptotic"):
        raise ContractError(f"unknown method {method!r}")
    ranks = _rank(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    mean = n1 * n2 / 2.0
    if method == "exact" or (method == "auto" and n1 * n2 <= EXACT_MAX_PRODUCT):
        counts = _u_distribution(n1, n2)
        total = sum(counts)
        lo = sum(counts[: int(math.floor(u)) + 1])
        hi = sum(counts[int(math.ceil(u)) :])
        p = min(1.0, 2.0 * float(min(lo, hi)) / float(total))
        return TestResult(u, p, n1, n2, "exact")
    N = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (N * (N - 1))
    var = n1 * n2 / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return TestResult(u, 1.0, n1, n2, "asymptotic")
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return TestResult(u, p, n1, n2, "asymptotic")


# --------------------------------------------------------- selection ratios


def selection_ratio_curve(records, n_bins: int = 20, operators=None):
    """Pooled selection fractions per operator in bins of consumed budget.

    A selection falls into the bin of the energy fraction already consumed
    when it was made. Returns ``(bin_edges_percent, {op: ratios})``; empty
    bins hold NaN.
    """
    records = list(records)
    if not records:
        raise ContractError("no records given")
    if n_bins < 1:
        raise ContractError("n_bins must be positive")
    ops = list(operators) if operators is not None else []
    for rec in records:
        for o in rec.operators:
            if o not in ops:
                ops.append(o)
    counts = np.zeros((len(ops), n_bins))
    for rec in records:
        total = rec.total_energy_j
        prev = 0.0
        for p in rec.trajectory:
            frac = prev / total if total > 0 else 0.0
            b = min(int(frac * n_bins), n_bins - 1)
            counts[ops.index(p.op_id), b] += 1
            prev = p.cum_energy_j
    per_bin = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(per_bin > 0, counts / per_bin, np.nan)
    edges = np.linspace(0.0, 100.0, n_bins + 1)
    return edges, {o: ratios[i] for i, o in enumerate(ops)}


# ------------------------------------------------------------------ summary


def _mean_std(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return float(np.mean(x)), sd


def summarize(records_by_method: dict, reference: str | None = None) -> list[dict]:
    """Mean/stdev of final fitness and energy with p-values against ``reference``.

    ``reference`` defaults to the first ``EOS-*`` method present. Standard
    deviations use the n-1 denominator; a single trial has stdev 0. KP rows
    also count feasible trials.
    """
    methods = list(records_by_method)
    if len(methods) < 2:
        raise ContractError("need at least two methods to summarise")
    if reference is None:
        reference = next((m for m in methods if m.startswith("EOS-")), methods[0])
    ref = records_by_method[reference]
    ref_fit = [r.final_fitness for r in ref]
    ref_energy = [r.total_energy_j for r in ref]
    rows = []
    for m in methods:
        recs = records_by_method[m]
        fit = [r.final_fitness for r in recs]
        en = [r.total_energy_j for r in recs]
        fm, fs = _mean_std(fit)
        em, es = _mean_std(en)
        row = {
            "method": m,
            "trials": len(recs),
            "fitness_mean": fm,
            "fitness_std": fs,
            "energy_mean": em,
            "energy_std": es,
            "evals_mean": _mean_std([r.total_evaluations for r in recs])[0],
            "p_fitness": mann_whitney_u(fit, ref_fit).p_value if m != reference else math.nan,
            "p_energy": mann_whitney_u(en, ref_energy).p_value if m != reference else math.nan,
            "feasible": sum(bool(r.feasible) for r in recs) if recs and recs[0].feasible is not None else "",
        }
        rows.append(row)
    return rows


def median_trial(records):
    """The record whose final fitness is the (lower) median."""
    records = sorted(records, key=lambda r: (r.final_fitness, r.trial))
    if not records:
        raise ContractError("no records given")
    return records[(len(records) - 1) // 2]


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ContractError("nothing to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
