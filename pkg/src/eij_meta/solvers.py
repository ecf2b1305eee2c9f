"""Energy-aware steady-state GA, PSO and ILS.

Every algorithm exposes exactly two operator variants. One call to a
``*_step`` function applies one variant once, meters the energy of the whole
application and reports the accumulated fitness change. :func:`run_solver`
drives a step function either through the EI/J scheduler (``mode="eos"``) or
with a fixed variant (``mode="static:<variant>"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, flip_distinct_bits, make_rng
from .energy import EnergySample, MeterConfig, make_meter, work_units_for
from .scheduler import Budget, EIJScheduler, OperatorStats, SchedulerConfig, update_stats

OPERATORS = {
    "ssga": ("replace1", "replace5"),
    "pso": ("full", "light"),
    "ils": ("ils1", "ils5"),
}

_LABELS = {
    "replace1": "SSGA-1",
    "replace5": "SSGA-5",
    "full": "PSO-Full",
    "light": "PSO-Light",
    "ils1": "ILS-1",
    "ils5": "ILS-5",
}

_OFFSPRING = {"replace1": 1, "replace5": 5}
_FLIPS = {"ils1": 1, "ils5": 5}


@dataclass(frozen=True)
class SolverParams:
    """Algorithm parameters; defaults follow the published settings."""

    pop_size: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float | None = None  # None -> 1/D
    tournament_size: int = 2
    swarm_size: int = 100
    w: float = 0.729
    c1: float = 2.05
    c2: float = 2.05
    init_velocity: float = 0.5  # initial velocities uniform in [-v, v]
    i_max: int = 100


@dataclass
class StepOutcome:
    delta_f: float
    n_evaluations: int
    energy: EnergySample


@dataclass(frozen=True)
class StopCondition:
    kind: str  # "energy" or "evals"
    value: float

    def __post_init__(self):
        if self.kind not in ("energy", "evals"):
            raise ContractError(f"unknown stop kind {self.kind!r}")
        if not self.value > 0:
            raise ContractError("stop budget must be positive")

    @classmethod
    def energy(cls, joules: float) -> "StopCondition":
        return cls("energy", float(joules))

    @classmethod
    def evals(cls, n: int) -> "StopCondition":
        return cls("evals", int(n))


@dataclass
class TrajectoryPoint:
    iteration: int
    cum_energy_j: float
    cum_evals: int
    best_fitness: float
    op_id: str
    stats: tuple  # one (mu_df, var_df, mu_lnE, var_lnE) per operator


@dataclass
class RunRecord:
    algorithm: str
    mode: str
    operators: tuple
    trajectory: list
    final_fitness: float
    total_energy_j: float
    total_evaluations: int
    trial: int = 0
    trial_seed: int = 0
    config_hash: str = ""
    feasible: bool | None = None
    initial_fitness: float = math.nan
    best_solution: np.ndarray | None = field(default=None, repr=False)

    @property
    def method(self) -> str:
        return method_label(self.algorithm, self.mode)

    def selections(self) -> list:
        return [p.op_id for p in self.trajectory]


def method_label(algorithm: str, mode: str) -> str:
    if mode == "eos":
        return f"EOS-{algorithm.upper()}"
    return _LABELS[parse_mode(algorithm, mode)]


def parse_mode(algorithm: str, mode: str) -> str | None:
    """Return the fixed variant of a static mode, or None for ``eos``."""
    if algorithm not in OPERATORS:
        raise ContractError(f"unknown algorithm {algorithm!r}")
    if mode == "eos":
        return None
    if mode.startswith("static:"):
        variant = mode.split(":", 1)[1]
        if variant in OPERATORS[algorithm]:
            return variant
    raise ContractError(f"mode {mode!r} is not valid for {algorithm}; use eos or static:<variant>")


# ----------------------------------------------------------------------- ssGA


@dataclass
class GaState:
    population: np.ndarray  # (n, D) uint8, sorted by descending fitness
    fitness: np.ndarray

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[0])

    @property
    def best_solution(self) -> np.ndarray:
        return self.population[0]


def ssga_init(problem, rng, params: SolverParams = SolverParams()) -> GaState:
    pop = rng.integers(0, 2, size=(params.pop_size, problem.dim), dtype=np.uint8)
    fit = np.asarray(problem.fitness_many(pop), dtype=float)
    order = np.argsort(-fit, kind="stable")
    return GaState(pop[order], fit[order])


def _tournament(fit: np.ndarray, picks: np.ndarray) -> np.ndarray:
    # picks: (..., size); winner is the first index holding the maximum
    return np.take_along_axis(picks, np.argmax(fit[picks], axis=-1)[..., None], axis=-1)[..., 0]


def ssga_step(state: GaState, variant, problem, meter, rng, params: SolverParams = SolverParams()) -> StepOutcome:
    """Create ``k`` offspring and keep the best ``n`` of parents plus offspring."""
    k = _OFFSPRING.get(variant, variant)
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ContractError(f"bad ssGA variant {variant!r}")
    token = meter.begin()
    n, D = state.population.shape
    pm = params.mutation_rate if params.mutation_rate is not None else 1.0 / D

    picks = rng.integers(n, size=(k, 2, params.tournament_size))
    parents = _tournament(state.fitness, picks)  # (k, 2)
    do_cx = rng.random(k) < params.crossover_rate
    cuts = rng.integers(1, D, size=k) if D > 1 else np.zeros(k, dtype=int)
    flips = rng.random((k, D)) < pm

    p1 = state.population[parents[:, 0]]
    p2 = state.population[parents[:, 1]]
    cols = np.arange(D)
    from_second = do_cx[:, None] & (D > 1) & (cols[None, :] >= cuts[:, None])
    children = np.where(from_second, p2, p1) ^ flips.astype(np.uint8)
    child_fit = np.asarray(problem.fitness_many(children), dtype=float)

    ref = np.maximum(state.fitness[parents[:, 0]], state.fitness[parents[:, 1]])
    delta_f = float(np.sum(child_fit - ref))

    all_fit = np.concatenate([state.fitness, child_fit])
    keep = np.argsort(-all_fit, kind="stable")[:n]
    state.population = np.concatenate([state.population, children])[keep]
    state.fitness = all_fit[keep]

    energy = meter.end(token, work_units_for(problem, k))
    return StepOutcome(delta_f, k, energy)


# ------------------------------------------------------------------------ PSO


@dataclass
class PsoState:
    position: np.ndarray  # (n, D) in [0, 1]
    velocity: np.ndarray
    current_fitness: np.ndarray
    pbest_position: np.ndarray
    pbest_bits: np.ndarray
    pbest_fitness: np.ndarray
    gbest_position: np.ndarray
    gbest_bits: np.ndarray
    gbest_fitness: float
    w: float = 0.729
    c1: float = 2.05
    c2: float = 2.05

    @property
    def best_fitness(self) -> float:
        return float(self.gbest_fitness)

    @property
    def best_solution(self) -> np.ndarray:
        return self.gbest_bits


def binarize(position: np.ndarray) -> np.ndarray:
    return (position >= 0.5).astype(np.uint8)


def pso_init(problem, rng, params: SolverParams = SolverParams()) -> PsoState:
    pos = rng.random((params.swarm_size, problem.dim))
    bits = binarize(pos)
    fit = np.asarray(problem.fitness_many(bits), dtype=float)
    g = int(np.argmax(fit))
    vel = rng.uniform(-params.init_velocity, params.init_velocity, size=pos.shape)
    return PsoState(
        position=pos,
        velocity=vel,
        current_fitness=fit.copy(),
        pbest_position=pos.copy(),
        pbest_bits=bits.copy(),
        pbest_fitness=fit.copy(),
        gbest_position=pos[g].copy(),
        gbest_bits=bits[g].copy(),
        gbest_fitness=float(fit[g]),
        w=params.w,
        c1=params.c1,
        c2=params.c2,
    )


def pso_step(state: PsoState, variant: str, problem, meter, rng, params: SolverParams | None = None) -> StepOutcome:
    """Move every particle once; ``light`` drops the global-best attraction."""
    if variant not in ("full", "light"):
        raise ContractError(f"bad PSO variant {variant!r}")
    token = meter.begin()
    n, D = state.position.shape
    r1 = rng.random((n, D))
    vel = state.w * state.velocity + state.c1 * r1 * (state.pbest_position - state.position)
    if variant == "full":
        r2 = rng.random((n, D))
        vel += state.c2 * r2 * (state.gbest_position - state.position)
    pos = np.clip(state.position + vel, 0.0, 1.0)
    bits = binarize(pos)
    fit = np.asarray(problem.fitness_many(bits), dtype=float)
    delta_f = float(np.sum(fit - state.current_fitness))

    better = fit > state.pbest_fitness
    state.pbest_position[better] = pos[better]
    state.pbest_bits[better] = bits[better]
    state.pbest_fitness[better] = fit[better]
    state.position = pos
    state.velocity = vel
    state.current_fitness = fit

    g = int(np.argmax(state.pbest_fitness))
    if state.pbest_fitness[g] > state.gbest_fitness:
        state.gbest_fitness = float(state.pbest_fitness[g])
        state.gbest_position = state.pbest_position[g].copy()
        state.gbest_bits = state.pbest_bits[g].copy()

    energy = meter.end(token, work_units_for(problem, n))
    return StepOutcome(delta_f, n, energy)


# ------------------------------------------------------------------------ ILS


@dataclass
class IlsState:
    best: np.ndarray
    best_fit: float
    i_max: int = 100

    @property
    def best_fitness(self) -> float:
        return float(self.best_fit)

    @property
    def best_solution(self) -> np.ndarray:
        return self.best


def ils_init(problem, rng, params: SolverParams = SolverParams()) -> IlsState:
    x = rng.integers(0, 2, size=problem.dim, dtype=np.uint8)
    return IlsState(x, float(problem.fitness(x)), params.i_max)


def ils_step(state: IlsState, variant, problem, meter, rng, params: SolverParams | None = None) -> StepOutcome:
    """Perturb the incumbent, then ``i_max`` strict-improvement random moves."""
    k = _FLIPS.get(variant, variant)
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= state.best.shape[0]):
        raise ContractError(f"bad ILS variant {variant!r}")
    token = meter.begin()
    fitness = problem.fitness
    x = flip_distinct_bits(state.best, k, rng)
    fx = fitness(x)
    for _ in range(state.i_max):
        y = flip_distinct_bits(x, k, rng)
        fy = fitness(y)
        if fy > fx:
            x, fx = y, fy
    energy = meter.end(token, work_units_for(problem, 1 + state.i_max))
    delta_f = fx - state.best_fit
    if fx > state.best_fit:
        state.best, state.best_fit = x, float(fx)
    return StepOutcome(float(delta_f), 1 + state.i_max, energy)


_INIT = {"ssga": ssga_init, "pso": pso_init, "ils": ils_init}
_STEP = {"ssga": ssga_step, "pso": pso_step, "ils": ils_step}


def init_state(algorithm: str, problem, rng, params: SolverParams = SolverParams()):
    return _INIT[algorithm](problem, rng, params)


def apply_operator(algorithm: str, state, op: str, problem, meter, rng, params: SolverParams = SolverParams()) -> StepOutcome:
    return _STEP[algorithm](state, op, problem, meter, rng, params)


# ------------------------------------------------------------------ main loop


def child_sequence(seed, i: int) -> np.random.SeedSequence:
    """Deterministic child ``i`` of ``seed`` without mutating it."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,))


def _stats_row(stats: dict, ops) -> tuple:
    return tuple(stats[o].as_tuple() if stats[o].n_samples else (math.nan,) * 4 for o in ops)


def run_solver(
    problem,
    algorithm: str,
    mode: str = "eos",
    stop: StopCondition | None = None,
    meter=None,
    scheduler_config: SchedulerConfig | None = None,
    seed=0,
    params: SolverParams = SolverParams(),
) -> RunRecord:
    """Run one trial until the energy or evaluation budget is spent.

    ``meter`` is either a ready meter object or a :class:`MeterConfig`; in the
    latter case a simulated meter gets its own noise stream derived from ``seed``.
    The initial population/solution is evaluated outside the metered budget.
    """
    fixed = parse_mode(algorithm, mode)
    if stop is None:
        stop = StopCondition.evals(10_000)
    ops = OPERATORS[algorithm]
    cfg = scheduler_config or SchedulerConfig()

    search_rng = make_rng(child_sequence(seed, 0))
    sched_rng = make_rng(child_sequence(seed, 1))
    if meter is None or isinstance(meter, MeterConfig):
        meter = make_meter(meter or MeterConfig(), make_rng(child_sequence(seed, 2)))

    state = init_state(algorithm, problem, search_rng, params)
    initial_fitness = state.best_fitness
    scheduler = EIJScheduler(ops, cfg, sched_rng)
    stats = {o: OperatorStats() for o in ops}

    budget = Budget(stop.value) if stop.kind == "energy" else None
    cum_energy = 0.0
    cum_evals = 0
    trajectory = []
    it = 0
    while True:
        it += 1
        if fixed is None:
            if budget is not None:
                remaining = budget.remaining_j
            elif cum_evals > 0:
                # evaluation budget projected into joules at the observed rate
                remaining = (stop.value - cum_evals) * cum_energy / cum_evals
            else:
                remaining = math.inf
            op = scheduler.select(remaining)
        else:
            op = fixed
        out = apply_operator(algorithm, state, op, problem, meter, search_rng, params)
        if fixed is None:
            scheduler.observe(op, out.delta_f, out.energy)
            stats = scheduler.stats
        else:
            stats[op] = update_stats(stats[op], out.delta_f, out.energy, cfg.alpha)
        cum_energy += out.energy.joules
        cum_evals += out.n_evaluations
        trajectory.append(
            TrajectoryPoint(it, cum_energy, cum_evals, state.best_fitness, op, _stats_row(stats, ops))
        )
        if budget is not None:
            budget.debit(out.energy.joules)
            if budget.exhausted:
                break
        elif cum_evals >= stop.value:
            break

    best = np.array(state.best_solution, copy=True)
    feasible = problem.is_feasible(best) if problem.kind == "kp" else None
    return RunRecord(
        algorithm=algorithm,
        mode=mode,
        operators=ops,
        trajectory=trajectory,
        final_fitness=state.best_fitness,
        total_energy_j=cum_energy,
        total_evaluations=cum_evals,
        feasible=feasible,
        initial_fitness=initial_fitness,
        best_solution=best,
    )
