"""Energy-aware metaheuristics driven by an expected-improvement-per-joule scheduler."""

from .core import ContractError, flip_distinct_bits, hamming_distance
from .energy import EnergySample, MeterConfig, MeterError, RaplMeter, SimulatedMeter, rapl_counter_delta, work_units_for
from .problems import (
    EccInstance,
    KpInstance,
    NkInstance,
    ecc_fitness,
    generate,
    instance_load,
    instance_save,
    kp_fitness,
    kp_generate,
    nk_fitness,
    nk_generate,
)
from .scheduler import (
    Budget,
    EIJScheduler,
    OperatorStats,
    SchedulerConfig,
    budget_penalty,
    expected_energy,
    priority,
    robust_eij,
    select_operator,
    selection_probability,
    update_stats,
)
from .solvers import OPERATORS, RunRecord, SolverParams, StopCondition, run_solver
from .harness import ExperimentConfig, profile_operators, run_experiment
from .analysis import fit_saturating_exponential, mann_whitney_u, selection_ratio_curve, summarize

__version__ = "0.1.0"
