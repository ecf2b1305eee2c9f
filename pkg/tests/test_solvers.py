
import numpy as np
import pytest

from eij_meta.core import ContractError, flip_distinct_bits, make_rng
from eij_meta.energy import MeterConfig, SimulatedMeter
from eij_meta.problems import EccInstance, kp_generate, nk_generate
from eij_meta.solvers import (
    OPERATORS,
    GaState,
    SolverParams,
    StopCondition,
    ils_init,
    ils_step,
    method_label,
    parse_mode,
    pso_init,
    pso_step,
    run_solver,
    ssga_init,
    ssga_step,
)


class OneMax:
    kind = "kp"  # charged like a knapsack of the same length

    def __init__(self, n):
        self.n = self.dim = n

    def fitness(self, x):
        return float(np.sum(x))

    def fitness_many(self, X):
        return np.asarray(X).sum(axis=-1).astype(float)

    def is_feasible(self, x):
        return True


QUIET = MeterConfig(noise_sigma=0.0)
PROBLEMS = {
    "kp": kp_generate(30, 1),
    "nk": nk_generate(24, 3, 1),
    "ecc": EccInstance(6, 5),
}
SMALL = SolverParams(pop_size=20, swarm_size=10, i_max=10)


def meter(seed=0):
    return SimulatedMeter(MeterConfig(), make_rng(seed))


# ----------------------------------------------------------------------- ssGA


@pytest.mark.parametrize("variant, k", [("replace1", 1), ("replace5", 5)])
def test_ssga_evaluation_count(variant, k):
    p = PROBLEMS["nk"]
    rng = make_rng(0)
    st = ssga_init(p, rng, SMALL)
    assert ssga_step(st, variant, p, meter(), rng, SMALL).n_evaluations == k
    assert st.population.shape == (20, 24)


def test_ssga_best_monotone_and_sorted():
    p = PROBLEMS["kp"]
    rng = make_rng(1)
    st = ssga_init(p, rng, SMALL)
    m = meter()
    prev = st.best_fitness
    for i in range(300):
        ssga_step(st, "replace5" if i % 3 else "replace1", p, m, rng, SMALL)
        assert st.best_fitness >= prev
        assert np.all(np.diff(st.fitness) <= 0)
        assert np.array_equal(st.fitness, p.fitness_many(st.population))
        prev = st.best_fitness


def test_ssga_degenerate_operators_clone_first_parent():
    p = PROBLEMS["nk"]
    params = SolverParams(pop_size=20, crossover_rate=0.0, mutation_rate=0.0)
    rng = make_rng(3)
    st = ssga_init(p, rng, params)
    saw_negative = False
    for _ in range(50):
        twin = make_rng(0)
        twin.bit_generator.state = rng.bit_generator.state
        picks = twin.integers(20, size=(1, 2, 2))
        fit = st.fitness.copy()
        parents = [pk[np.argmax(fit[pk])] for pk in picks[0]]
        out = ssga_step(st, "replace1", p, meter(), rng, params)
        expected = fit[parents[0]] - max(fit[parents[0]], fit[parents[1]])
        assert out.delta_f == pytest.approx(expected, abs=1e-15)
        assert out.delta_f <= 0
        assert (out.delta_f == 0) == (fit[parents[0]] >= fit[parents[1]])
        saw_negative |= out.delta_f < 0
    assert saw_negative


def test_ssga_ties_keep_incumbents():
    p = OneMax(8)
    pop = np.zeros((4, 8), dtype=np.uint8)
    pop[:, 0] = 1  # all fitness 1
    st = GaState(pop.copy(), np.ones(4))
    params = SolverParams(pop_size=4, crossover_rate=0.0, mutation_rate=0.0)
    ssga_step(st, "replace5", p, meter(), make_rng(0), params)
    assert np.array_equal(st.population, pop)


# ------------------------------------------------------------------------ PSO


def test_pso_light_never_reads_gbest():
    p = PROBLEMS["nk"]
    rng = make_rng(0)
    st = pso_init(p, rng, SMALL)
    st.gbest_position = np.full(p.dim, np.nan)
    out = pso_step(st, "light", p, meter(), rng)
    assert np.all(np.isfinite(st.position)) and np.isfinite(out.delta_f)


def test_pso_full_reads_gbest():
    p = PROBLEMS["nk"]
    rng = make_rng(0)
    st = pso_init(p, rng, SMALL)
    st.gbest_position = np.full(p.dim, np.nan)
    pso_step(st, "full", p, meter(), rng)
    assert np.isnan(st.velocity).any()


def test_pso_zero_coefficients_fixed_point():
    p = PROBLEMS["kp"]
    rng = make_rng(0)
    st = pso_init(p, rng, SolverParams(swarm_size=10, w=0.0, c1=0.0, c2=0.0, init_velocity=0.0))
    before = st.position.copy()
    for variant in ("full", "light"):
        out = pso_step(st, variant, p, meter(), rng)
        assert out.delta_f == 0.0 and out.n_evaluations == 10
        assert np.array_equal(st.position, before)


def test_pso_positions_in_unit_cube():
    p = PROBLEMS["ecc"]
    rng = make_rng(4)
    st = pso_init(p, rng, SMALL)
    for _ in range(20):
        pso_step(st, "full", p, meter(), rng)
        assert st.position.min() >= 0 and st.position.max() <= 1


def test_pso_personal_and_global_best_match_history():
    p = PROBLEMS["nk"]
    rng = make_rng(5)
    st = pso_init(p, rng, SMALL)
    history = [p.fitness_many((st.position >= 0.5).astype(np.uint8))]
    m = meter()
    for i in range(40):
        out = pso_step(st, "full" if i % 2 else "light", p, m, rng)
        history.append(st.current_fitness.copy())
        assert out.n_evaluations == 10
        best_seen = np.max(history, axis=0)
        assert np.array_equal(st.pbest_fitness, best_seen)
        assert st.gbest_fitness == best_seen.max()
        assert p.fitness(st.gbest_bits) == st.gbest_fitness
        for j in range(10):
            assert p.fitness(st.pbest_bits[j]) == st.pbest_fitness[j]


def test_pso_bad_variant():
    p = PROBLEMS["nk"]
    with pytest.raises(ContractError):
        pso_step(pso_init(p, make_rng(0), SMALL), "heavy", p, meter(), make_rng(0))


# ------------------------------------------------------------------------ ILS


def test_ils_without_local_steps():
    p = PROBLEMS["nk"]
    rng = make_rng(2)
    st = ils_init(p, rng, SolverParams(i_max=0))
    best, best_fit = st.best.copy(), st.best_fit
    twin = make_rng(0)
    twin.bit_generator.state = rng.bit_generator.state

    perturbed = flip_distinct_bits(best, 5, twin)
    out = ils_step(st, "ils5", p, meter(), rng)
    assert out.n_evaluations == 1
    assert out.delta_f == pytest.approx(p.fitness(perturbed) - best_fit, abs=1e-15)


@pytest.mark.parametrize("variant, k", [("ils1", 1), ("ils5", 5)])
def test_ils_monotone_and_counts(variant, k):
    p = PROBLEMS["kp"]
    rng = make_rng(3)
    st = ils_init(p, rng, SMALL)
    prev = st.best_fit
    m = meter()
    for _ in range(50):
        out = ils_step(st, variant, p, m, rng)
        assert out.n_evaluations == 1 + SMALL.i_max
        assert st.best_fit >= prev
        assert p.fitness(st.best) == st.best_fit
        prev = st.best_fit


def test_ils_full_flip_oscillation_never_loses_fitness():
    # flipping all D bits maps x to its complement: the local loop can only
    # ever hold x or ~x and moves only on strict improvement
    p = OneMax(6)
    rng = make_rng(0)
    st = ils_init(p, rng, SolverParams(i_max=7))
    st.best = np.array([1, 1, 1, 1, 0, 0], dtype=np.uint8)
    st.best_fit = 4.0
    out = ils_step(st, 6, p, meter(), rng)
    # perturbed = complement (fitness 2); first local move back to best (4) is accepted
    assert out.delta_f == 0.0
    assert st.best_fit == 4.0
    assert np.array_equal(st.best, [1, 1, 1, 1, 0, 0])


# ------------------------------------------------------------------- run loop


def test_mode_parsing():
    assert parse_mode("pso", "eos") is None
    assert parse_mode("pso", "static:light") == "light"
    with pytest.raises(ContractError):
        parse_mode("pso", "static:ils1")
    with pytest.raises(ContractError):
        parse_mode("sa", "eos")
    assert method_label("ssga", "static:replace5") == "SSGA-5"
    assert method_label("ils", "eos") == "EOS-ILS"


@pytest.mark.parametrize("algorithm", sorted(OPERATORS))
def test_eos_first_two_iterations_cover_both(algorithm):
    for seed in range(10):
        rec = run_solver(PROBLEMS["nk"], algorithm, "eos", StopCondition.evals(200), QUIET, seed=seed, params=SMALL)
        assert set(rec.selections()[:2]) == set(OPERATORS[algorithm])


@pytest.mark.parametrize("algorithm", sorted(OPERATORS))
def test_static_selects_only_its_variant(algorithm):
    op = OPERATORS[algorithm][1]
    rec = run_solver(PROBLEMS["kp"], algorithm, f"static:{op}", StopCondition.evals(300), QUIET, seed=1, params=SMALL)
    assert set(rec.selections()) == {op}


@pytest.mark.parametrize("algorithm, max_step", [("ssga", 5), ("pso", 10), ("ils", 11)])
def test_eval_budget_overshoot_bounds(algorithm, max_step):
    for seed in range(3):
        rec = run_solver(PROBLEMS["ecc"], algorithm, "eos", StopCondition.evals(503), QUIET, seed=seed, params=SMALL)
        assert 503 <= rec.total_evaluations < 503 + max_step
        assert rec.total_evaluations == rec.trajectory[-1].cum_evals


@pytest.mark.parametrize("algorithm", sorted(OPERATORS))
def test_energy_budget_stop(algorithm):
    rec = run_solver(PROBLEMS["nk"], algorithm, "eos", StopCondition.energy(5.0), MeterConfig(), seed=2, params=SMALL)
    e = np.array([0.0] + [p.cum_energy_j for p in rec.trajectory])
    steps = np.diff(e)
    remaining = 5.0 - rec.total_energy_j
    assert remaining <= 0
    assert remaining > -steps.max()
    assert rec.total_energy_j == pytest.approx(steps.sum(), rel=1e-12)


@pytest.mark.parametrize("algorithm, mode", [(a, m) for a in OPERATORS for m in ["eos"] + [f"static:{o}" for o in OPERATORS[a]]])
def test_accounting_and_monotone_best(algorithm, mode):
    rec = run_solver(PROBLEMS["kp"], algorithm, mode, StopCondition.evals(400), QUIET, seed=4, params=SMALL)
    traj = rec.trajectory
    best = [p.best_fitness for p in traj]
    assert all(b >= a for a, b in zip(best, best[1:]))
    assert best[0] >= rec.initial_fitness
    assert rec.final_fitness == best[-1]
    assert [p.iteration for p in traj] == list(range(1, len(traj) + 1))
    evals = np.diff([0] + [p.cum_evals for p in traj])
    per = {"replace1": 1, "replace5": 5, "full": 10, "light": 10, "ils1": 11, "ils5": 11}
    assert list(evals) == [per[p.op_id] for p in traj]
    assert rec.feasible == PROBLEMS["kp"].is_feasible(rec.best_solution)
    assert rec.final_fitness == PROBLEMS["kp"].fitness(rec.best_solution)


def test_run_is_deterministic():
    a = run_solver(PROBLEMS["nk"], "ils", "eos", StopCondition.evals(300), MeterConfig(), seed=9, params=SMALL)
    b = run_solver(PROBLEMS["nk"], "ils", "eos", StopCondition.evals(300), MeterConfig(), seed=9, params=SMALL)
    assert repr(a.trajectory) == repr(b.trajectory)


def test_ssga_replace5_uses_five_times_evaluations():
    r1 = run_solver(PROBLEMS["nk"], "ssga", "static:replace1", StopCondition.evals(100), QUIET, params=SMALL)
    r5 = run_solver(PROBLEMS["nk"], "ssga", "static:replace5", StopCondition.evals(100), QUIET, params=SMALL)
    assert len(r1.trajectory) == 5 * len(r5.trajectory)


def test_ecc_not_feasibility_tracked():
    rec = run_solver(PROBLEMS["ecc"], "pso", "eos", StopCondition.evals(50), QUIET, params=SMALL)
    assert rec.feasible is None


