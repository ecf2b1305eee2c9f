"""Multi-trial experiment orchestration and on-disk logging.

An experiment is one (problem, algorithm, mode, stop condition) combination
run for ``trials`` independent trials. Each trial writes one CSV trajectory
named after the config hash; ``manifest.json`` in the output directory lists
every written file and accumulates entries across experiments sharing the
directory.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import ContractError, make_rng, trial_seed, trial_seed_sequence
from .energy import MeterConfig, RaplMeter, make_meter
from .problems import generate, instance_load, instance_save
from .scheduler import SchedulerConfig
from .solvers import (
    OPERATORS,
    RunRecord,
    SolverParams,
    StopCondition,
    TrajectoryPoint,
    apply_operator,
    child_sequence,
    init_state,
    method_label,
    parse_mode,
    run_solver,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "eij-meta-manifest/1"

DEFAULT_ENERGY_BUDGET_J = {"kp": 1000.0, "nk": 1000.0, "ecc": 10000.0}
DEFAULT_EVAL_BUDGET = {"kp": 35000, "nk": 10000, "ecc": 15000}
DEFAULT_TRIALS = 100

STAT_FIELDS = ("mu_df", "var_df", "mu_lnE", "var_lnE")
BASE_COLUMNS = ("iter", "cum_energy_j", "cum_evals", "best_fitness", "op_id")


@dataclass
class ExperimentConfig:
    problem: str = "nk"
    algorithm: str = "ssga"
    mode: str = "eos"
    problem_params: dict = field(default_factory=dict)
    instance_seed: int = 0
    instance_path: str | None = None
    stop_kind: str = "energy"
    stop_value: float | None = None
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    meter: MeterConfig = field(default_factory=MeterConfig)
    alpha: float = 0.9
    params: SolverParams = field(default_factory=SolverParams)
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.problem not in DEFAULT_EVAL_BUDGET:
            raise ContractError(f"unknown problem {self.problem!r}")
        parse_mode(self.algorithm, self.mode)
        if self.trials < 1:
            raise ContractError("trials must be positive")
        if isinstance(self.meter, dict):
            self.meter = MeterConfig(**self.meter)
        if isinstance(self.params, dict):
            self.params = SolverParams(**self.params)
        SchedulerConfig(alpha=self.alpha)
        self.stop  # validates

    @property
    def stop(self) -> StopCondition:
        value = self.stop_value
        if value is None:
            table = DEFAULT_ENERGY_BUDGET_J if self.stop_kind == "energy" else DEFAULT_EVAL_BUDGET
            value = table[self.problem]
        return StopCondition(self.stop_kind, value)

    @property
    def method(self) -> str:
        return method_label(self.algorithm, self.mode)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def hash(self) -> str:
        """Stable digest of everything that influences results."""
        d = self.to_dict()
        for key in ("out_dir", "workers"):
            d.pop(key)
        d["meter"].pop("rapl_root")
        d["stop_value"] = self.stop.value
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def build_instance(config: ExperimentConfig):
    if config.instance_path:
        inst = instance_load(config.instance_path)
        if inst.kind != config.problem:
            raise ContractError(f"instance file holds {inst.kind}, config asks for {config.problem}")
        return inst
    return generate(config.problem, config.instance_seed, **config.problem_params)


# ------------------------------------------------------------------- running


def _run_trial(args):
    config, problem, index, meter = args
    seq = trial_seed_sequence(config.master_seed, index)
    rec = run_solver(
        problem,
        config.algorithm,
        config.mode,
        config.stop,
        meter if meter is not None else config.meter,
        SchedulerConfig(alpha=config.alpha),
        seed=seq,
        params=config.params,
    )
    rec.trial = index
    rec.trial_seed = trial_seed(config.master_seed, index)
    rec.config_hash = config.hash()
    return rec


def run_experiment(config: ExperimentConfig, write: bool = True) -> list[RunRecord]:
    """Run every trial of ``config`` and, if ``write``, log them under ``out_dir``."""
    problem = build_instance(config)
    if config.meter.kind == "rapl":
        # one process-wide meter; trials must not overlap
        meter = RaplMeter(config.meter)
        records = [_run_trial((config, problem, i, meter)) for i in range(config.trials)]
    elif config.workers > 1:
        jobs = [(config, problem, i, None) for i in range(config.trials)]
        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_run_trial, jobs))
    else:
        records = [_run_trial((config, problem, i, None)) for i in range(config.trials)]
    if write:
        write_experiment(config, problem, records)
    return records


def trial_filename(config_hash: str, trial: int) -> str:
    return f"{config_hash}_trial{trial:03d}.csv"


def write_experiment(config: ExperimentConfig, problem, records) -> Path:
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    h = config.hash()
    instance_file = f"{h}_instance.json"
    instance_save(problem, out / instance_file)
    files = []
    for rec in records:
        name = trial_filename(h, rec.trial)
        write_trial_csv(rec, out / name)
        files.append(
            {
                "file": name,
                "trial": rec.trial,
                "trial_seed": rec.trial_seed,
                "final_fitness": rec.final_fitness,
                "initial_fitness": rec.initial_fitness,
                "total_energy_j": rec.total_energy_j,
                "total_evaluations": rec.total_evaluations,
                "feasible": rec.feasible,
            }
        )
    entry = {
        "config": _config_for_manifest(config),
        "method": config.method,
        "problem": config.problem,
        "algorithm": config.algorithm,
        "mode": config.mode,
        "stop": {"kind": config.stop.kind, "value": config.stop.value},
        "operators": list(OPERATORS[config.algorithm]),
        "instance_file": instance_file,
        "files": files,
    }
    write_manifest({h: entry}, out / MANIFEST_NAME)
    return out


def _config_for_manifest(config: ExperimentConfig) -> dict:
    d = config.to_dict()
    d.pop("out_dir")
    d.pop("workers")
    return d


# --------------------------------------------------------------------- files


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def trial_csv_header(operators) -> list[str]:
    cols = list(BASE_COLUMNS)
    for op in operators:
        cols += [f"{name}_{op}" for name in STAT_FIELDS]
    return cols


def write_trial_csv(record: RunRecord, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(trial_csv_header(record.operators))
            for p in record.trajectory:
                row = [p.iteration, _fmt(float(p.cum_energy_j)), p.cum_evals, _fmt(float(p.best_fitness)), p.op_id]
                for st in p.stats:
                    row += [_fmt(float(v)) for v in st]
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write trial CSV {path}: {exc}") from exc


def read_trial_csv(path) -> tuple[tuple, list[TrajectoryPoint]]:
    """Return ``(operators, trajectory)`` from a trial CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if tuple(header[:5]) != BASE_COLUMNS or (len(header) - 5) % 4:
        raise ValueError(f"{path}: unexpected trial CSV header")
    ops = tuple(header[i][len("mu_df_"):] for i in range(5, len(header), 4))
    traj = []
    for row in rows[1:]:
        vals = [float(v) for v in row[5:]]
        stats = tuple(tuple(vals[i:i + 4]) for i in range(0, len(vals), 4))
        traj.append(TrajectoryPoint(int(row[0]), float(row[1]), int(row[2]), float(row[3]), row[4], stats))
    return ops, traj


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {"format": MANIFEST_FORMAT, "experiments": {}}
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{path}: not an experiment manifest")
    return doc


def write_manifest(entries: dict, path) -> None:
    """Merge ``entries`` (config hash -> entry) into the manifest at ``path``."""
    doc = read_manifest(path)
    doc["experiments"].update(entries)
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest {path}: {exc}") from exc


def load_records(directory) -> dict[str, list[RunRecord]]:
    """Rebuild run records from a results directory, keyed by config hash."""
    directory = Path(directory)
    doc = read_manifest(directory / MANIFEST_NAME)
    if not doc["experiments"]:
        raise FileNotFoundError(f"no experiments recorded in {directory}")
    out = {}
    for h, entry in sorted(doc["experiments"].items()):
        recs = []
        for f in entry["files"]:
            ops, traj = read_trial_csv(directory / f["file"])
            recs.append(
                RunRecord(
                    algorithm=entry["algorithm"],
                    mode=entry["mode"],
                    operators=ops,
                    trajectory=traj,
                    final_fitness=f["final_fitness"],
                    total_energy_j=f["total_energy_j"],
                    total_evaluations=f["total_evaluations"],
                    trial=f["trial"],
                    trial_seed=f["trial_seed"],
                    config_hash=h,
                    feasible=f["feasible"],
                    initial_fitness=f["initial_fitness"],
                )
            )
        out[h] = recs
    return out


# ----------------------------------------------------------------- profiling


def profile_operators(config: ExperimentConfig, n_samples: int, out_path=None) -> dict[str, list[float]]:
    """Energy of ``n_samples`` consecutive static applications of each variant."""
    if n_samples < 1:
        raise ContractError("n_samples must be positive")
    problem = build_instance(config)
    rapl = RaplMeter(config.meter) if config.meter.kind == "rapl" else None
    samples = {}
    for op in OPERATORS[config.algorithm]:
        seq = trial_seed_sequence(config.master_seed, 0)
        rng = make_rng(child_sequence(seq, 0))
        meter = rapl or make_meter(config.meter, make_rng(child_sequence(seq, 2)))
        state = init_state(config.algorithm, problem, rng, config.params)
        samples[op] = [
            apply_operator(config.algorithm, state, op, problem, meter, rng, config.params).energy.joules
            for _ in range(n_samples)
        ]
    if out_path is not None:
        write_profile_csv(samples, out_path)
    return samples


def write_profile_csv(samples: dict, path) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["operator", "sample_index", "joules"])
        for op, vals in samples.items():
            for i, j in enumerate(vals):
                w.writerow([op, i, _fmt(float(j))])
