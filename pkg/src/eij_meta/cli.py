"""Command-line front end: ``eij-meta {generate-instance,profile,run,analyze}``.

Exit codes: 0 success, 1 usage error, 2 runtime error (I/O, RAPL unavailable).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from pathlib import Path

from . import analysis
from .core import ContractError
from .energy import MeterConfig
from .harness import (
    ExperimentConfig,
    load_records,
    profile_operators,
    read_manifest,
    run_experiment,
    MANIFEST_NAME,
)
from .problems import generate, instance_save
from .solvers import OPERATORS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _problem_flags(p, with_instance=True):
    p.add_argument("--problem", choices=["kp", "nk", "ecc"], help="benchmark problem")
    p.add_argument("--n", type=int, help="problem size n (KP items, NK variables, ECC codeword length)")
    p.add_argument("--k", type=int, dest="K", help="NK epistasis K")
    p.add_argument("--m", type=int, dest="M", help="ECC number of codewords M")
    if with_instance:
        p.add_argument("--instance-seed", type=int, help="seed used to generate the instance")
        p.add_argument("--instance", help="load the instance from a JSON file instead")


def _meter_flags(p):
    p.add_argument("--meter", choices=["rapl", "simulated"], help="energy meter")
    p.add_argument("--rapl-root", help="powercap root directory (default /sys/class/powercap)")
    p.add_argument("--noise-sigma", type=float, help="simulated meter log-space noise")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eij-meta", description="Energy-aware metaheuristics with an EI/J operator scheduler.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate-instance", help="write a benchmark instance as JSON")
    _problem_flags(g, with_instance=False)
    g.add_argument("--seed", type=int, default=0, help="instance seed")
    g.add_argument("--out", required=True, help="output JSON file")

    pr = sub.add_parser("profile", help="per-operator energy samples under static execution")
    _problem_flags(pr)
    pr.add_argument("--algorithm", choices=sorted(OPERATORS), help="metaheuristic")
    pr.add_argument("--samples", type=int, default=100, help="samples per operator")
    pr.add_argument("--seed", type=int, help="master seed")
    _meter_flags(pr)
    pr.add_argument("--config", help="JSON experiment config (flags override)")
    pr.add_argument("--out", required=True, help="output directory for profile.csv")

    r = sub.add_parser("run", help="run a multi-trial experiment")
    _problem_flags(r)
    r.add_argument("--algorithm", choices=sorted(OPERATORS), help="metaheuristic")
    r.add_argument("--mode", help="eos or static:<variant>")
    stop = r.add_mutually_exclusive_group()
    stop.add_argument("--budget-joules", type=float, help="energy budget per trial (J)")
    stop.add_argument("--eval-budget", type=int, help="evaluation budget per trial")
    r.add_argument("--trials", type=int, help="number of independent trials")
    r.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    _meter_flags(r)
    r.add_argument("--alpha", type=float, help="EWMA smoothing factor")
    r.add_argument("--workers", type=int, help="parallel trial processes (simulated meter only)")
    r.add_argument("--config", help="JSON experiment config (flags override)")
    r.add_argument("--out", help="output directory")

    a = sub.add_parser("analyze", help="summaries, trajectory fits and selection ratios")
    a.add_argument("--in", dest="indir", required=True, help="results directory")
    a.add_argument("--what", choices=["summary", "fits", "ratios"], default="summary", help="analysis to write")
    a.add_argument("--bins", type=int, default=20, help="budget bins for ratios")
    a.add_argument("--out", help="output directory (default: the input directory)")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
    meter = dict(doc.get("meter", {}))
    params = dict(doc.get("problem_params", {}))
    overrides = {
        "problem": args.problem,
        "algorithm": args.algorithm,
        "mode": getattr(args, "mode", None),
        "trials": getattr(args, "trials", None),
        "master_seed": args.seed,
        "alpha": getattr(args, "alpha", None),
        "workers": getattr(args, "workers", None),
        "instance_seed": args.instance_seed,
        "instance_path": args.instance,
        "out_dir": args.out,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "budget_joules", None) is not None:
        doc["stop_kind"], doc["stop_value"] = "energy", args.budget_joules
    if getattr(args, "eval_budget", None) is not None:
        doc["stop_kind"], doc["stop_value"] = "evals", args.eval_budget
    for key, flag in (("n", args.n), ("K", args.K), ("M", args.M)):
        if flag is not None:
            params[key] = flag
    doc["problem_params"] = params
    for key, flag in (("kind", args.meter), ("rapl_root", args.rapl_root), ("noise_sigma", args.noise_sigma)):
        if flag is not None:
            meter[key] = flag
    doc["meter"] = MeterConfig(**meter)
    return ExperimentConfig.from_dict(doc)


def _cmd_generate(args) -> None:
    if args.problem is None:
        raise UsageError("generate-instance: --problem is required")
    params = {k: v for k, v in (("n", args.n), ("K", args.K), ("M", args.M)) if v is not None}
    instance_save(generate(args.problem, args.seed, **params), args.out)


def _cmd_profile(args) -> None:
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile_operators(cfg, args.samples, out / "profile.csv")


def _cmd_run(args) -> None:
    cfg = _config_from_args(args)
    if args.out is None and not args.config:
        raise UsageError("run: --out is required")
    run_experiment(cfg)


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else v


def _cmd_analyze(args) -> None:
    indir = Path(args.indir)
    outdir = Path(args.out) if args.out else indir
    outdir.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(indir / MANIFEST_NAME)["experiments"]
    records = load_records(indir)

    if args.what == "summary":
        groups = defaultdict(dict)
        for h, entry in sorted(entries.items()):
            key = (entry["problem"], entry["algorithm"], entry["stop"]["kind"], entry["stop"]["value"])
            groups[key][entry["method"]] = records[h]
        rows = []
        for (problem, algorithm, kind, value), methods in sorted(groups.items()):
            if len(methods) < 2:
                continue
            for row in analysis.summarize(methods):
                median = analysis.median_trial(methods[row["method"]]).trial
                rows.append(
                    {"problem": problem, "algorithm": algorithm, "stop_kind": kind, "stop_value": value, **row, "median_trial": median}
                )
        if not rows:
            raise ValueError("summary needs at least two methods of the same problem/algorithm/stop")
        analysis.write_rows_csv(rows, outdir / "summary.csv")
    elif args.what == "fits":
        rows = []
        for h, entry in sorted(entries.items()):
            recs = records[h]
            if entry["stop"]["kind"] == "energy":
                b_max = float(entry["stop"]["value"])
            else:
                b_max = max(r.total_energy_j for r in recs)
            fit = analysis.fit_records(recs, b_max)
            rows.append(
                {
                    "config_hash": h,
                    "problem": entry["problem"],
                    "method": entry["method"],
                    "B_max": b_max,
                    "f_inf": fit.f_inf,
                    "A": fit.A,
                    "k_rate": fit.k_rate,
                    "residual_sse": fit.residual_sse,
                    "converged": fit.converged,
                }
            )
        analysis.write_rows_csv(rows, outdir / "fits.csv")
    else:
        rows = []
        for h, entry in sorted(entries.items()):
            edges, ratios = analysis.selection_ratio_curve(records[h], args.bins, entry["operators"])
            for op, vals in ratios.items():
                for i, v in enumerate(vals):
                    rows.append(
                        {
                            "config_hash": h,
                            "problem": entry["problem"],
                            "method": entry["method"],
                            "operator": op,
                            "bin_start_pct": float(edges[i]),
                            "bin_end_pct": float(edges[i + 1]),
                            "ratio": float(v),
                        }
                    )
        analysis.write_rows_csv(rows, outdir / "ratios.csv")


_COMMANDS = {
    "generate-instance": _cmd_generate,
    "profile": _cmd_profile,
    "run": _cmd_run,
    "analyze": _cmd_analyze,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("eij-meta: a subcommand is required")
        _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"eij-meta: invalid argument: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"eij-meta: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())


