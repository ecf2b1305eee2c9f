"""Energy meters.

Two meters share one interface: ``begin()`` returns a token and
``end(token, work_units)`` returns the :class:`EnergySample` attributed to the
code executed in between.

* :class:`RaplMeter` reads the Linux powercap sysfs tree and sums package and
  DRAM counters.
* :class:`SimulatedMeter` charges a linear cost in declared work units with
  optional multiplicative log-normal noise. It is deterministic given its RNG.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .core import ContractError, make_rng

DEFAULT_RAPL_ROOT = "/sys/class/powercap"
DEFAULT_ENERGY_FLOOR_J = 1e-9

# Calibrated so that one ssGA Replace-1 call on the default knapsack costs
# ~0.02 J and an ssGA generation-equivalent (100 evaluations) ~1.4 J.
DEFAULT_JOULES_PER_WORK_UNIT = 1.4e-4
DEFAULT_FIXED_OVERHEAD_J = 5e-3
DEFAULT_NOISE_SIGMA = 0.05

_PACKAGE_RE = re.compile(r"^intel-rapl:(\d+)$")
_SUBDOMAIN_RE = re.compile(r"^intel-rapl:(\d+):(\d+)$")


class MeterError(OSError):
    """The energy source could not be read."""


@dataclass(frozen=True)
class EnergySample:
    joules: float

    def __post_init__(self):
        if not (math.isfinite(self.joules) and self.joules > 0):
            raise ContractError(f"energy sample must be finite and > 0, got {self.joules}")

    def __float__(self):
        return float(self.joules)


@dataclass(frozen=True)
class MeterConfig:
    kind: str = "simulated"
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    joules_per_work_unit: float = DEFAULT_JOULES_PER_WORK_UNIT
    fixed_overhead_j: float = DEFAULT_FIXED_OVERHEAD_J
    energy_floor_j: float = DEFAULT_ENERGY_FLOOR_J
    rapl_root: str = DEFAULT_RAPL_ROOT

    def __post_init__(self):
        if self.kind not in ("rapl", "simulated"):
            raise ContractError(f"unknown meter kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        if self.joules_per_work_unit <= 0:
            raise ContractError("joules_per_work_unit must be > 0")
        if self.fixed_overhead_j < 0:
            raise ContractError("fixed_overhead_j must be >= 0")
        if self.energy_floor_j <= 0:
            raise ContractError("energy_floor_j must be > 0")


@dataclass
class MeterToken:
    meter_id: int
    snapshot: tuple = ()
    used: bool = field(default=False)


def rapl_counter_delta(prev_uj: int, now_uj: int, max_range_uj: int) -> int:
    """Difference between two RAPL readings, correcting a single wraparound."""
    if now_uj >= prev_uj:
        return now_uj - prev_uj
    return (max_range_uj - prev_uj) + now_uj + 1


def work_units_for(problem, n_evaluations: int) -> float:
    """Abstract work performed by ``n_evaluations`` fitness evaluations.

    KP costs ``n`` per evaluation, NK ``n*K`` and ECC ``M*n**2``.
    ``problem`` is any instance exposing ``kind`` and its size parameters.
    """
    if n_evaluations < 0:
        raise ContractError("n_evaluations must be >= 0")
    kind = problem.kind
    if kind == "kp":
        per_eval = problem.n
    elif kind == "nk":
        per_eval = problem.n * problem.K
    elif kind == "ecc":
        per_eval = problem.M * problem.n ** 2
    else:
        raise ContractError(f"unknown problem kind {kind!r}")
    return float(n_evaluations * per_eval)


class SimulatedMeter:
    """Deterministic cost model ``(overhead + c * work) * exp(sigma * z)``."""

    kind = "simulated"

    def __init__(self, config: MeterConfig | None = None, rng=None):
        self.config = config or MeterConfig()
        self.rng = make_rng(0 if rng is None else rng)

    def begin(self) -> MeterToken:
        return MeterToken(meter_id=id(self))

    def end(self, token: MeterToken, work_units: float = 0.0, rng=None) -> EnergySample:
        _check_token(self, token)
        if work_units < 0:
            raise ContractError("work_units must be >= 0")
        cfg = self.config
        joules = cfg.fixed_overhead_j + cfg.joules_per_work_unit * work_units
        if cfg.noise_sigma > 0:
            z = (rng if rng is not None else self.rng).standard_normal()
            joules *= math.exp(cfg.noise_sigma * z)
        return EnergySample(max(joules, cfg.energy_floor_j))


class RaplMeter:
    """Package + DRAM energy from the powercap ``intel-rapl`` hierarchy.

    Not attribution-safe when several trials share the process; the harness
    runs RAPL experiments sequentially.
    """

    kind = "rapl"

    def __init__(self, config: MeterConfig | None = None, root: str | os.PathLike | None = None):
        self.config = config or MeterConfig(kind="rapl")
        self.root = Path(root if root is not None else self.config.rapl_root)
        self.domains = discover_rapl_domains(self.root)
        self.max_ranges = tuple(_read_uint(d / "max_energy_range_uj") for d in self.domains)

    def _snapshot(self) -> tuple:
        return tuple(_read_uint(d / "energy_uj") for d in self.domains)

    def begin(self) -> MeterToken:
        return MeterToken(meter_id=id(self), snapshot=self._snapshot())

    def end(self, token: MeterToken, work_units: float = 0.0, rng=None) -> EnergySample:
        _check_token(self, token)
        now = self._snapshot()
        total_uj = sum(
            rapl_counter_delta(p, q, m) for p, q, m in zip(token.snapshot, now, self.max_ranges)
        )
        return EnergySample(max(total_uj * 1e-6, self.config.energy_floor_j))


def discover_rapl_domains(root: str | os.PathLike) -> list[Path]:
    """CPU package zones plus their DRAM subzones under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise MeterError(f"powercap interface not found at {root}")
    domains = []
    for entry in sorted(root.iterdir()):
        if _PACKAGE_RE.match(entry.name):
            domains.append(entry)
            for sub in sorted(entry.iterdir()):
                if _SUBDOMAIN_RE.match(sub.name) and _read_name(sub) == "dram":
                    domains.append(sub)
    if not domains:
        raise MeterError(f"no intel-rapl package domains under {root}")
    for d in domains:
        if not os.access(d / "energy_uj", os.R_OK):
            raise MeterError(f"cannot read {d / 'energy_uj'}")
    return domains


def make_meter(config: MeterConfig, rng=None):
    if config.kind == "rapl":
        return RaplMeter(config)
    return SimulatedMeter(config, rng)


def _check_token(meter, token: MeterToken) -> None:
    if token.meter_id != id(meter):
        raise ContractError("token was issued by a different meter")
    if token.used:
        raise ContractError("meter token already consumed")
    token.used = True


def _read_uint(path: Path) -> int:
    try:
        return int(path.read_text().strip())
    except (OSError, ValueError) as exc:
        raise MeterError(f"cannot read RAPL counter {path}: {exc}") from exc


def _read_name(path: Path) -> str:
    try:
        return (path / "name").read_text().strip()
    except OSError:
        return ""


__all__ = [
    "EnergySample",
    "MeterConfig",
    "MeterError",
    "MeterToken",
    "RaplMeter",
    "SimulatedMeter",
    "discover_rapl_domains",
    "make_meter",
    "rapl_counter_delta",
    "work_units_for",
]
