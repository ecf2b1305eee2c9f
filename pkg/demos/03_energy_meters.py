"""
Energy meters
=============

The simulated meter charges a fixed overhead plus a per-work-unit cost
with multiplicative log-normal noise. The RAPL meter reads the powercap
counters; here we fake a sysfs tree so the demo runs anywhere.
"""

import tempfile
from pathlib import Path

import numpy as np

from eij_meta import MeterConfig, RaplMeter, SimulatedMeter, work_units_for
from eij_meta.energy import discover_rapl_domains, rapl_counter_delta
from eij_meta.problems import generate

meter = SimulatedMeter(MeterConfig(noise_sigma=0.05), np.random.default_rng(0))
for kind in ("kp", "nk", "ecc"):
    p = generate(kind, seed=0)
    w = work_units_for(p, 5)
    joules = [meter.end(meter.begin(), w).joules for _ in range(200)]
    print(f"{kind:>3}: 5 evaluations = {w:8.0f} work units, {np.mean(joules) * 1e3:7.2f} mJ +- {np.std(joules) * 1e3:.2f}")

# counters wrap at max_energy_range_uj
print("wrapped delta:", rapl_counter_delta(900, 49, 999), "uJ")

with tempfile.TemporaryDirectory() as tmp:
    zone = Path(tmp) / "intel-rapl:0"
    zone.mkdir()
    (zone / "name").write_text("package-0\n")
    (zone / "energy_uj").write_text("1000\n")
    (zone / "max_energy_range_uj").write_text("999999\n")
    print("domains:", [d.name for d in discover_rapl_domains(tmp)])
    rapl = RaplMeter(MeterConfig(kind="rapl", rapl_root=tmp))
    tok = rapl.begin()
    (zone / "energy_uj").write_text("251000\n")  # 0.25 J later
    print("RAPL sample:", rapl.end(tok).joules, "J")
