import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_fake_powercap(root, packages=((1000, 999_999),), dram=((500, 99_999),)):
    """Build a minimal powercap tree: package zones with optional DRAM subzones."""
    for i, (energy, max_range) in enumerate(packages):
        pkg = root / f"intel-rapl:{i}"
        pkg.mkdir(parents=True)
        (pkg / "name").write_text(f"package-{i}\n")
        (pkg / "energy_uj").write_text(f"{energy}\n")
        (pkg / "max_energy_range_uj").write_text(f"{max_range}\n")
        if i < len(dram):
            d_energy, d_range = dram[i]
            sub = pkg / f"intel-rapl:{i}:0"
            sub.mkdir()
            (sub / "name").write_text("dram\n")
            (sub / "energy_uj").write_text(f"{d_energy}\n")
            (sub / "max_energy_range_uj").write_text(f"{d_range}\n")
        core = pkg / f"intel-rapl:{i}:1"
        core.mkdir()
        (core / "name").write_text("core\n")
        (core / "energy_uj").write_text("0\n")
        (core / "max_energy_range_uj").write_text("1000\n")
    return root


@pytest.fixture
def fake_powercap(tmp_path):
    return make_fake_powercap(tmp_path / "powercap")
