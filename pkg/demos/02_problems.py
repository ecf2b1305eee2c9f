"""
Benchmark problems
==================

Generate the three binary benchmarks, evaluate a few bitstrings, and
round-trip an instance through JSON.
"""

import tempfile
from pathlib import Path

import numpy as np

from eij_meta.problems import generate, instance_load, instance_save, instances_equal

rng = np.random.default_rng(1)

# knapsack: 100 items, capacity equal to the heaviest item
kp = generate("kp", seed=3)
x = np.zeros(kp.dim, dtype=np.uint8)
x[np.argmax(kp.profits / kp.weights)] = 1  # best ratio item fits on its own
print(f"KP n={kp.n} C={kp.capacity} single-item fitness {kp.fitness(x):.1f} feasible={kp.is_feasible(x)}")
x = rng.integers(0, 2, kp.dim, dtype=np.uint8)
print(f"KP random string fitness {kp.fitness(x):.1f} feasible={kp.is_feasible(x)}")

# NK landscape: rugged, values in [0, 1)
nk = generate("nk", seed=3, n=50, K=4)
X = rng.integers(0, 2, size=(1000, nk.dim), dtype=np.uint8)
f = nk.fitness_many(X)
print(f"NK n=50 K=4: random fitness mean {f.mean():.3f}, max {f.max():.3f}")

# ECC: 24 codewords of 12 bits; larger minimum distances score higher
ecc = generate("ecc", seed=0)
x = rng.integers(0, 2, ecc.dim, dtype=np.uint8)
print(f"ECC M={ecc.M} n={ecc.n}: random code fitness {ecc.fitness(x):.4f}")

# two codewords at distance d score d^2 / 2
pair = generate("ecc", seed=0, M=2, n=12)
y = np.zeros(24, dtype=np.uint8)
y[12:18] = 1
print(f"two codewords at distance 6 -> {pair.fitness(y)}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "nk.json"
    instance_save(nk, path)
    print("JSON round trip equal:", instances_equal(nk, instance_load(path)))
