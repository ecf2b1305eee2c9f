"""Shared primitives: bitstrings, contract errors and per-trial RNG streams."""

from __future__ import annotations

import numpy as np

Bitstring = np.ndarray
"""A 1-D ``uint8`` numpy array holding only 0/1 values."""


class ContractError(ValueError):
    """Raised when a caller violates a documented precondition."""


def as_bitstring(x) -> Bitstring:
    """Validate ``x`` and return it as a fresh read-only ``uint8`` bitstring."""
    arr = np.array(x, dtype=np.int64, copy=True)
    if arr.ndim != 1:
        raise ContractError(f"bitstring must be 1-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ContractError("bitstring elements must be 0 or 1")
    out = arr.astype(np.uint8)
    out.setflags(write=False)
    return out


def random_bitstring(length: int, rng: np.random.Generator) -> Bitstring:
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def hamming_distance(a: Bitstring, b: Bitstring) -> int:
    """Number of positions at which ``a`` and ``b`` differ."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def sample_positions(length: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` distinct indices from ``range(length)`` by partial Fisher-Yates."""
    if not 1 <= k <= length:
        raise ContractError(f"need 1 <= k <= {length}, got k={k}")
    idx = np.arange(length)
    for i in range(k):
        j = i + int(rng.integers(length - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


def flip_distinct_bits(x: Bitstring, k: int, rng: np.random.Generator) -> Bitstring:
    """Return a copy of ``x`` with exactly ``k`` distinct positions inverted."""
    x = np.asarray(x)
    pos = sample_positions(x.shape[0], k, rng)
    y = x.copy()
    y[pos] ^= 1
    return y


def trial_seed_sequence(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Seed material for one trial, independent of the order trials are run in."""
    if not 0 <= master_seed < 2**64:
        raise ContractError("master seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))


def trial_seed(master_seed: int, trial: int) -> int:
    """A 64-bit integer identifying the trial stream (recorded in run logs)."""
    return int(trial_seed_sequence(master_seed, trial).generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
