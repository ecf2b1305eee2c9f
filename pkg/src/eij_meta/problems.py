"""Benchmark problems: 0-1 knapsack (KP), NK landscapes and error-correcting codes (ECC).

All three are maximised over fixed-length bitstrings. Every instance offers
``fitness(x)`` for a single bitstring and ``fitness_many(X)`` for a 2-D batch
(one bitstring per row); both give identical values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, make_rng

KP_VALUE_RANGE = (1, 1000)


class InstanceFormatError(ValueError):
    """An instance file is malformed or violates an instance invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _check_length(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != dim:
        raise ContractError(f"bitstring length {x.shape[-1]} != problem dimension {dim}")
    return x


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- KP


@dataclass(frozen=True, eq=False)
class KpInstance:
    profits: np.ndarray
    weights: np.ndarray
    capacity: int
    seed: int | None = None
    penalty_K: float = field(init=False)
    penalty_rho: float = field(init=False)
    kind = "kp"

    def __post_init__(self):
        object.__setattr__(self, "profits", _frozen(self.profits, np.int64))
        object.__setattr__(self, "weights", _frozen(self.weights, np.int64))
        object.__setattr__(self, "capacity", int(self.capacity))
        object.__setattr__(self, "penalty_K", float(self.n))
        object.__setattr__(self, "penalty_rho", float(np.max(self.profits / self.weights)))

    @property
    def n(self) -> int:
        return int(self.profits.shape[0])

    @property
    def dim(self) -> int:
        return self.n

    def fitness(self, x) -> float:
        return kp_fitness(self, x)

    def fitness_many(self, X) -> np.ndarray:
        X = _check_length(X, self.n).astype(np.int64)
        profit = X @ self.profits
        over = np.maximum(0, X @ self.weights - self.capacity)
        return profit - self.penalty_K * self.penalty_rho * over

    def is_feasible(self, x) -> bool:
        x = _check_length(x, self.n).astype(np.int64)
        return bool(int(x @ self.weights) <= self.capacity)


def kp_generate(n: int, seed: int) -> KpInstance:
    """Profits and weights uniform on [1, 1000]; capacity is the largest weight."""
    if n < 1:
        raise ContractError("n must be >= 1")
    rng = make_rng(seed)
    lo, hi = KP_VALUE_RANGE
    profits = rng.integers(lo, hi + 1, size=n)
    weights = rng.integers(lo, hi + 1, size=n)
    return KpInstance(profits, weights, int(weights.max()), seed=seed)


def kp_fitness(inst: KpInstance, x) -> float:
    x = _check_length(x, inst.n).astype(np.int64)
    if x.ndim != 1:
        raise ContractError("kp_fitness expects a single bitstring")
    profit = int(x @ inst.profits)
    over = max(0, int(x @ inst.weights) - inst.capacity)
    return float(profit - inst.penalty_K * inst.penalty_rho * over)


# --------------------------------------------------------------------------- NK


def _ordered_sum(a: np.ndarray) -> np.ndarray:
    """Left-to-right sum over the last axis.

    Unlike ``np.sum`` (pairwise, layout dependent) the result does not depend
    on batch shape, so single and batched evaluations agree bit for bit.
    """
    return np.cumsum(a, axis=-1)[..., -1]


@dataclass(frozen=True, eq=False)
class NkInstance:
    """Random-neighbourhood NK landscape.

    ``tables[i]`` is indexed by the integer whose most significant bit is
    ``x[i]`` followed by ``x[neighborhoods[i][0]], ..., x[neighborhoods[i][K-1]]``.
    """

    neighborhoods: np.ndarray  # (n, K) int
    tables: np.ndarray  # (n, 2**(K+1)) float
    seed: int | None = None
    kind = "nk"

    def __post_init__(self):
        nb = np.array(self.neighborhoods, dtype=np.int64)
        n = np.asarray(self.tables).shape[0]
        nb = nb.reshape(n, -1)
        object.__setattr__(self, "neighborhoods", _frozen(nb, np.int64))
        object.__setattr__(self, "tables", _frozen(self.tables, np.float64))
        cols = np.concatenate([np.arange(n)[:, None], nb], axis=1)
        object.__setattr__(self, "_cols", cols)
        object.__setattr__(self, "_powers", 2 ** np.arange(self.K, -1, -1, dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.tables.shape[0])

    @property
    def K(self) -> int:
        return int(self.neighborhoods.shape[1])

    @property
    def dim(self) -> int:
        return self.n

    def fitness(self, x) -> float:
        return nk_fitness(self, x)

    def fitness_many(self, X) -> np.ndarray:
        X = _check_length(X, self.n).astype(np.int64)
        idx = X[..., self._cols] @ self._powers
        return _ordered_sum(self.tables[np.arange(self.n), idx]) / self.n


def nk_generate(n: int, K: int, seed: int) -> NkInstance:
    if not 0 <= K < n:
        raise ContractError(f"need 0 <= K < n, got n={n}, K={K}")
    rng = make_rng(seed)
    nb = np.empty((n, K), dtype=np.int64)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        nb[i] = rng.choice(others, size=K, replace=False)
    tables = rng.random((n, 2 ** (K + 1)))
    return NkInstance(nb, tables, seed=seed)


def nk_fitness(inst: NkInstance, x) -> float:
    x = _check_length(x, inst.n)
    if x.ndim != 1:
        raise ContractError("nk_fitness expects a single bitstring")
    return float(inst.fitness_many(x))


# -------------------------------------------------------------------------- ECC


@dataclass(frozen=True)
class EccInstance:
    """``M`` codewords of length ``n``, laid out row-major in one bitstring."""

    M: int = 24
    n: int = 12
    seed: int | None = None
    kind = "ecc"

    def __post_init__(self):
        if self.M < 1 or self.n < 1:
            raise ContractError("M and n must be positive")

    @property
    def dim(self) -> int:
        return self.M * self.n

    def fitness(self, x) -> float:
        return ecc_fitness(self, x)

    def fitness_many(self, X) -> np.ndarray:
        X = _check_length(X, self.dim).astype(np.int64)
        batch = X.reshape(X.shape[:-1] + (self.M, self.n))
        ones = batch.sum(axis=-1)
        dots = batch @ np.swapaxes(batch, -1, -2)
        d = ones[..., :, None] + ones[..., None, :] - 2 * dots
        off = ~np.eye(self.M, dtype=bool)
        d_off = d[..., off].astype(np.float64)
        dup = np.any(d_off == 0, axis=-1)
        with np.errstate(divide="ignore"):
            s = _ordered_sum(1.0 / d_off**2)
        out = np.where(dup, 0.0, 1.0 / np.where(dup, 1.0, s))
        return out


def ecc_generate(M: int = 24, n: int = 12, seed: int | None = None) -> EccInstance:
    return EccInstance(M, n, seed)


def ecc_fitness(inst: EccInstance, x) -> float:
    """Inverse of the summed inverse squared distances over ordered codeword pairs.

    Duplicate codewords give fitness 0.
    """
    x = _check_length(x, inst.dim)
    if x.ndim != 1:
        raise ContractError("ecc_fitness expects a single bitstring")
    if inst.M < 2:
        raise ContractError("ECC fitness needs at least two codewords")
    return float(inst.fitness_many(x))


# ------------------------------------------------------------------ generation


def generate(kind: str, seed: int = 0, **params):
    """Build an instance of ``kind`` with the standard benchmark sizes unless overridden."""
    if kind == "kp":
        return kp_generate(params.get("n", 100), seed)
    if kind == "nk":
        return nk_generate(params.get("n", 100), params.get("K", 6), seed)
    if kind == "ecc":
        return ecc_generate(params.get("M", 24), params.get("n", 12), seed)
    raise ContractError(f"unknown problem kind {kind!r}")


def instance_params(inst) -> dict:
    if inst.kind == "kp":
        return {"n": inst.n}
    if inst.kind == "nk":
        return {"n": inst.n, "K": inst.K}
    return {"M": inst.M, "n": inst.n}


# --------------------------------------------------------------- serialisation


def instance_to_dict(inst) -> dict:
    if inst.kind == "kp":
        data = {
            "profits": inst.profits.tolist(),
            "weights": inst.weights.tolist(),
            "capacity": inst.capacity,
            "penalty_K": inst.penalty_K,
            "penalty_rho": inst.penalty_rho,
        }
    elif inst.kind == "nk":
        data = {"neighborhoods": inst.neighborhoods.tolist(), "tables": inst.tables.tolist()}
    else:
        data = {}
    return {"kind": inst.kind, "seed": inst.seed, "params": instance_params(inst), "data": data}


def _get(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise InstanceFormatError(f"{where}{key}", "missing")
    return d[key]


def _int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise InstanceFormatError(name, f"expected integer, got {v!r}")
    return v


def _int_list(v, name: str, length: int | None = None) -> list[int]:
    if not isinstance(v, list):
        raise InstanceFormatError(name, "expected a list")
    vals = [_int(e, f"{name}[{i}]") for i, e in enumerate(v)]
    if length is not None and len(vals) != length:
        raise InstanceFormatError(name, f"expected {length} entries, got {len(vals)}")
    return vals


def instance_from_dict(doc: dict):
    kind = _get(doc, "kind", "")
    seed = doc.get("seed")
    if seed is not None:
        _int(seed, "seed")
    params = _get(doc, "params", "")
    data = _get(doc, "data", "")
    if kind == "kp":
        n = _int(_get(params, "n", "params."), "params.n")
        profits = _int_list(_get(data, "profits", "data."), "data.profits", n)
        weights = _int_list(_get(data, "weights", "data."), "data.weights", n)
        lo, hi = KP_VALUE_RANGE
        for name, vals in (("data.profits", profits), ("data.weights", weights)):
            for i, v in enumerate(vals):
                if not lo <= v <= hi:
                    raise InstanceFormatError(f"{name}[{i}]", f"{v} outside [{lo}, {hi}]")
        capacity = _int(_get(data, "capacity", "data."), "data.capacity")
        if capacity != max(weights):
            raise InstanceFormatError("data.capacity", f"{capacity} != max weight {max(weights)}")
        inst = KpInstance(profits, weights, capacity, seed=seed)
        for key in ("penalty_K", "penalty_rho"):
            if key in data and float(data[key]) != getattr(inst, key):
                raise InstanceFormatError(f"data.{key}", f"{data[key]} != derived {getattr(inst, key)}")
        return inst
    if kind == "nk":
        n = _int(_get(params, "n", "params."), "params.n")
        K = _int(_get(params, "K", "params."), "params.K")
        if not 0 <= K < n:
            raise InstanceFormatError("params.K", f"need 0 <= K < n, got K={K}, n={n}")
        nb_raw = _get(data, "neighborhoods", "data.")
        if not isinstance(nb_raw, list) or len(nb_raw) != n:
            raise InstanceFormatError("data.neighborhoods", f"expected {n} rows")
        nb = []
        for i, row in enumerate(nb_raw):
            row = _int_list(row, f"data.neighborhoods[{i}]", K)
            if len(set(row)) != K or i in row or any(not 0 <= j < n for j in row):
                raise InstanceFormatError(f"data.neighborhoods[{i}]", "need K distinct indices != i in [0, n)")
            nb.append(row)
        tb_raw = _get(data, "tables", "data.")
        if not isinstance(tb_raw, list) or len(tb_raw) != n:
            raise InstanceFormatError("data.tables", f"expected {n} rows")
        tables = []
        for i, row in enumerate(tb_raw):
            if not isinstance(row, list) or len(row) != 2 ** (K + 1):
                raise InstanceFormatError(f"data.tables[{i}]", f"expected {2 ** (K + 1)} entries")
            for j, v in enumerate(row):
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v < 1.0:
                    raise InstanceFormatError(f"data.tables[{i}][{j}]", f"{v!r} outside [0, 1)")
            tables.append([float(v) for v in row])
        return NkInstance(np.array(nb, dtype=np.int64).reshape(n, K), np.array(tables), seed=seed)
    if kind == "ecc":
        M = _int(_get(params, "M", "params."), "params.M")
        n = _int(_get(params, "n", "params."), "params.n")
        if M < 2 or n < 1:
            raise InstanceFormatError("params", "need M >= 2 and n >= 1")
        return EccInstance(M, n, seed)
    raise InstanceFormatError("kind", f"unknown kind {kind!r}")


def instance_save(inst, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def instance_load(path: str | os.PathLike):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError("<document>", str(exc)) from exc
    return instance_from_dict(doc)


def instances_equal(a, b) -> bool:
    if a.kind != b.kind or a.seed != b.seed:
        return False
    if a.kind == "kp":
        return (
            np.array_equal(a.profits, b.profits)
            and np.array_equal(a.weights, b.weights)
            and a.capacity == b.capacity
            and a.penalty_rho == b.penalty_rho
        )
    if a.kind == "nk":
        return np.array_equal(a.neighborhoods, b.neighborhoods) and np.array_equal(a.tables, b.tables)
    return a.M == b.M and a.n == b.n


