import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eij_meta.core import ContractError, make_rng
from eij_meta.problems import (
    EccInstance,
    InstanceFormatError,
    KpInstance,
    NkInstance,
    ecc_fitness,
    generate,
    instance_load,
    instance_save,
    instance_to_dict,
    instances_equal,
    kp_fitness,
    kp_generate,
    nk_fitness,
    nk_generate,
)

from oracles import all_bitstrings, ecc_oracle, kp_oracle, nk_oracle

# --------------------------------------------------------------------- KP


def test_kp_hand_example():
    inst = KpInstance([10, 7], [4, 6], 6)
    assert inst.penalty_K == 2 and inst.penalty_rho == 2.5
    assert kp_fitness(inst, [0, 0]) == 0
    assert kp_fitness(inst, [0, 1]) == 7
    assert kp_fitness(inst, [1, 1]) == -3
    for x in all_bitstrings(2):
        assert kp_fitness(inst, x) == kp_oracle([10, 7], [4, 6], 6, x)


def test_kp_generate_invariants():
    inst = kp_generate(100, 3)
    assert inst.n == 100
    assert inst.profits.min() >= 1 and inst.profits.max() <= 1000
    assert inst.weights.min() >= 1 and inst.weights.max() <= 1000
    assert inst.capacity == inst.weights.max()
    assert inst.penalty_K == 100
    assert inst.penalty_rho == max(p / w for p, w in zip(inst.profits, inst.weights))
    again = kp_generate(100, 3)
    assert json.dumps(instance_to_dict(inst)) == json.dumps(instance_to_dict(again))


def test_kp_batch_matches_single_and_oracle():
    inst = kp_generate(16, 8)
    X = make_rng(0).integers(0, 2, (500, 16), dtype=np.uint8)
    batch = inst.fitness_many(X)
    for x, v in zip(X, batch):
        assert v == kp_fitness(inst, x) == kp_oracle(inst.profits.tolist(), inst.weights.tolist(), inst.capacity, x)


def test_kp_argmax_matches_enumeration():
    inst = kp_generate(10, 1)
    X = np.array(list(all_bitstrings(10)), dtype=np.uint8)
    oracle = [kp_oracle(inst.profits.tolist(), inst.weights.tolist(), inst.capacity, x) for x in X]
    assert np.argmax(inst.fitness_many(X)) == int(np.argmax(oracle))


def test_kp_overweight_items_reduce_fitness():
    inst = kp_generate(30, 5)
    rng = make_rng(1)
    checked = 0
    for _ in range(300):
        x = rng.integers(0, 2, 30, dtype=np.uint8)
        if inst.is_feasible(x):
            continue
        for i in np.flatnonzero(x == 0):
            if inst.profits[i] / inst.weights[i] < inst.penalty_K * inst.penalty_rho:
                y = x.copy()
                y[i] = 1
                assert kp_fitness(inst, y) < kp_fitness(inst, x)
                checked += 1
    assert checked > 0


def test_kp_length_mismatch():
    with pytest.raises(ContractError):
        kp_fitness(kp_generate(5, 0), [0, 1])


# --------------------------------------------------------------------- NK


def test_nk_k0_is_additive():
    tables = np.array([[0.1, 0.9], [0.4, 0.2], [0.3, 0.5]])
    inst = NkInstance(np.zeros((3, 0), dtype=int), tables)
    assert inst.K == 0
    for x in all_bitstrings(3):
        assert nk_fitness(inst, x) == pytest.approx(np.mean([tables[i][x[i]] for i in range(3)]), abs=1e-15)


def test_nk_generate_k0_shape():
    inst = nk_generate(5, 0, 1)
    assert inst.tables.shape == (5, 2) and inst.neighborhoods.shape == (5, 0)


def test_nk_hand_indexed_lookup():
    inst = nk_generate(3, 1, 4)
    x = np.array([1, 0, 1], dtype=np.uint8)
    expected = 0.0
    for i in range(3):
        j = int(inst.neighborhoods[i][0])
        expected += inst.tables[i][2 * x[i] + x[j]]
    assert nk_fitness(inst, x) == pytest.approx(expected / 3, abs=1e-15)


def test_nk_generate_invariants_and_determinism():
    inst = nk_generate(100, 6, 9)
    assert inst.tables.shape == (100, 128)
    assert inst.tables.min() >= 0 and inst.tables.max() < 1
    for i, row in enumerate(inst.neighborhoods):
        assert len(set(row.tolist())) == 6 and i not in row
    assert instances_equal(inst, nk_generate(100, 6, 9))
    assert not instances_equal(inst, nk_generate(100, 6, 10))
    with pytest.raises(ContractError):
        nk_generate(5, 5, 0)


def test_nk_random_strings_match_oracle():
    inst = nk_generate(16, 3, 2)
    X = make_rng(2).integers(0, 2, (2000, 16), dtype=np.uint8)
    nb, tb = inst.neighborhoods.tolist(), inst.tables.tolist()
    for x, v in zip(X, inst.fitness_many(X)):
        assert v == pytest.approx(nk_oracle(nb, tb, x), abs=1e-14)


def test_nk_argmax_matches_enumeration():
    inst = nk_generate(10, 2, 3)
    X = np.array(list(all_bitstrings(10)), dtype=np.uint8)
    nb, tb = inst.neighborhoods.tolist(), inst.tables.tolist()
    oracle = np.array([nk_oracle(nb, tb, x) for x in X])
    values = inst.fitness_many(X)
    assert np.argmax(values) == np.argmax(oracle)
    assert values.min() >= 0 and values.max() < 1


# -------------------------------------------------------------------- ECC


@pytest.mark.parametrize("d", range(1, 13))
def test_ecc_two_codewords(d):
    inst = EccInstance(2, 12)
    x = np.zeros(24, dtype=np.uint8)
    x[12:12 + d] = 1
    assert ecc_fitness(inst, x) == pytest.approx(d * d / 2, rel=1e-15)


def test_ecc_duplicates_score_zero():
    inst = EccInstance(3, 4)
    x = np.array([1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 1, 1], dtype=np.uint8)
    assert ecc_fitness(inst, x) == 0.0


def test_ecc_matches_double_loop_oracle():
    inst = EccInstance(4, 6)
    X = make_rng(5).integers(0, 2, (2000, 24), dtype=np.uint8)
    for x, v in zip(X, inst.fitness_many(X)):
        assert v == pytest.approx(ecc_oracle(4, 6, x), rel=1e-13)


def test_ecc_length_mismatch():
    with pytest.raises(ContractError):
        ecc_fitness(EccInstance(3, 4), np.zeros(11, dtype=np.uint8))


@given(st.integers(0, 2**32 - 1), st.permutations(range(5)), st.booleans())
@settings(max_examples=50)
def test_ecc_invariances(seed, perm, complement):
    inst = EccInstance(5, 7)
    x = make_rng(seed).integers(0, 2, 35, dtype=np.uint8)
    words = x.reshape(5, 7)[list(perm)]
    if complement:
        words = 1 - words
    assert ecc_fitness(inst, words.ravel()) == pytest.approx(ecc_fitness(inst, x), rel=1e-14)


def test_fitness_is_pure():
    for inst in (kp_generate(20, 0), nk_generate(20, 3, 0), EccInstance(4, 5)):
        x = make_rng(0).integers(0, 2, inst.dim, dtype=np.uint8)
        assert inst.fitness(x) == inst.fitness(x.copy())


# ----------------------------------------------------------- serialisation


@pytest.mark.parametrize("inst", [kp_generate(12, 1), nk_generate(9, 3, 2), EccInstance(5, 6, seed=3)])
def test_roundtrip(tmp_path, inst):
    path = tmp_path / "inst.json"
    instance_save(inst, path)
    back = instance_load(path)
    assert instances_equal(inst, back)
    x = make_rng(0).integers(0, 2, inst.dim, dtype=np.uint8)
    assert back.fitness(x) == inst.fitness(x)


def _write(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_rejects_wrong_capacity(tmp_path):
    doc = instance_to_dict(kp_generate(5, 0))
    doc["data"]["capacity"] += 1
    with pytest.raises(InstanceFormatError) as err:
        instance_load(_write(tmp_path, doc))
    assert err.value.field == "data.capacity"


def test_load_rejects_nk_table_entry_one(tmp_path):
    doc = instance_to_dict(nk_generate(4, 1, 0))
    doc["data"]["tables"][2][1] = 1.0
    with pytest.raises(InstanceFormatError) as err:
        instance_load(_write(tmp_path, doc))
    assert err.value.field == "data.tables[2][1]"


def test_load_names_missing_field(tmp_path):
    doc = instance_to_dict(kp_generate(5, 0))
    del doc["data"]["weights"]
    with pytest.raises(InstanceFormatError, match="data.weights"):
        instance_load(_write(tmp_path, doc))
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(InstanceFormatError):
        instance_load(tmp_path / "junk.json")


def test_generate_default_sizes():
    assert generate("kp").n == 100
    nk = generate("nk")
    assert (nk.n, nk.K) == (100, 6)
    ecc = generate("ecc")
    assert (ecc.M, ecc.n) == (24, 12)


@pytest.mark.parametrize("inst", [nk_generate(40, 5, 3), EccInstance(7, 9, 3)], ids=["nk", "ecc"])
def test_single_and_batched_evaluation_identical(inst):
    X = np.random.default_rng(0).integers(0, 2, size=(500, inst.dim), dtype=np.uint8)
    batch = inst.fitness_many(X)
    assert all(inst.fitness(x) == batch[i] for i, x in enumerate(X))
