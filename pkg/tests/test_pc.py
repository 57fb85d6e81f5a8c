import csv

import numpy as np
import pytest

from residci.citests import CiQuery, TestResult
from residci.data import Dataset
from residci.graphs import Dag, cpdag_of, random_dag
from residci.pc import PcConfig, learn_skeleton, level_budget, oracle_tester, orient, pc, write_test_log
from residci.simulate import simulate_binary_dag


def names_ds(n_vars, n=20):
    return Dataset.from_columns({f"V{j}": np.arange(n) % 2 for j in range(n_vars)})


@pytest.mark.parametrize("seed", range(10))
def test_oracle_pc_recovers_class(seed):
    g = random_dag(8, 0.3, seed)
    ds = names_ds(8)
    cpdag, skel = pc(ds, PcConfig(), oracle_tester(g))
    assert cpdag == cpdag_of(g)
    for e, S in skel.sepsets.items():
        a, b = sorted(int(v[1:]) for v in e)
        assert not g.adjacent(a, b)


def test_order_independence():
    g = random_dag(7, 0.4, 3)
    ds = simulate_binary_dag(g, 1.0, 400, 3)
    cfg = PcConfig(test="g2")
    _, ref = pc(ds, cfg)
    perm = [4, 2, 6, 0, 5, 1, 3]
    shuffled = ds.select_columns([ds.names[j] for j in perm])
    _, other = pc(shuffled, cfg)
    assert other.edges == ref.edges


def test_skeleton_levels_and_log(tmp_path):
    g = Dag(3, frozenset({(0, 1), (1, 2)}))
    ds = names_ds(3)
    edges, sepsets, log = learn_skeleton(ds, PcConfig(), oracle_tester(g))
    assert edges == {frozenset(("V0", "V1")), frozenset(("V1", "V2"))}
    assert sepsets == {frozenset(("V0", "V2")): frozenset({"V1"})}
    assert [e.level for e in log][:3] == [0, 0, 0]
    write_test_log(log, tmp_path / "log.csv")
    rows = list(csv.reader(open(tmp_path / "log.csv")))
    assert rows[0] == ["x", "y", "z", "family", "stat", "df", "p"]
    assert len(rows) == len(log) + 1


def test_max_cond_size_limits_levels():
    g = Dag(3, frozenset({(0, 1), (1, 2)}))
    edges, _, log = learn_skeleton(names_ds(3), PcConfig(max_cond_size=0), oracle_tester(g))
    assert len(edges) == 3 and all(e.level == 0 for e in log)


def test_first_v_structure_wins():
    # both 0 -> 2 <- 1 and 1 -> 3 <- 2 are suggested; 1 -- 2 keeps the first orientation
    names = ["a", "b", "c", "d"]
    edges = {frozenset(p) for p in (("a", "c"), ("b", "c"), ("b", "d"), ("c", "d"))}
    sepsets = {frozenset(("a", "b")): frozenset(), frozenset(("a", "d")): frozenset({"c"})}
    cp = orient(names, edges, sepsets)
    assert (0, 2) in cp.directed and (1, 2) in cp.directed


def test_tests_are_counted_within_budget():
    calls = []

    def counting(ds, q):
        calls.append(q)
        return TestResult(0.0, 1, 0.0, "x")

    ds = names_ds(5)
    learn_skeleton(ds, PcConfig(max_cond_size=2), counting)
    assert sum(1 for q in calls if len(q.z) == 1) <= level_budget([4] * 5, 1)
    assert len({(q.x, q.y, q.z) for q in calls}) == len(calls)


def test_config_validation():
    with pytest.raises(ValueError):
        PcConfig(alpha=0.0)
    with pytest.raises(ValueError):
        learn_skeleton(Dataset.from_columns({"a": [0, 1]}), PcConfig(), oracle_tester(Dag(1, frozenset())))
