import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import all_ordered_dags, all_queries, d_separated_by_paths
from residci.graphs import (Cpdag, Dag, GraphError, NoExtensionError, apply_meek_rules, consistent_extension,
                            cpdag_of, d_separated, format_graph, implied_cis, marginally_connected,
                            parse_graph, random_ci_queries, random_dag, read_graph, skeleton_f1,
                            write_graph)


def test_dag_validation():
    with pytest.raises(GraphError):
        Dag(3, frozenset({(0, 1), (1, 2), (2, 0)}))
    with pytest.raises(GraphError):
        Dag(2, frozenset({(0, 0)}))
    with pytest.raises(GraphError):
        Dag(3, frozenset({(0, 1)}), (1, 0, 2))
    g = Dag(3, frozenset({(0, 2), (1, 2)}))
    assert g.v_structures() == {(0, 2, 1)}
    assert g.ancestors([2]) == {0, 1, 2}


def test_d_separation_small_dags_exhaustive():
    checked = 0
    for n in range(2, 5):
        for g in all_ordered_dags(n):
            for x, y, z in all_queries(n):
                assert d_separated(g, x, y, z) == d_separated_by_paths(g, x, y, z), (g.edges, x, y, z)
                checked += 1
    assert checked > 0


def test_d_separation_textbook():
    # 0 -> 2 <- 1, 2 -> 3
    g = Dag(4, frozenset({(0, 2), (1, 2), (2, 3)}))
    assert d_separated(g, 0, 1, ())
    assert not d_separated(g, 0, 1, (2,))
    assert not d_separated(g, 0, 1, (3,))
    chain = Dag(3, frozenset({(0, 1), (1, 2)}))
    assert not d_separated(chain, 0, 2, ()) and d_separated(chain, 0, 2, (1,))
    with pytest.raises(GraphError):
        d_separated(chain, 0, 0, ())
    with pytest.raises(GraphError):
        d_separated(chain, 0, 2, (0,))


def test_random_dag():
    a, b = random_dag(10, 0.3, 5), random_dag(10, 0.3, 5)
    assert a == b
    assert all(i < j for i, j in a.edges)
    assert not random_dag(6, 0.0, 0).edges
    assert len(random_dag(6, 1.0, 0).edges) == 15
    density = np.mean([len(random_dag(12, 0.4, s).edges) / 66 for s in range(200)])
    assert abs(density - 0.4) < 0.02
    with pytest.raises(GraphError):
        random_dag(5, 1.5, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.floats(0, 1), st.integers(0, 10_000))
def test_implied_cis_hold(n, p, seed):
    g = random_dag(n, p, seed)
    claims = implied_cis(g)
    assert len(claims) == n * (n - 1) // 2 - len(g.edges)
    for c in claims:
        assert c.holds and d_separated(g, c.x, c.y, c.z)
        assert set(c.z) == set(g.parents(c.y)) - {c.x}


def test_random_queries_labelled_by_d_separation():
    g = random_dag(8, 0.3, 1)
    claims = random_ci_queries(g, 50, 6, 2)
    assert len(claims) == 50
    for c in claims:
        assert c.x != c.y and c.x not in c.z and c.y not in c.z and len(c.z) <= 6
        assert c.holds == d_separated_by_paths(g, c.x, c.y, c.z)
    assert claims == random_ci_queries(g, 50, 6, 2)
    with pytest.raises(GraphError):
        random_ci_queries(g, 5, 7, 0)


def test_cpdag_examples():
    chain = cpdag_of(Dag(3, frozenset({(0, 1), (1, 2)})))
    assert not chain.directed and len(chain.undirected) == 2
    collider = cpdag_of(Dag(3, frozenset({(0, 2), (1, 2)})))
    assert collider.directed == {(0, 2), (1, 2)}
    # v-structure 0 -> 2 <- 1 then 2 -- 3 is forced by R1
    g = Dag(4, frozenset({(0, 2), (1, 2), (2, 3)}))
    assert cpdag_of(g).directed == {(0, 2), (1, 2), (2, 3)}


def test_meek_r2_r3():
    # R2: 0 -> 1 -> 2 and 0 -- 2 gives 0 -> 2
    A = np.zeros((3, 3), np.int8)
    A[0, 1] = A[1, 2] = 1
    A[0, 2] = A[2, 0] = 1
    assert apply_meek_rules(A)[2, 0] == 0
    # R3: 0 -- 1, 0 -- 2, 0 -- 3, 1 -> 3 <- 2, 1 and 2 non-adjacent gives 0 -> 3
    A = np.zeros((4, 4), np.int8)
    for a, b in ((0, 1), (0, 2), (0, 3)):
        A[a, b] = A[b, a] = 1
    A[1, 3] = A[2, 3] = 1
    out = apply_meek_rules(A)
    assert out[0, 3] == 1 and out[3, 0] == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.floats(0, 1), st.integers(0, 10_000))
def test_extension_is_in_the_class(n, p, seed):
    g = random_dag(n, p, seed)
    c = cpdag_of(g)
    ext = consistent_extension(c)
    assert ext.skeleton() == g.skeleton()
    assert ext.v_structures() == g.v_structures()
    assert cpdag_of(ext) == c
    assert c.directed <= ext.edges


def test_no_extension_for_chordless_cycle():
    cyc = Cpdag(4, frozenset(), frozenset(frozenset(e) for e in ((0, 1), (1, 2), (2, 3), (3, 0))))
    with pytest.raises(NoExtensionError):
        consistent_extension(cyc)


def test_marginal_connection():
    collider = cpdag_of(Dag(3, frozenset({(0, 2), (1, 2)})))
    assert marginally_connected(collider) == {frozenset((0, 2)), frozenset((1, 2))}
    chain = cpdag_of(Dag(3, frozenset({(0, 1), (1, 2)})))
    assert len(marginally_connected(chain)) == 3
    for seed in range(20):
        g = random_dag(7, 0.3, seed)
        expect = {frozenset((a, b)) for a in range(7) for b in range(a + 1, 7) if not d_separated(g, a, b, ())}
        assert marginally_connected(cpdag_of(g)) == expect


def test_skeleton_f1_conventions():
    e = lambda *p: [frozenset(x) for x in p]
    assert skeleton_f1(e((0, 1), (1, 2)), e((0, 1))) == (0.5, 1.0, pytest.approx(2 / 3))
    assert skeleton_f1([], []) == (1.0, 1.0, 1.0)
    assert skeleton_f1([], e((0, 1))) == (1.0, 0.0, 0.0)
    assert skeleton_f1(e((0, 1)), []) == (0.0, 1.0, 0.0)


def test_graph_io_roundtrip(tmp_path):
    g = random_dag(6, 0.5, 3)
    names = [f"v{i}" for i in range(6)]
    assert parse_graph(format_graph(g)) == g
    write_graph(g, tmp_path / "g.txt", names)
    assert read_graph(tmp_path / "g.txt", names) == g
    c = cpdag_of(g)
    assert parse_graph(format_graph(c, names), names) == c or not c.undirected
    with pytest.raises(GraphError):
        parse_graph("3\n0 => 1\n")
    with pytest.raises(GraphError):
        parse_graph("3\nq -> 1\n", ["a", "b", "c"])
