from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmslab.errors import EnumerationCapError, GraphFormatError
from kmslab.graph import (DirectedMultigraph, Word, build_graph, column_sum_sequence, cycle_graph,
                          dumbbell, enumerate_paths, exact_matrix_power, full_shift, is_hereditary,
                          matrix_power_column_sums, random_graph, reachable_sources, scc_decompose,
                          single_loop, vertex_matrix)


def test_single_loop_matrix():
    g = single_loop()
    assert vertex_matrix(g).tolist() == [[1]]


def test_dumbbell_shape(db):
    assert db.n_vertices == 2 and db.n_edges == 6
    assert vertex_matrix(db).tolist() == [[2, 1], [0, 3]]


def test_two_cycle_matrix():
    g = build_graph([("v", "u"), ("u", "v")], vertices=["u", "v"])
    assert vertex_matrix(g).tolist() == [[0, 1], [1, 0]]


def test_empty_edge_list_is_valid_but_has_a_sink():
    g = build_graph([], vertices=["v"])
    assert g.n_edges == 0
    assert g.has_sinks() and g.sinks() == ["v"]
    assert g.live == frozenset()


def test_dangling_vertex_is_a_format_error():
    with pytest.raises(GraphFormatError):
        build_graph([("a", "v", "x")], vertices=["v"])


def test_duplicate_ids_rejected():
    with pytest.raises(GraphFormatError):
        build_graph([("a", "v", "v"), ("a", "v", "v")])
    with pytest.raises(GraphFormatError):
        DirectedMultigraph(("v", "v"), ())


def test_sinks_and_sources():
    # u -> v: u is the source of an edge but receives none, v emits nothing
    g = build_graph([("e", "v", "u")], vertices=["u", "v"])
    assert g.sinks() == ["v"]
    assert g.sources() == ["u"]


def test_column_sums_dumbbell(db):
    A = vertex_matrix(db)
    w = db.vertex_index("w")
    assert matrix_power_column_sums(A, 1)[w] == 4
    assert matrix_power_column_sums(A, 2)[w] == 14


def test_column_sums_are_exact_for_large_powers(db):
    A = vertex_matrix(db)
    cols = column_sum_sequence(A, 64)
    assert cols[63][1] == 2 * 3**64 - 2**64
    assert cols[63][0] == 2**64


def test_column_sum_n1_is_column_sum_of_A(rng):
    for _ in range(20):
        g = random_graph(rng, 4)
        A = vertex_matrix(g)
        assert matrix_power_column_sums(A, 1) == A.sum(axis=0).tolist()


def test_exact_power_is_functorial(rng):
    g = random_graph(rng, 4)
    A = vertex_matrix(g)
    P5 = np.array(exact_matrix_power(A, 5), dtype=object)
    P2 = np.array(exact_matrix_power(A, 2), dtype=object)
    P3 = np.array(exact_matrix_power(A, 3), dtype=object)
    assert (P5 == P2.dot(P3)).all()


def test_scc_dumbbell(db):
    dec = scc_decompose(db)
    assert sorted(dec.components) == [(0,), (1,)]
    assert all(dec.nontrivial)
    v, w = db.vertex_index("v"), db.vertex_index("w")
    # w receives no edge from v, so {w} is the hereditary component
    assert is_hereditary(db, {w})
    assert not is_hereditary(db, {v})
    R = dec.reorder(vertex_matrix(db))
    assert R[1, 0] == 0


def test_scc_strongly_connected():
    dec = scc_decompose(cycle_graph(4))
    assert len(dec.components) == 1 and dec.nontrivial == (True,)


def test_scc_dag_has_trivial_components():
    g = build_graph([("b", "a"), ("c", "b"), ("c", "a")], vertices=["a", "b", "c"])
    dec = scc_decompose(g)
    assert len(dec.components) == 3
    assert not any(dec.nontrivial)


def _is_block_upper(g, dec):
    A = dec.reorder(vertex_matrix(g))
    pos = {v: i for i, c in enumerate(dec.components) for v in c}
    order = dec.order
    for i, a in enumerate(order):
        for j, b in enumerate(order):
            if A[i, j] and pos[a] > pos[b]:
                return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_scc_block_triangular_and_partition(seed, n):
    g = random_graph(np.random.default_rng(seed), n)
    dec = scc_decompose(g)
    assert sorted(v for c in dec.components for v in c) == list(range(n))
    assert _is_block_upper(g, dec)
    A = vertex_matrix(g)
    # reordering permutes columns, so column-sum multisets of every power agree
    for N in (1, 2, 3):
        a = sorted(matrix_power_column_sums(A, N))
        b = sorted(matrix_power_column_sums(dec.reorder(A), N))
        assert a == b
    # nontrivial iff the induced subgraph has a cycle
    for c, nt in zip(dec.components, dec.nontrivial):
        B = dec.block(A, dec.components.index(c))
        has_cycle = any(np.trace(np.linalg.matrix_power(B, k)) > 0 for k in range(1, len(c) + 1))
        assert nt == has_cycle


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hereditary_matches_reachability(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5)
    H = {int(x) for x in rng.choice(5, size=int(rng.integers(1, 5)), replace=False)}
    closed = all(reachable_sources(g, v) <= H for v in H)
    assert is_hereditary(g, H) == closed


def test_enumerate_paths_examples(db, loop):
    assert len(enumerate_paths(db, "w", 1)) == 4
    assert enumerate_paths(db, "v", 0) == [Word(0, ())]
    assert len(enumerate_paths(loop, "v", 5)) == 1


def test_enumerate_paths_are_composable(db):
    for p in enumerate_paths(db, "w", 4):
        e = p.edges
        assert db.s[e[-1]] == db.vertex_index("w")
        assert all(db.s[e[i]] == db.r[e[i + 1]] for i in range(len(e) - 1))
        assert db.r[e[0]] == p.vertex


def test_enumerate_paths_cap(db):
    with pytest.raises(EnumerationCapError):
        enumerate_paths(db, "w", 8, cap=100)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumeration_matches_column_sums(seed):
    g = random_graph(np.random.default_rng(seed), 3, max_edges=6)
    A = vertex_matrix(g)
    for N in range(1, 9):
        cols = matrix_power_column_sums(A, N)
        for w in range(g.n_vertices):
            assert len(enumerate_paths(g, w, N)) == cols[w]


def test_json_round_trip(db):
    text = json.dumps(db.to_json())
    assert DirectedMultigraph.from_json(text) == db


def test_json_without_edge_ids():
    g = DirectedMultigraph.from_json({"vertices": ["v", "w"],
                                      "edges": [{"range": "v", "source": "w"}, {"range": "w", "source": "w"}]})
    assert vertex_matrix(g).tolist() == [[0, 1], [0, 1]]


@pytest.mark.parametrize("bad", ['{"edges": [{"range": "v"}]}', "[1, 2]", "not json"])
def test_bad_json(bad):
    with pytest.raises(GraphFormatError):
        DirectedMultigraph.from_json(bad)


def test_word_json_round_trip(db):
    w = db.word("c", "b0", "b2")
    assert db.word_from_json(db.word_to_json(w)) == w
    v = db.vertex_word("v")
    assert db.word_to_json(v) == {"vertex": "v"}
    assert db.word_from_json({"vertex": "v"}) == v


def test_word_rejects_uncomposable(db):
    with pytest.raises(GraphFormatError):
        db.word("b0", "a0")


def test_full_shift_and_live():
    g = full_shift(3)
    assert vertex_matrix(g).tolist() == [[3]]
    # a vertex fed only by a dead source is itself dead
    h = build_graph([("x", "a", "a"), ("y", "b", "c")], vertices=["a", "b", "c"])
    assert h.live == frozenset({0})


def test_random_graph_has_no_sinks(rng):
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(1, 7)))
        assert not g.has_sinks()
        assert g.n_edges <= 12
