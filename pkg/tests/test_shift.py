from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmslab.errors import PreconditionError, SinkError
from kmslab.graph import Word, build_graph, enumerate_paths, random_graph, single_loop
from kmslab.sampling import random_word
from kmslab.shift import (CylinderFunction, concat, intersect, is_prefix, merge, preimage_count,
                          shifted_cylinder_constraint, tail)


def test_intersect_examples(db):
    e = db.word("a0")
    assert intersect(db, e, db.word("a0", "a1")) == db.word("a0", "a1")
    assert intersect(db, e, db.word("a1")) is None
    assert intersect(db, db.vertex_word("v"), e) == e
    assert intersect(db, db.vertex_word("w"), e) is None


def test_intersect_drops_dead_cylinders():
    # b only receives from the dead source u, so Z(b) and Z(x) are empty
    g = build_graph([("l", "a", "a"), ("x", "b", "u"), ("y", "a", "b")], vertices=["a", "b", "u"])
    assert intersect(g, g.vertex_word("b"), g.vertex_word("b")) is None
    assert intersect(g, g.word("y"), g.word("y")) is None
    assert intersect(g, g.word("l"), g.word("l")) == g.word("l")


def test_preimage_examples(db):
    assert preimage_count(db, "v", 3) == 8
    assert preimage_count(db, "w", 2) == 14
    assert preimage_count(db, "w", 0) == 1


def test_preimage_requires_no_sinks():
    g = build_graph([("e", "v", "v"), ("f", "u", "v")], vertices=["v", "u"])
    with pytest.raises(SinkError):
        preimage_count(g, "v", 1)


def test_preimage_functoriality(db):
    # |σ^{-(M+N)}| at u is the sum over σ^{-M}-preimages y of |σ^{-N}| at r(y)
    for M, N in [(1, 2), (2, 3), (3, 1)]:
        for u in range(db.n_vertices):
            total = sum(preimage_count(db, p.vertex, N) for p in enumerate_paths(db, u, M))
            assert total == preimage_count(db, u, M + N)


def test_shifted_constraint_examples(db, loop):
    e = loop.word("e")
    assert shifted_cylinder_constraint(loop, e, 1, e) == loop.word("e", "e")
    a0, c = db.word("a0"), db.word("c")
    assert shifted_cylinder_constraint(db, a0, 1, c) == db.word("a0", "c")
    assert shifted_cylinder_constraint(db, a0, 1, db.word("a1")) == db.word("a0", "a1")
    b0 = db.word("b0")
    # r(a0) = v != w = s(b0)
    assert shifted_cylinder_constraint(db, b0, 1, db.word("a0")) is None


def test_shifted_constraint_needs_long_word(db):
    with pytest.raises(PreconditionError):
        shifted_cylinder_constraint(db, db.word("a0"), 2, db.vertex_word("v"))


def _brute_force_constraint(g, mu, l, lam, depth):
    out = set()
    for p in g.words_of_length(depth):
        if is_prefix(mu, p) and is_prefix(lam, tail(g, p, l)):
            out.add(p)
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shifted_constraint_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 3, max_edges=7)
    if not g.live:
        return
    mu = random_word(g, rng, 3)
    lam = random_word(g, rng, 2)
    got = shifted_cylinder_constraint(g, mu, 2, lam)
    expect = _brute_force_constraint(g, mu, 2, lam, 5)
    if got is None:
        assert not expect
    else:
        assert {p for p in g.words_of_length(5) if is_prefix(got, p)} == expect


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(0, 4))
def test_intersection_matches_brute_force(seed, k1, k2):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 3, max_edges=7)
    if not g.live:
        return
    a, b = random_word(g, rng, k1), random_word(g, rng, k2)
    d = max(k1, k2)
    both = {p for p in g.words_of_length(d) if is_prefix(a, p) and is_prefix(b, p)}
    got = intersect(g, a, b)
    assert ({p for p in g.words_of_length(d) if is_prefix(got, p)} if got is not None else set()) == both


def test_tail_and_concat(db):
    w = db.word("c", "b1", "b2")
    assert tail(db, w, 0) == w
    assert tail(db, w, 1) == db.word("b1", "b2")
    assert tail(db, w, 3) == db.vertex_word("w")
    assert concat(db, db.word("c"), db.word("b0")) == db.word("c", "b0")
    assert concat(db, db.word("a0"), db.word("b0")) is None
    with pytest.raises(PreconditionError):
        tail(db, w, 4)
    assert merge(db.word("c"), db.word("a0")) is None


def test_cylinder_function_arithmetic(db):
    f = CylinderFunction.indicator(db, db.vertex_word("v"), 2.0)
    g_ = CylinderFunction.indicator(db, db.word("a0"), 1.0) + CylinderFunction.indicator(db, db.word("c"), 3.0)
    prod = f * g_
    assert prod.terms == {db.word("a0"): 2.0, db.word("c"): 6.0}
    assert (f + g_).value_on(db.word("c", "b0")) == 5.0
    assert prod.depth() == 1
    vals = prod.canonical(2)
    assert vals[db.word("a0", "a1")] == 2.0 and vals[db.word("b0", "b0")] == 0.0


def test_cylinder_function_pointwise_product(db, rng):
    from kmslab.sampling import random_cylinder_function
    for _ in range(20):
        f = random_cylinder_function(db, rng, 2)
        h = random_cylinder_function(db, rng, 2)
        fh = f * h
        for p in db.words_of_length(3):
            assert abs(fh.value_on(p) - f.value_on(p) * h.value_on(p)) <= 1e-12


def test_value_on_needs_depth(loop):
    f = CylinderFunction.indicator(loop, loop.word("e", "e"))
    with pytest.raises(PreconditionError):
        f.value_on(loop.word("e"))


def test_loop_words(loop):
    assert single_loop().words_of_length(4) == [Word(0, (0, 0, 0, 0))]
