from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmslab.errors import NoCycleError, SinkError
from kmslab.graph import (build_graph, column_sum_sequence, cycle_graph, full_shift, random_graph,
                          scc_decompose, vertex_matrix)
from kmslab.spectral import (analyze, beta_c, beta_l_empirical, component_radii, growth_bound_check,
                             perron_irreducible, spectral_radius)


def test_spectral_radius_examples(db, loop):
    assert abs(spectral_radius(vertex_matrix(db)) - 3) <= 1e-12
    assert abs(spectral_radius(vertex_matrix(loop)) - 1) <= 1e-12
    assert abs(spectral_radius(np.array([[0, 1], [1, 0]])) - 1) <= 1e-12


def test_spectral_radius_acyclic_is_zero():
    g = build_graph([("b", "a")], vertices=["a", "b"])
    assert spectral_radius(vertex_matrix(g)) == 0.0
    with pytest.raises(NoCycleError):
        beta_c(vertex_matrix(g))


def test_beta_c_examples(db, loop):
    assert abs(beta_c(vertex_matrix(db))[0] - math.log(3)) <= 1e-12
    assert abs(beta_c(vertex_matrix(loop))[0]) <= 1e-12
    for N in (2, 3, 5):
        assert abs(beta_c(vertex_matrix(full_shift(N)))[0] - math.log(N)) <= 1e-12


def test_beta_l_dumbbell_is_ln2_at_every_N(db):
    est, seq = beta_l_empirical(vertex_matrix(db), 64)
    assert len(seq) == 64
    assert all(abs(x - math.log(2)) <= 1e-14 for x in seq)
    assert abs(est - math.log(2)) <= 1e-14


def test_beta_l_single_loop(loop):
    est, seq = beta_l_empirical(vertex_matrix(loop), 16)
    assert est == 0.0 and all(x == 0.0 for x in seq)


def test_beta_l_strongly_connected_approaches_ln_rho():
    g = build_graph([("a", "b"), ("b", "a"), ("a", "a"), ("b", "b"), ("b", "b")], vertices=["a", "b"])
    A = vertex_matrix(g)
    est, seq = beta_l_empirical(A, 64)
    assert abs(seq[-1] - math.log(spectral_radius(A))) <= 0.1


def test_beta_l_sink_raises():
    g = build_graph([("e", "v", "v"), ("f", "u", "v")], vertices=["v", "u"])
    with pytest.raises(SinkError):
        beta_l_empirical(vertex_matrix(g), 8)


def test_perron_vectors(db):
    dec, radii = component_radii(vertex_matrix(db))
    for i, p in radii.items():
        assert np.all(p.vector > 0) and abs(p.vector.sum() - 1) <= 1e-12
        B = dec.block(vertex_matrix(db), i)
        assert np.max(np.abs(B @ p.vector - p.rho * p.vector)) <= 1e-10
        assert p.lower <= p.rho <= p.upper


def test_perron_periodic_matrix():
    A = vertex_matrix(cycle_graph(5))
    p = perron_irreducible(A)
    assert abs(p.rho - 1) <= 1e-12
    assert np.allclose(p.vector, 0.2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_radius_matches_numpy(seed):
    g = random_graph(np.random.default_rng(seed), int(np.random.default_rng(seed).integers(1, 6)))
    A = vertex_matrix(g)
    expect = max(abs(np.linalg.eigvals(A.astype(float))))
    assert abs(spectral_radius(A) - expect) <= 1e-8 * max(1, expect)


def test_growth_strongly_connected():
    g = build_graph([("a", "b"), ("b", "a"), ("a", "a")], vertices=["a", "b"])
    A = vertex_matrix(g)
    beta_E, ok, ratios = growth_bound_check(A, 64)
    assert ok and 1 <= beta_E < math.inf
    # Perron vector x with min entry K gives K * colsum <= rho^N, i.e. ratio <= 1/K;
    # the eigenvector of A^T gives ratio >= K' (min/max of the left Perron vector)
    w, V = np.linalg.eig(A.T.astype(float))
    x = np.abs(V[:, np.argmax(w.real)].real)
    x = x / x.max()
    K = x.min()
    assert max(ratios) <= 1 / K + 1e-9
    assert min(ratios) >= K - 1e-9


def test_growth_dumbbell(db):
    beta_E, ok, ratios = growth_bound_check(vertex_matrix(db), 64)
    assert ok
    # colsum_w = 2·3^N - 2^N, so the ratio to N·3^N is (2 - (2/3)^N)/N
    for N, r in enumerate(ratios, start=1):
        assert abs(r - (2 - (2 / 3) ** N) / N) <= 1e-12 * max(1.0, r)


def test_growth_single_loop(loop):
    beta_E, ok, _ = growth_bound_check(vertex_matrix(loop), 32)
    assert beta_E == 1.0 and ok


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sandwich_and_squeeze(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 6)))
    A = vertex_matrix(g)
    rho = spectral_radius(A)
    n = len(scc_decompose(g).components)
    beta_E, _, _ = growth_bound_check(A, 32)
    bc, seq = beta_c(A, 32)
    for N, c in enumerate(column_sum_sequence(A, 32), start=1):
        lmax = math.log(max(c))
        assert lmax >= N * math.log(rho) - 1e-9 * N
        assert lmax <= math.log(beta_E) + (n - 1) * math.log(N) + N * math.log(rho) + 1e-9 * N
        assert abs(seq[N - 1] - bc) <= (math.log(beta_E) + (n - 1) * math.log(N)) / N + 1e-9


def test_analyze_report(db):
    rep = analyze(vertex_matrix(db))
    assert abs(rep.rho - 3) <= 1e-12
    assert abs(rep.beta_l - math.log(2)) <= 1e-14
    assert rep.n_components == 2
    assert len(rep.achieving_components) == 1
    js = rep.to_json()
    assert js["beta_c"] == rep.beta_c
