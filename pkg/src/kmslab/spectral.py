"""Perron root, critical inverse temperature, the min-preimage growth rate and
the polynomial growth constant for column sums of vertex-matrix powers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCycleError, SinkError
from .graph import (ComponentDecomposition, DirectedMultigraph, column_sum_sequence,
                    scc_decompose, vertex_matrix)

DEFAULT_TOL = 1e-12
DEFAULT_N_MAX = 64


@dataclass
class PerronResult:
    rho: float
    vector: np.ndarray
    lower: float
    upper: float
    residual: float


def perron_irreducible(M, tol: float = DEFAULT_TOL, max_iter: int = 100_000) -> PerronResult:
    """Perron root and unimodular positive eigenvector of an irreducible nonnegative matrix.

    Power iteration on ``M + I`` (primitive, so periodicity does not stall it),
    seeded with the dense eigenvector and bracketed by the Collatz-Wielandt
    bounds ``min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n == 1:
        x = np.ones(1)
        return PerronResult(float(M[0, 0]), x, float(M[0, 0]), float(M[0, 0]), 0.0)
    w, V = np.linalg.eig(M)
    x = np.abs(V[:, int(np.argmax(w.real))].real)
    if not np.all(x > 0):
        x = np.ones(n)
    x = x / x.sum()
    B = M + np.eye(n)
    lo, hi = -np.inf, np.inf
    for _ in range(max_iter):
        Mx = M @ x
        ratios = Mx / x
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= tol * max(1.0, hi):
            break
        x = B @ x
        x = x / x.sum()
    rho = 0.5 * (lo + hi)
    residual = float(np.max(np.abs(M @ x - rho * x)))
    return PerronResult(rho, x, lo, hi, residual)


@dataclass
class SpectralReport:
    rho: float
    beta_c: float
    beta_l: float | None
    achieving_components: list[int]
    perron_vectors: dict[int, np.ndarray]
    growth_constant: float
    n_components: int
    beta_c_sequence: list[float] = field(default_factory=list)
    beta_l_sequence: list[float] = field(default_factory=list)

    def to_json(self, g: DirectedMultigraph | None = None, dec: ComponentDecomposition | None = None) -> dict:
        def name(i):
            if g is None or dec is None:
                return i
            return [g.vertices[v] for v in dec.components[i]]
        return {
            "rho": self.rho,
            "beta_c": self.beta_c,
            "beta_l": self.beta_l,
            "achieving_components": [name(i) for i in self.achieving_components],
            "perron_vectors": {str(i): [float(x) for x in v] for i, v in self.perron_vectors.items()},
            "growth_constant": self.growth_constant,
            "n_components": self.n_components,
            "beta_c_sequence": self.beta_c_sequence,
            "beta_l_sequence": self.beta_l_sequence,
        }


def _decompose(A):
    from .graph import build_graph
    A = np.asarray(A)
    n = A.shape[0]
    edges = [(str(v), str(w)) for v in range(n) for w in range(n) for _ in range(int(A[v, w]))]
    g = build_graph(edges, vertices=[str(i) for i in range(n)])
    return g, scc_decompose(g)


def _live_columns(A) -> list[int]:
    g, _ = _decompose(A)
    return sorted(g.live)


def component_radii(A, tol: float = DEFAULT_TOL):
    """(decomposition, {component index: PerronResult}) over nontrivial components."""
    A = np.asarray(A)
    _, dec = _decompose(A)
    out = {}
    for i, nontriv in enumerate(dec.nontrivial):
        if nontriv:
            out[i] = perron_irreducible(dec.block(A, i), tol)
    return dec, out


def spectral_radius(A, tol: float = DEFAULT_TOL) -> float:
    """rho(A) as the max of the Perron roots of the irreducible diagonal blocks.

    Returns 0.0 for an acyclic graph; callers that need a cycle check
    ``has_cycle`` or use :func:`beta_c`, which raises.
    """
    _, radii = component_radii(A, tol)
    if not radii:
        return 0.0
    return max(p.rho for p in radii.values())


def has_cycle(A) -> bool:
    _, dec = _decompose(A)
    return any(dec.nontrivial)


def beta_c(A, N_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL) -> tuple[float, list[float]]:
    """(ln rho(A), [N^-1 ln max_w sum_v A^N(v,w) for N = 1..N_max])."""
    rho = spectral_radius(A, tol)
    if rho <= 0:
        raise NoCycleError("graph has no cycle, rho(A) = 0")
    live = _live_columns(A)
    seq = [math.log(max(c[w] for w in live)) / N
           for N, c in enumerate(column_sum_sequence(A, N_max), start=1)]
    return math.log(rho), seq


def beta_l_empirical(A, N_max: int = DEFAULT_N_MAX) -> tuple[float, list[float]]:
    """Min-preimage growth: the sequence N^-1 ln min_w sum_v A^N(v,w) and a limsup proxy.

    The proxy is the max over the last quartile of the sequence.  No
    convergence claim is made.
    """
    live = _live_columns(A)
    if not live:
        raise NoCycleError("graph has no infinite paths")
    cols = column_sum_sequence(A, N_max)
    mins = [min(c[w] for w in live) for c in cols]
    if any(x == 0 for x in mins):
        raise SinkError("a column sum vanishes: the graph has a sink")
    seq = [math.log(x) / N for N, x in enumerate(mins, start=1)]
    start = (3 * N_max) // 4
    return max(seq[start:]), seq


def growth_bound_check(A, N_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL) -> tuple[float, bool, list[float]]:
    """Constant beta_E with sum_v A^N(v,w) <= beta_E N^(n-1) rho^N for N <= N_max.

    ``n`` counts all components, trivial ones included.  ``pass`` is True when
    the running maximum of the per-N ratios no longer grows over the last
    quartile, the finite-horizon proxy for boundedness.
    """
    rho = spectral_radius(A, tol)
    if rho <= 0:
        raise NoCycleError("graph has no cycle, rho(A) = 0")
    _, dec = _decompose(A)
    n = len(dec.components)
    ratios = []
    for N, c in enumerate(column_sum_sequence(A, N_max), start=1):
        # logs keep huge integers out of float overflow
        ln_ratio = math.log(max(c)) - (n - 1) * math.log(N) - N * math.log(rho)
        ratios.append(math.exp(ln_ratio))
    start = (3 * N_max) // 4
    head = max(ratios[:start]) if start else ratios[0]
    ok = max(ratios[start:]) <= head * (1 + 1e-9)
    return max(ratios), ok, ratios


def analyze(A, N_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL) -> SpectralReport:
    """Full spectral report for a vertex matrix with at least one cycle."""
    A = np.asarray(A)
    dec, radii = component_radii(A, tol)
    if not radii:
        raise NoCycleError("graph has no cycle, rho(A) = 0")
    rho = max(p.rho for p in radii.values())
    achieving = [i for i, p in radii.items() if abs(p.rho - rho) <= max(tol, 1e-9) * max(1.0, rho)]
    bc, bc_seq = beta_c(A, N_max, tol)
    try:
        bl, bl_seq = beta_l_empirical(A, N_max)
    except SinkError:
        bl, bl_seq = None, []
    beta_E, _, _ = growth_bound_check(A, N_max, tol)
    return SpectralReport(
        rho=rho, beta_c=bc, beta_l=bl, achieving_components=achieving,
        perron_vectors={i: p.vector for i, p in radii.items()},
        growth_constant=beta_E, n_components=len(dec.components),
        beta_c_sequence=bc_seq, beta_l_sequence=bl_seq,
    )


def analyze_graph(g: DirectedMultigraph, N_max: int = DEFAULT_N_MAX, tol: float = DEFAULT_TOL) -> SpectralReport:
    return analyze(vertex_matrix(g), N_max, tol)
