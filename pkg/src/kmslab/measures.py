"""Finite-depth cylinder measures on the path space and the Ruelle-type operator R.

``R`` acts on a measure by ``(R nu)(Z(e mu)) = nu(Z(mu))`` for words of length at
least one and, on vertex cylinders, as the vertex matrix:
``(R nu)(Z(v)) = sum_u A(v, u) nu(Z(u))``.  Everything here lives at an explicit
finite cylinder depth; asking a measure about deeper cylinders raises
:class:`ResolutionError` instead of refining silently.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError, ResolutionError, SinkError, SubcriticalTemperature
from .graph import DirectedMultigraph, Word, column_sum_sequence, vertex_matrix
from .shift import tail
from .spectral import DEFAULT_N_MAX, spectral_radius

DEFAULT_MARGIN = 1e-9


@dataclass(frozen=True)
class CylinderMeasure:
    """Consistent weight tree: ``weights[w]`` is the mass of Z(w) for ``len(w) <= depth``.

    Missing words have mass zero.
    """

    g: DirectedMultigraph
    depth: int
    weights: dict

    def mass(self, w: Word) -> float:
        if len(w.edges) > self.depth:
            raise ResolutionError(
                f"cylinder of length {len(w.edges)} is deeper than the measure depth {self.depth}")
        return self.weights.get(w, 0.0)

    def vertex_marginal(self) -> np.ndarray:
        return np.array([self.weights.get(Word(v, ()), 0.0) for v in range(self.g.n_vertices)])

    @property
    def total_mass(self) -> float:
        return float(self.vertex_marginal().sum())

    def restrict(self, depth: int) -> "CylinderMeasure":
        if depth > self.depth:
            raise ResolutionError(f"cannot restrict depth {self.depth} up to {depth}")
        return CylinderMeasure(self.g, depth,
                               {w: m for w, m in self.weights.items() if len(w.edges) <= depth})

    def scaled(self, c: float) -> "CylinderMeasure":
        return CylinderMeasure(self.g, self.depth, {w: c * m for w, m in self.weights.items()})

    def __add__(self, other: "CylinderMeasure") -> "CylinderMeasure":
        d = min(self.depth, other.depth)
        out = defaultdict(float)
        for src in (self.restrict(d), other.restrict(d)):
            for w, m in src.weights.items():
                out[w] += m
        return CylinderMeasure(self.g, d, dict(out))

    def consistency_residual(self) -> float:
        """max over words of |mass(w) - sum of masses of its one-edge extensions|."""
        worst = 0.0
        for w in self.g.words_up_to(self.depth - 1) if self.depth > 0 else []:
            kids = sum(self.mass(x) for x in self.g.extensions(w))
            worst = max(worst, abs(kids - self.mass(w)))
        return worst

    def to_json(self) -> dict:
        items = sorted(self.weights.items(), key=lambda kv: (len(kv[0].edges), kv[0]))
        return {"depth": self.depth,
                "weights": [{"word": self.g.word_to_json(w), "mass": m} for w, m in items]}

    @classmethod
    def from_json(cls, g: DirectedMultigraph, obj: dict) -> "CylinderMeasure":
        weights = {}
        for item in obj["weights"]:
            weights[g.word_from_json(item["word"])] = float(item["mass"])
        return cls(g, int(obj["depth"]), weights)


@dataclass(frozen=True)
class FBetaVector:
    """Vertex form of f_beta: ``y_v = sum over paths mu with source v of e^{-beta |mu|}``."""

    y: np.ndarray
    beta: float
    residual: float


def require_surjective(g: DirectedMultigraph) -> None:
    if g.has_sinks():
        raise SinkError(f"graph has sinks {g.sinks()}; the shift is not surjective")


def require_supercritical(A, beta: float, margin: float = DEFAULT_MARGIN) -> float:
    rho = spectral_radius(A)
    bc = math.log(rho) if rho > 0 else -math.inf
    if not beta - bc > margin:
        raise SubcriticalTemperature(f"beta = {beta!r} is not above beta_c = {bc!r} (margin {margin})")
    return bc


def _solve_refined(M: np.ndarray, b: np.ndarray, steps: int = 2) -> tuple[np.ndarray, float]:
    x = np.linalg.solve(M, b)
    for _ in range(steps):
        r = b - M @ x
        x = x + np.linalg.solve(M, r)
    return x, float(np.max(np.abs(b - M @ x)))


def _graph_matrix(g_or_A):
    if isinstance(g_or_A, DirectedMultigraph):
        return vertex_matrix(g_or_A)
    return np.asarray(g_or_A)


def f_beta(g_or_A, beta: float, margin: float = DEFAULT_MARGIN) -> FBetaVector:
    """Solve ``(I - e^{-beta} A^T) y = 1``; requires beta > beta_c."""
    A = _graph_matrix(g_or_A)
    require_supercritical(A, beta, margin)
    n = A.shape[0]
    M = np.eye(n) - math.exp(-beta) * A.T.astype(float)
    y, res = _solve_refined(M, np.ones(n))
    if not np.all(np.isfinite(y)) or np.any(y < 1 - 1e-9):
        raise SubcriticalTemperature("I - e^{-beta} A^T has no positive inverse at this beta")
    return FBetaVector(y, beta, res)


def f_beta_series(A, beta: float, n_terms: int) -> np.ndarray:
    """Truncated series sum_{n <= n_terms} e^{-beta n} (column sums of A^n)."""
    A = np.asarray(A)
    out = np.ones(A.shape[0])
    for N, c in enumerate(column_sum_sequence(A, n_terms), start=1):
        out += np.array([math.exp(math.log(x) - beta * N) if x else 0.0 for x in c])
    return out


def resolvent_vertex(A, eps_vec, beta: float) -> np.ndarray:
    """``(I - e^{-beta} A)^{-1} eps`` at vertex level."""
    A = np.asarray(A, dtype=float)
    M = np.eye(A.shape[0]) - math.exp(-beta) * A
    m, _ = _solve_refined(M, np.asarray(eps_vec, dtype=float))
    return m


# ---- R and the resolvent -------------------------------------------------

def apply_R(nu: CylinderMeasure) -> CylinderMeasure:
    """The measure R nu, one level deeper than nu."""
    g = nu.g
    require_surjective(g)
    out = defaultdict(float)
    for w, m in nu.weights.items():
        if m == 0:
            continue
        # e w is a word exactly when s(e) = r(w)
        for e in g.out_edges[w.vertex]:
            out[Word(g.r[e], (e,) + w.edges)] += m
    A = vertex_matrix(g)
    marg = nu.vertex_marginal()
    for v in range(g.n_vertices):
        val = float(A[v] @ marg)
        if val:
            out[Word(v, ())] = val
    return CylinderMeasure(g, nu.depth + 1, dict(out))


def resolvent_measure(eps: CylinderMeasure, beta: float, depth: int | None = None,
                      margin: float = DEFAULT_MARGIN) -> CylinderMeasure:
    """The measure mu = sum_n e^{-beta n} R^n eps, in closed form on cylinders.

    For a word k of length K,
    ``mu(Z(k)) = sum_{n<=K} e^{-beta n} eps(Z(σ^n k)) + e^{-beta K} [((I - e^{-beta}A)^{-1} - I) eps_vec]_{s(k)}``.
    """
    g = eps.g
    require_surjective(g)
    A = vertex_matrix(g)
    require_supercritical(A, beta, margin)
    depth = eps.depth if depth is None else depth
    if depth > eps.depth:
        raise ResolutionError(f"resolvent depth {depth} exceeds the measure depth {eps.depth}")
    ev = eps.vertex_marginal()
    h = resolvent_vertex(A, ev, beta) - ev
    q = math.exp(-beta)
    weights = {}
    for w in g.words_up_to(depth):
        val = resolvent_mass(g, eps, q, h, w)
        if val:
            weights[w] = val
    return CylinderMeasure(g, depth, weights)


def resolvent_mass(g: DirectedMultigraph, eps: CylinderMeasure, q: float, h: np.ndarray, w: Word) -> float:
    K = len(w.edges)
    val = sum(q ** n * eps.mass(tail(g, w, n)) for n in range(K + 1))
    return val + q ** K * h[g.source(w)]


def series_measure(eps: CylinderMeasure, beta: float, n_terms: int,
                   depth: int | None = None) -> CylinderMeasure:
    """Truncated sum_{n <= n_terms} e^{-beta n} R^n eps, by repeated application of R.

    Each R^n eps is cut back to ``depth`` after every step, which is exact:
    R nu on words of length <= d only reads nu on words of length <= d - 1.
    """
    depth = eps.depth if depth is None else depth
    cur = eps.restrict(depth)
    total = defaultdict(float, cur.weights)
    q = math.exp(-beta)
    for n in range(1, n_terms + 1):
        cur = apply_R(cur).restrict(depth)
        for w, m in cur.weights.items():
            total[w] += q ** n * m
    return CylinderMeasure(eps.g, depth, dict(total))


@dataclass
class SubinvarianceReport:
    passed: bool
    worst_slack: float
    min_recovered: float
    recovered: CylinderMeasure
    slacks: dict


def check_subinvariance(mu: CylinderMeasure, beta: float, tol: float = 1e-9) -> SubinvarianceReport:
    """Check (R mu)(Z(k)) <= e^beta mu(Z(k)) at every resolvable word; recover eps = mu - e^{-beta} R mu."""
    g = mu.g
    Rmu = apply_R(mu)
    q = math.exp(-beta)
    slacks, rec = {}, {}
    for w in g.words_up_to(mu.depth):
        m = mu.mass(w)
        r = Rmu.mass(w)
        slacks[w] = math.exp(beta) * m - r
        e = m - q * r
        if e:
            rec[w] = e
    worst = min(slacks.values(), default=0.0)
    min_rec = min(rec.values(), default=0.0)
    scale = max(1.0, max((abs(x) for x in mu.weights.values()), default=1.0))
    passed = worst >= -tol * math.exp(beta) * scale and min_rec >= -tol * scale
    return SubinvarianceReport(passed, worst, min_rec, CylinderMeasure(g, mu.depth, rec), slacks)


def integrate_f_beta(eps: CylinderMeasure | np.ndarray, beta: float, g: DirectedMultigraph | None = None) -> float:
    """∫ f_beta d eps.  f_beta(z) depends only on r(z), so this is y · eps_vec."""
    if isinstance(eps, CylinderMeasure):
        g, ev = eps.g, eps.vertex_marginal()
    else:
        ev = np.asarray(eps, dtype=float)
    return float(f_beta(g, beta).y @ ev)


def normalize_to_simplex(eps, beta: float, g: DirectedMultigraph | None = None):
    """Scale eps so that ∫ f_beta d eps = 1 (works for measures and vertex vectors)."""
    total = integrate_f_beta(eps, beta, g)
    if total <= 0:
        raise PreconditionError("cannot normalise the zero measure")
    if isinstance(eps, CylinderMeasure):
        return eps.scaled(1.0 / total)
    return np.asarray(eps, dtype=float) / total


# ---- building path-space measures from vertex data -------------------------

SplitRule = Callable[[DirectedMultigraph, Word, Sequence[Word], float], Sequence[float]]


def uniform_split(g: DirectedMultigraph, word: Word, children: Sequence[Word], mass: float) -> list[float]:
    return [mass / len(children)] * len(children)


def skewed_split(g: DirectedMultigraph, word: Word, children: Sequence[Word], mass: float) -> list[float]:
    """Weights proportional to 1, 2, 3, ... in child order."""
    k = len(children)
    tot = k * (k + 1) / 2
    return [mass * (i + 1) / tot for i in range(k)]


def extend_vertex_measure(g: DirectedMultigraph, eps_vec, depth: int,
                          rule: SplitRule = uniform_split) -> CylinderMeasure:
    """Consistent weight tree of the given depth with vertex marginal ``eps_vec``."""
    require_surjective(g)
    eps_vec = np.asarray(eps_vec, dtype=float)
    if np.any(eps_vec < 0):
        raise PreconditionError("vertex masses must be nonnegative")
    weights = {}
    level = []
    for v in range(g.n_vertices):
        if eps_vec[v] == 0:
            continue
        if v not in g.live:
            raise PreconditionError(
                f"vertex {g.vertices[v]!r} carries mass but no infinite path starts there")
        w = Word(v, ())
        weights[w] = float(eps_vec[v])
        level.append(w)
    for _ in range(depth):
        nxt = []
        for w in level:
            kids = g.extensions(w)
            if not kids:
                raise PreconditionError(f"no admissible split below {g.format_word(w)}")
            for kid, m in zip(kids, rule(g, w, kids, weights[w])):
                if m:
                    weights[kid] = float(m)
                    nxt.append(kid)
        level = nxt
    return CylinderMeasure(g, depth, weights)


def simplex_extreme_points(g: DirectedMultigraph, beta: float) -> list[np.ndarray]:
    """Vertex-resolution extreme points e_v / y_v of the normalised simplex (live v only)."""
    y = f_beta(g, beta).y
    out = []
    for v in sorted(g.live):
        p = np.zeros(g.n_vertices)
        p[v] = 1.0 / y[v]
        out.append(p)
    return out


# ---- certified truncation ----------------------------------------------------

@dataclass(frozen=True)
class TailBound:
    """e^{-beta m} max_z |σ^{-m}(z)| <= e^{-delta m} for K <= m <= N_max."""

    delta: float
    K: int
    N_max: int

    def series_tail(self, M: int) -> float:
        """Bound on sum_{m > M} e^{-beta m} max_z |σ^{-m}(z)|, valid for M + 1 >= K."""
        if M + 1 < self.K:
            raise PreconditionError(f"tail bound needs M >= K - 1 = {self.K - 1}")
        return math.exp(-self.delta * (M + 1)) / (1 - math.exp(-self.delta))

    def terms_for(self, tol: float) -> int:
        """Smallest M >= K - 1 with series_tail(M) <= tol."""
        M = max(self.K - 1, 0)
        while self.series_tail(M) > tol:
            M += 1
        return M


def tail_bound(g_or_A, beta: float, N_max: int = DEFAULT_N_MAX,
               margin: float = DEFAULT_MARGIN) -> TailBound:
    """Constants (delta, K) from a scan of exact column sums up to N_max.

    Aims for delta >= (beta - beta_c) / 2; falls back to the smallest K for
    which the rates stay below beta.
    """
    A = _graph_matrix(g_or_A)
    bc = require_supercritical(A, beta, margin)
    from .spectral import _live_columns
    live = _live_columns(A)
    rates = [math.log(max(c[w] for w in live)) / m
             for m, c in enumerate(column_sum_sequence(A, N_max), start=1)]
    target = beta - (beta - bc) / 2
    for cutoff in (target, beta):
        for K in range(1, N_max + 1):
            sup = max(rates[K - 1:])
            if sup <= cutoff and sup < beta:
                return TailBound(beta - sup, K, N_max)
    raise SubcriticalTemperature("no (delta, K) found within N_max")
