"""The KMS_beta state phi_eps attached to a measure eps, evaluated in closed form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import ToeplitzElement
from .errors import PreconditionError, ResolutionError
from .graph import DirectedMultigraph, Word, column_sum_sequence, vertex_matrix
from .measures import (CylinderMeasure, f_beta, require_supercritical, require_surjective,
                       resolvent_vertex)
from .shift import merge, tail
from .spectral import DEFAULT_N_MAX, component_radii

CP_THRESHOLD = 1e-8


def _exact_resolvent(A: np.ndarray, ev: list, q: Fraction) -> list:
    import sympy
    n = A.shape[0]
    M = sympy.eye(n) - sympy.Rational(q.numerator, q.denominator) * sympy.Matrix(A.tolist())
    b = sympy.Matrix([sympy.Rational(x.numerator, x.denominator) for x in ev])
    sol = M.LUsolve(b)
    return [Fraction(int(x.p), int(x.q)) for x in sol]


class KmsState:
    """phi_eps on the Toeplitz algebra, with mu = sum_n e^{-beta n} R^n eps cached on cylinders.

    ``exp_beta`` switches on exact rational arithmetic: pass e^beta as a
    Fraction (or int) and beta is taken to be its logarithm.
    """

    def __init__(self, g: DirectedMultigraph, beta: float | None, epsilon: CylinderMeasure,
                 normalize: bool = False, exp_beta: Fraction | int | None = None):
        require_surjective(g)
        A = vertex_matrix(g)
        self.exact = exp_beta is not None
        if self.exact:
            exp_beta = Fraction(exp_beta)
            if exp_beta <= 0:
                raise PreconditionError("e^beta must be positive")
            beta = math.log(exp_beta)
        require_supercritical(A, beta)
        self.g = g
        self.beta = float(beta)
        self.A = A
        self.y = f_beta(A, beta).y
        self.normalization_factor = 1.0
        if normalize:
            total = float(self.y @ epsilon.vertex_marginal())
            if total <= 0:
                raise PreconditionError("cannot normalise the zero measure")
            self.normalization_factor = 1.0 / total
            epsilon = epsilon.scaled(self.normalization_factor)
        self.epsilon = epsilon
        ev = epsilon.vertex_marginal()
        if self.exact:
            self.q = 1 / exp_beta
            self._eps_w = {w: Fraction(m) for w, m in epsilon.weights.items()}
            ev_exact = [self._eps_w.get(Word(v, ()), Fraction(0)) for v in range(g.n_vertices)]
            m_exact = _exact_resolvent(A, ev_exact, self.q)
            self._h = [m - e for m, e in zip(m_exact, ev_exact)]
            self.m_vec = np.array([float(x) for x in m_exact])
        else:
            self.q = math.exp(-self.beta)
            self._eps_w = epsilon.weights
            self.m_vec = resolvent_vertex(A, ev, self.beta)
            self._h = self.m_vec - ev
        self._cache: dict = {}

    # ---- the measure mu -------------------------------------------------------

    def _eps_mass(self, w: Word):
        if len(w.edges) > self.epsilon.depth:
            raise ResolutionError(
                f"cylinder of length {len(w.edges)} is deeper than the measure depth {self.epsilon.depth}")
        return self._eps_w.get(w, 0)

    def mu_mass(self, w: Word):
        """mu(Z(w)) in closed form."""
        val = self._cache.get(w)
        if val is None:
            g, q = self.g, self.q
            K = len(w.edges)
            val = sum(q ** n * self._eps_mass(tail(g, w, n)) for n in range(K + 1))
            val = val + q ** K * self._h[g.source(w)]
            self._cache[w] = val
        return val

    def mu_measure(self, depth: int | None = None) -> CylinderMeasure:
        depth = self.epsilon.depth if depth is None else depth
        weights = {w: float(self.mu_mass(w)) for w in self.g.words_up_to(depth)}
        return CylinderMeasure(self.g, depth, {w: m for w, m in weights.items() if m})

    @property
    def total_mass(self) -> float:
        """phi(1) = mu(E^infinity) = y · eps_vec."""
        return float(sum(self.mu_mass(Word(v, ())) for v in range(self.g.n_vertices)))

    # ---- evaluation -------------------------------------------------------------

    def evaluate_term(self, l: int, mu: Word, m: int, nu: Word):
        if l != m:
            return 0
        k = merge(mu, nu)
        if k is None:
            return 0
        return self.q ** m * self.mu_mass(tail(self.g, k, m))

    def evaluate(self, t: ToeplitzElement):
        """phi_eps(t); Fractions in exact mode, floats otherwise."""
        total = 0
        for term, c in t.terms.items():
            if term.l != term.m:
                continue
            if self.exact:
                c = Fraction(c)
            total = total + c * self.evaluate_term(*term)
        return total

    def __call__(self, t: ToeplitzElement) -> float:
        return float(self.evaluate(t))


# ---- KMS condition --------------------------------------------------------------

@dataclass
class KmsCheckReport:
    lhs: float
    rhs: float
    residual: float
    passed: bool
    degree_b: int
    degree_c: int
    vanishing_ok: bool


def kms_check(state: KmsState, b: ToeplitzElement, c: ToeplitzElement, tol: float = 1e-9) -> KmsCheckReport:
    """phi(bc) = e^{-beta deg b} phi(cb), plus phi = 0 on nonzero degrees."""
    db, dc = b.degree(), c.degree()
    lhs = float(state.evaluate(b * c))
    rhs = math.exp(-state.beta * db) * float(state.evaluate(c * b))
    res = abs(lhs - rhs)
    vanish = True
    for x, d in ((b, db), (c, dc)):
        if d != 0 and abs(float(state.evaluate(x))) > tol:
            vanish = False
    return KmsCheckReport(lhs, rhs, res, res <= tol and vanish, db, dc, vanish)


def gram_matrix(state: KmsState, elements: list[ToeplitzElement]) -> np.ndarray:
    """G_ij = phi(b_i^* b_j); positive semidefinite for a state."""
    n = len(elements)
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = float(state.evaluate(elements[i].adjoint() * elements[j]))
    return G


def positivity_min_eig(state: KmsState, elements: list[ToeplitzElement]) -> float:
    return float(np.linalg.eigvalsh(gram_matrix(state, elements)).min())


# ---- Cuntz-Pimsner gap ------------------------------------------------------------

def gap_element(g: DirectedMultigraph, v: int | str) -> ToeplitzElement:
    """P_v - sum_{r(e)=v} S_e S_e^*."""
    if isinstance(v, str):
        v = g.vertex_index(v)
    out = ToeplitzElement.P(g, v)
    for e in g.in_edges[v]:
        Se = ToeplitzElement.S_edge(g, e)
        out = out - Se * Se.adjoint()
    return out


def cp_gap(state: KmsState, v: int | str) -> float:
    return float(state.evaluate(gap_element(state.g, v)))


def cp_gaps(state: KmsState) -> np.ndarray:
    return np.array([cp_gap(state, v) for v in range(state.g.n_vertices)])


def factors_through_cp(state: KmsState, threshold: float = CP_THRESHOLD) -> bool:
    return bool(np.all(np.abs(cp_gaps(state)) <= threshold))


# ---- approach to beta_c ---------------------------------------------------------------

def choose_p_vertex(g: DirectedMultigraph, N_max: int = DEFAULT_N_MAX) -> int:
    """A vertex in a component of maximal Perron root whose column sums dominate rho^N.

    Domination is checked with exact integer column sums against rho^N
    (rho rounded up slightly, so only genuine failures disqualify).
    """
    A = vertex_matrix(g)
    dec, radii = component_radii(A)
    if not radii:
        raise PreconditionError("graph has no cycle")
    rho = max(p.rho for p in radii.values())
    cols = column_sum_sequence(A, N_max)
    candidates = []
    for i, p in radii.items():
        if abs(p.rho - rho) > 1e-9 * max(1.0, rho):
            continue
        candidates.extend(dec.components[i])
    for v in sorted(candidates):
        if all(math.log(c[v]) >= N * math.log(rho) - 1e-9 * N for N, c in enumerate(cols, start=1)):
            return v
    raise PreconditionError(
        f"no vertex has column sums >= rho(A)^N for all N <= {N_max}; candidates {sorted(candidates)}")


@dataclass
class CriticalLimit:
    p_vertex: int
    betas: list[float]
    values: list[float]
    f_values: list[float] = field(default_factory=list)


def critical_limit_sequence(g: DirectedMultigraph, beta_list, p_vertex: int | str | None = None,
                            N_max: int = DEFAULT_N_MAX) -> CriticalLimit:
    """phi_{eps_n}(sum_e S_e S_e^*) for eps_n the point mass at p scaled to the simplex.

    The value equals (f_{beta_n}(p) - 1) / f_{beta_n}(p).
    """
    betas = [float(b) for b in beta_list]
    if any(b2 >= b1 for b1, b2 in zip(betas, betas[1:])):
        raise PreconditionError("beta_list must be strictly decreasing")
    A = vertex_matrix(g)
    for b in betas:
        require_supercritical(A, b)
    if p_vertex is None:
        p = choose_p_vertex(g, N_max)
    else:
        p = g.vertex_index(p_vertex) if isinstance(p_vertex, str) else int(p_vertex)
    values, fvals = [], []
    ones = ToeplitzElement.zero(g)
    for e in range(g.n_edges):
        Se = ToeplitzElement.S_edge(g, e)
        ones = ones + Se * Se.adjoint()
    for b in betas:
        eps = CylinderMeasure(g, 0, {Word(p, ()): 1.0})
        st = KmsState(g, b, eps, normalize=True)
        values.append(float(st.evaluate(ones)))
        fvals.append(float(st.y[p]))
    return CriticalLimit(p, betas, values, fvals)


# ---- restriction to the Toeplitz-Cuntz-Krieger family -------------------------------------

@dataclass
class TckRestriction:
    eps_vec: np.ndarray
    y_dot_eps: float
    normalized: bool
    table: dict  # (lambda, nu) -> phi(S_lambda S_nu^*)
    max_formula_residual: float


def restrict_to_tck(state: KmsState, max_len: int, tol: float = 1e-10) -> TckRestriction:
    """Vertex marginal and the table of phi(S_lambda S_nu^*) over equal-length word pairs."""
    g = state.g
    ev = state.epsilon.vertex_marginal()
    yd = float(state.y @ ev)
    table = {}
    worst = 0.0
    for k in range(max_len + 1):
        words = g.words_of_length(k)
        for lam in words:
            S_lam = ToeplitzElement.S(g, lam)
            for nu in words:
                val = float(state.evaluate(S_lam * ToeplitzElement.S(g, nu).adjoint()))
                table[(lam, nu)] = val
                expect = math.exp(-state.beta * k) * state.m_vec[g.source(lam)] if lam == nu else 0.0
                worst = max(worst, abs(val - expect))
    return TckRestriction(ev, yd, abs(yd - 1) <= tol, table, worst)


def tables_agree(a: TckRestriction, b: TckRestriction, tol: float = 1e-12) -> bool:
    keys = set(a.table) | set(b.table)
    return all(abs(a.table.get(k, 0.0) - b.table.get(k, 0.0)) <= tol for k in keys)
