"""Finite truncation of the representation (theta, rho) on the sum of L^2(Z, R^n eps).

Level ``n`` (0 <= n <= N) is the space of step functions constant on cylinders
of depth ``D_n = D - N + n`` with inner product from ``R^n eps``.  Its
orthonormal basis is ``e_a = chi_Z(a) / sqrt(w_n(a))`` over live words ``a`` of
length ``D_n`` with ``w_n(a) = (R^n eps)(Z(a)) = eps(Z(σ^n a)) > 0``.

In that basis the creation operator of an edge cylinder is a partial isometry
``e_a -> e_{e a}`` (the weight is preserved because ``σ^{n+1}(e a) = σ^n a``),
so the depth grows by one per level.  Level 0 only needs ``eps`` to depth
``D - N``.

Operators are stored level by level together with the set of input levels on
which the truncation represents them exactly: creation out of the top level
and multiplication by functions finer than the level depth are not
representable there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import ToeplitzElement
from .errors import DimensionCapError, PreconditionError, ResolutionError
from .graph import DirectedMultigraph, Word, vertex_matrix
from .measures import CylinderMeasure, require_supercritical, require_surjective, tail_bound
from .shift import CylinderFunction, is_prefix, tail

DEFAULT_LEVELS = 4
DEFAULT_DEPTH = 6
DEFAULT_DIM_CAP = 20_000


@dataclass
class LevelOp:
    """Gauge-homogeneous operator: ``blocks[n]`` maps level n to level n + degree."""

    degree: int
    blocks: dict
    valid: frozenset

    def __matmul__(self, other: "LevelOp") -> "LevelOp":
        blocks, valid = {}, set()
        for n in other.valid:
            mid = n + other.degree
            inner = other.blocks.get(n)
            if inner is None:
                # exact zero on this level
                valid.add(n)
                continue
            if mid not in self.valid:
                continue
            valid.add(n)
            outer = self.blocks.get(mid)
            if outer is not None:
                blocks[n] = (outer @ inner).tocsr()
        return LevelOp(self.degree + other.degree, blocks, frozenset(valid))

    def __add__(self, other: "LevelOp") -> "LevelOp":
        if self.degree != other.degree:
            raise PreconditionError("cannot add operators of different degree")
        valid = self.valid & other.valid
        blocks = {}
        for n in valid:
            a, b = self.blocks.get(n), other.blocks.get(n)
            if a is None and b is None:
                continue
            blocks[n] = b if a is None else a if b is None else (a + b).tocsr()
        return LevelOp(self.degree, blocks, frozenset(valid))

    def scaled(self, c: float) -> "LevelOp":
        return LevelOp(self.degree, {n: (c * M).tocsr() for n, M in self.blocks.items()}, self.valid)

    def adjoint(self, top: int) -> "LevelOp":
        """Adjoint on levels 0..top."""
        blocks = {n + self.degree: M.T.tocsr() for n, M in self.blocks.items()}
        # exact where the original is exact on the image level, and wherever
        # the adjoint would land below level 0
        valid = {n + self.degree for n in self.valid}
        valid |= {n for n in range(top + 1) if n - self.degree < 0}
        return LevelOp(-self.degree, blocks, frozenset(v for v in valid if 0 <= v <= top))

    def block(self, n: int, ft: "FockTruncation"):
        if n not in self.valid:
            raise ResolutionError(f"operator is not resolved on level {n}")
        M = self.blocks.get(n)
        if M is None:
            out = n + self.degree
            rows = ft.dims[out] if 0 <= out <= ft.N else 0
            return sp.csr_matrix((rows, ft.dims[n]))
        return M


@dataclass
class FockTruncation:
    g: DirectedMultigraph
    eps: CylinderMeasure
    beta: float
    N: int
    D: int
    bases: list
    index: list
    weights: list
    creation: dict = field(default_factory=dict)  # edge -> LevelOp

    @property
    def dims(self) -> list[int]:
        return [len(b) for b in self.bases]

    def depth(self, n: int) -> int:
        return self.D - self.N + n

    # ---- building blocks ---------------------------------------------------------

    def zero_op(self, degree: int = 0) -> LevelOp:
        return LevelOp(degree, {}, frozenset(range(self.N + 1)))

    def rho_word(self, w: Word) -> LevelOp:
        """Multiplication by chi_Z(w) (diagonal)."""
        cache = self.__dict__.setdefault("_rho_cache", {})
        if w not in cache:
            cache[w] = self._rho_word(w)
        return cache[w]

    def _rho_word(self, w: Word) -> LevelOp:
        blocks, valid = {}, set()
        k = len(w.edges)
        for n in range(self.N + 1):
            if k > self.depth(n):
                continue
            valid.add(n)
            d = np.array([1.0 if is_prefix(w, a) else 0.0 for a in self.bases[n]])
            blocks[n] = sp.diags(d, format="csr")
        return LevelOp(0, blocks, frozenset(valid))

    def rho(self, a: CylinderFunction) -> LevelOp:
        out = self.zero_op(0)
        for w, c in a.terms.items():
            out = out + self.rho_word(w).scaled(c)
        return out

    def identity(self) -> LevelOp:
        return LevelOp(0, {n: sp.identity(self.dims[n], format="csr") for n in range(self.N + 1)},
                       frozenset(range(self.N + 1)))

    def theta_word(self, lam: Word) -> LevelOp:
        """theta(chi_Z(lam)) for a word of length >= 1."""
        if not lam.edges:
            raise PreconditionError("theta needs a word of length at least one")
        e = lam.edges[0]
        return self.creation[e] @ self.rho_word(tail(self.g, lam, 1))

    def theta(self, x: CylinderFunction) -> LevelOp:
        out = self.zero_op(1)
        for w, c in x.terms.items():
            if w.edges:
                out = out + self.theta_word(w).scaled(c)
            else:
                for e in self.g.in_edges[w.vertex]:
                    out = out + self.creation[e].scaled(c)
        return out

    def theta_power(self, l: int, mu: Word) -> LevelOp:
        """theta^{⊗l}(chi_Z(mu)) = theta(mu_1) ... theta(mu_{l-1}) theta(chi_Z(mu_l ...))."""
        if len(mu.edges) < l:
            raise PreconditionError("normal form needs len(mu) >= l")
        if l == 0:
            return self.rho_word(mu)
        op = self.theta_word(tail(self.g, mu, l - 1))
        for i in range(l - 2, -1, -1):
            op = self.creation[mu.edges[i]] @ op
        return op

    def element(self, t: ToeplitzElement) -> dict:
        """{degree: LevelOp} for a Toeplitz element."""
        parts: dict = {}
        for term, c in t.terms.items():
            op = self.theta_power(term.l, term.mu) @ self.theta_power(term.m, term.nu).adjoint(self.N)
            op = op.scaled(c)
            d = op.degree
            parts[d] = op if d not in parts else parts[d] + op
        return parts

    # ---- vectors ------------------------------------------------------------------------

    def prefix_labels(self, k: int) -> np.ndarray:
        """Integer label of the length-k prefix of each level-k basis word."""
        ids: dict = {}
        return np.array([ids.setdefault((a.vertex, a.edges[:k]), len(ids)) for a in self.bases[k]])

    def xi(self, k: int, mu: Word) -> np.ndarray:
        """chi_Z(mu) on level k in the orthonormal basis (coordinates sqrt(w))."""
        return np.array([math.sqrt(wt) if is_prefix(mu, a) else 0.0
                         for a, wt in zip(self.bases[k], self.weights[k])])


def _level_weight(eps: CylinderMeasure, g: DirectedMultigraph, a: Word, n: int) -> float:
    return eps.mass(tail(g, a, n))


def build_truncation(g: DirectedMultigraph, eps: CylinderMeasure, beta: float,
                     N: int = DEFAULT_LEVELS, D: int = DEFAULT_DEPTH,
                     dim_cap: int = DEFAULT_DIM_CAP) -> FockTruncation:
    """Bases, weights and creation operators for levels 0..N (level n at depth D - N + n)."""
    require_surjective(g)
    require_supercritical(vertex_matrix(g), beta)
    if N < 0 or D < N:
        raise PreconditionError(f"need 0 <= N <= D (got N={N}, D={D})")
    if eps.depth < D - N:
        raise ResolutionError(f"eps depth {eps.depth} is below the level-0 depth {D - N}")
    bases, index, weights = [], [], []
    for n in range(N + 1):
        words = g.words_of_length(D - N + n, cap=dim_cap * 64)
        keep = [(a, _level_weight(eps, g, a, n)) for a in words]
        keep = [(a, w) for a, w in keep if w > 0]
        if len(keep) > dim_cap:
            raise DimensionCapError(f"level {n} has dimension {len(keep)} > cap {dim_cap}")
        bases.append([a for a, _ in keep])
        weights.append(np.array([w for _, w in keep]))
        index.append({a: i for i, (a, _) in enumerate(keep)})
    ft = FockTruncation(g, eps, beta, N, D, bases, index, weights)
    for e in range(g.n_edges):
        blocks = {}
        for n in range(N):
            rows, cols = [], []
            for j, a in enumerate(bases[n]):
                if g.s[e] == a.vertex:
                    i = index[n + 1].get(Word(g.r[e], (e,) + a.edges))
                    if i is not None:
                        rows.append(i)
                        cols.append(j)
            blocks[n] = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                                      shape=(len(bases[n + 1]), len(bases[n])))
        ft.creation[e] = LevelOp(1, blocks, frozenset(range(N)))
    return ft


# ---- state formula -------------------------------------------------------------------------

@dataclass
class PartitionEvaluation:
    value: float
    tail: float
    per_level: list


def _mass_tail(ft: FockTruncation) -> float:
    """Certified bound on sum_{k > N} e^{-beta k} (R^k eps)(E^infinity)."""
    g, beta = ft.g, ft.beta
    A = vertex_matrix(g).astype(float)
    ev = ft.eps.vertex_marginal()
    tb = tail_bound(A, beta)
    M = max(ft.N, tb.terms_for(1e-16))
    q = math.exp(-beta)
    x = ev.copy()
    total = 0.0
    for k in range(1, M + 1):
        x = A @ x
        if k > ft.N:
            total += q ** k * float(x.sum())
    return total + float(ev.sum()) * tb.series_tail(M)


def state_via_partitions(ft: FockTruncation, t: ToeplitzElement) -> PartitionEvaluation:
    """sum_{k <= N} e^{-beta k} sum_{|mu| = k} (t xi^{k,mu} | xi^{k,mu}) plus its certified tail."""
    parts = ft.element(t)
    q = math.exp(-ft.beta)
    per_level = []
    op = parts.get(0)
    for k in range(ft.N + 1):
        if op is None:
            per_level.append(0.0)
            continue
        # the xi^{k,mu} have disjoint supports (the length-k prefixes), so the
        # sum over mu keeps exactly the entries whose row and column share a prefix
        M = op.block(k, ft).tocoo()
        label = ft.prefix_labels(k)
        root = np.sqrt(ft.weights[k])
        same = label[M.row] == label[M.col]
        s = float(np.sum(root[M.row[same]] * M.data[same] * root[M.col[same]]))
        per_level.append(q ** k * s)
    tail_ = t.norm_bound() * _mass_tail(ft)
    return PartitionEvaluation(float(sum(per_level)), tail_, per_level)


# ---- positivity and relations --------------------------------------------------------------

@dataclass
class PositivityReport:
    min_eigenvalue: float
    level0_residual: float
    higher_residual: float
    per_level_min: list


def _min_eig(M) -> float:
    if M.shape[0] == 0:
        return 0.0
    off = M - sp.diags(M.diagonal())
    if off.count_nonzero() == 0 or abs(off).max() == 0:
        return float(M.diagonal().min())
    return float(np.linalg.eigvalsh(M.toarray()).min())


def partition_sum(ft: FockTruncation, a: CylinderFunction) -> LevelOp:
    """sum_e theta(a·chi_e) theta(chi_e)^*."""
    g = ft.g
    out = ft.zero_op(0)
    for e in range(g.n_edges):
        xe = CylinderFunction.indicator(g, Word(g.r[e], (e,)))
        out = out + ft.theta(a * xe) @ ft.theta(xe).adjoint(ft.N)
    return out


def verify_positivity(ft: FockTruncation, a: CylinderFunction) -> PositivityReport:
    if any(c < 0 for c in a.terms.values()):
        raise PreconditionError("positivity check needs a >= 0")
    ra = ft.rho(a)
    diff = ra + partition_sum(ft, a).scaled(-1.0)
    mins, l0, hi = [], 0.0, 0.0
    for n in range(ft.N + 1):
        M = diff.block(n, ft)
        mins.append(_min_eig(M))
        if n == 0:
            R = M - ra.block(0, ft)
            l0 = float(abs(R).max()) if R.nnz else 0.0
        elif M.nnz:
            hi = max(hi, float(abs(M).max()))
    return PositivityReport(min(mins), l0, hi, mins)


def inner_product(g: DirectedMultigraph, x: CylinderFunction, y: CylinderFunction) -> CylinderFunction:
    """<x, y>(z) = sum_{σ(w) = z} x(w) y(w), computed pointwise on depth d cylinders."""
    d = max(x.depth(), y.depth(), 1)
    out = {}
    for z in g.words_of_length(d - 1):
        val = 0.0
        for e in g.out_edges[z.vertex]:
            w = Word(g.r[e], (e,) + z.edges)
            val += x.value_on(w) * y.value_on(w)
        if val:
            out[z] = val
    return CylinderFunction(g, out)


def op_distance(ft: FockTruncation, P: LevelOp, Q: LevelOp, levels=None) -> float:
    """Max entrywise difference over levels where both are resolved."""
    if P.degree != Q.degree:
        raise PreconditionError("degrees differ")
    levels = (P.valid & Q.valid) if levels is None else set(levels) & P.valid & Q.valid
    worst = 0.0
    for n in levels:
        if not 0 <= n + P.degree <= ft.N:
            continue
        R = P.block(n, ft) - Q.block(n, ft)
        if R.nnz:
            worst = max(worst, float(abs(R).max()))
    return worst


def norm_squared(ft: FockTruncation, op: LevelOp) -> float:
    """Largest squared singular value over resolved levels."""
    best = 0.0
    for n in op.valid:
        M = op.blocks.get(n)
        if M is None or M.shape[0] == 0 or M.shape[1] == 0:
            continue
        best = max(best, float(np.linalg.norm(M.toarray(), 2)) ** 2)
    return best


def creation_norm_constant(g: DirectedMultigraph) -> int:
    """c_1 = max_z |σ^{-1}(z)|, the bound in ||theta(x)||^2 <= c_1 ||x||_inf^2."""
    A = vertex_matrix(g)
    return int(A.sum(axis=0).max())
