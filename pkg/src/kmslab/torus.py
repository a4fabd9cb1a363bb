"""Covering maps z -> z^A of the d-torus and the states psi_{beta, nu} on monomials.

With ``B = A^T``, ``N = |det A|`` and ``q = N e^{-beta}``, the state attached to
a probability measure nu (given by Fourier coefficients) is

    phi(u_m v^k v^{*l} u_n^*) = δ_{kl} sum_{j >= k, m-n in B^j Z^d}
                                 e^{-beta j} N^{j-k} (1 - q) nu^(B^{-j}(m - n)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from .algebra import ToeplitzElement
from .errors import PreconditionError, SubcriticalTemperature
from .graph import full_shift


def _int_matrix(A) -> tuple[tuple[int, ...], ...]:
    rows = [[int(x) for x in row] for row in np.atleast_2d(np.asarray(A, dtype=object))]
    if any(len(r) != len(rows) for r in rows):
        raise PreconditionError("matrix must be square")
    return tuple(tuple(r) for r in rows)


def _matmul(X, Y):
    n = len(X)
    return tuple(tuple(sum(X[i][k] * Y[k][j] for k in range(n)) for j in range(n)) for i in range(n))


def int_matrix_power(B, j: int):
    n = len(B)
    out = tuple(tuple(int(i == k) for k in range(n)) for i in range(n))
    for _ in range(j):
        out = _matmul(B, out)
    return out


@dataclass(frozen=True)
class TorusSystem:
    A: tuple

    def __init__(self, A):
        object.__setattr__(self, "A", _int_matrix(A))
        if self.N <= 1:
            raise PreconditionError(f"|det A| = {self.N} must exceed 1 for a covering map")

    @property
    def d(self) -> int:
        return len(self.A)

    @property
    def B(self):
        return tuple(zip(*self.A))

    @property
    def N(self) -> int:
        return abs(int(sympy.Matrix(self.A).det()))

    @property
    def beta_c(self) -> float:
        return math.log(self.N)

    def preimage_count(self, n: int) -> int:
        """|σ_A^{-n}(z)| = N^n for every z."""
        return self.N ** n


@dataclass(frozen=True)
class MonomialElement:
    """u_m v^k v^{*l} u_n^*."""

    m: tuple
    k: int
    l: int
    n: tuple

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise PreconditionError("k and l must be nonnegative")
        if len(self.m) != len(self.n):
            raise PreconditionError("m and n must have the same dimension")


def _require(sys: TorusSystem, beta: float) -> float:
    q = sys.N * math.exp(-beta)
    if not beta > sys.beta_c or q >= 1:
        raise SubcriticalTemperature(f"beta = {beta!r} is not above ln N = {sys.beta_c!r}")
    return q


def f_beta_const(sys: TorusSystem, beta: float) -> float:
    """f_beta is the constant 1 / (1 - N e^{-beta})."""
    q = _require(sys, beta)
    return 1.0 / (1.0 - q)


def lattice_membership(B, j: int, r) -> tuple[bool, tuple | None]:
    """Exact test of r in B^j Z^d; returns (True, B^{-j} r) for members.

    B^j is nonsingular, so the rational solution is unique and r is a member
    exactly when that solution is integral.
    """
    if j < 0:
        raise PreconditionError("j must be nonnegative")
    B = _int_matrix(B)
    r = [int(x) for x in r]
    M = sympy.Matrix(int_matrix_power(B, j))
    if M.det() == 0:
        raise PreconditionError("B must be nonsingular")
    x = M.LUsolve(sympy.Matrix(r))
    if all(v.is_integer for v in x):
        return True, tuple(int(v) for v in x)
    return False, None


def _fourier(nu_hat: dict | None, x: tuple) -> complex:
    """Fourier coefficient of nu at x; ``None`` is Haar measure."""
    if nu_hat is None:
        return 1.0 if not any(x) else 0.0
    return nu_hat.get(tuple(x), 0.0)


@dataclass
class MonomialValue:
    value: complex
    tail: float
    terms: int


def evaluate_monomial(sys: TorusSystem, beta: float, el: MonomialElement, nu_hat: dict | None = None,
                      tol: float = 1e-15) -> MonomialValue:
    """phi(el) as a partial sum with a certified bound on the omitted terms.

    ``nu_hat`` maps integer vectors to Fourier coefficients of nu; the default
    is Haar measure.  Term j is bounded by N^{-k} (1 - q) q^j max|nu^|.
    """
    q = _require(sys, beta)
    if el.k != el.l:
        return MonomialValue(0.0, 0.0, 0)
    if len(el.m) != sys.d:
        raise PreconditionError("monomial dimension does not match the system")
    k = el.k
    r = tuple(a - b for a, b in zip(el.m, el.n))
    J = k
    while series_tail(sys, beta, k, J, nu_hat) > tol:
        J += 1
    total = 0.0
    for j in range(k, J + 1):
        member, pre = lattice_membership(sys.B, j, r)
        if not member:
            # B^{j+1} Z^d is a sublattice of B^j Z^d
            break
        total += math.exp(-beta * j) * sys.N ** (j - k) * (1 - q) * _fourier(nu_hat, pre)
    return MonomialValue(total, series_tail(sys, beta, k, J, nu_hat), J - k + 1)


def series_tail(sys: TorusSystem, beta: float, k: int, j_max: int, nu_hat: dict | None = None) -> float:
    """Bound on the terms j > j_max omitted by a partial sum: N^{-k} max|nu^| q^{j_max + 1}."""
    q = _require(sys, beta)
    vmax = 1.0 if nu_hat is None else max((abs(c) for c in nu_hat.values()), default=0.0)
    return sys.N ** (-k) * vmax * q ** (j_max + 1)


def monomial_series(sys: TorusSystem, beta: float, el: MonomialElement, nu_hat: dict | None = None,
                    j_max: int = 60) -> complex:
    """Direct summation to j_max with membership tested through the adjugate."""
    if el.k != el.l:
        return 0.0
    q = _require(sys, beta)
    k = el.k
    r = sympy.Matrix([a - b for a, b in zip(el.m, el.n)])
    total = 0.0
    for j in range(k, j_max + 1):
        M = sympy.Matrix(int_matrix_power(sys.B, j))
        det = int(M.det())
        num = M.adjugate() * r
        if any(int(x) % det for x in num):
            continue
        pre = tuple(int(x) // det for x in num)
        total += math.exp(-beta * j) * sys.N ** (j - k) * (1 - q) * _fourier(nu_hat, pre)
    return total


def graph_counterpart(sys: TorusSystem, k: int) -> ToeplitzElement:
    """For d = 1: u_0 v^k v^{*k} u_0^* as N^{-k} sum_{|λ|=k} S_λ S_λ^* on the N-loop graph."""
    if sys.d != 1:
        raise PreconditionError("graph counterpart is only available for d = 1")
    g = full_shift(sys.N)
    out = ToeplitzElement.zero(g)
    for lam in g.words_of_length(k):
        S = ToeplitzElement.S(g, lam)
        out = out + S * S.adjoint()
    return (sys.N ** (-k)) * out
