"""Normal-form *-algebra spanned by psi^l(chi_Z(mu)) psi^m(chi_Z(nu))^*.

A term ``(l, mu, m, nu)`` stands for ``psi^{⊗l}(chi_{Z(mu)}) psi^{⊗m}(chi_{Z(nu)})^*``
where the indicator of ``Z(mu)`` is read as an element of the l-fold tensor
power (functions on the path space, paired through ``σ^l``).  Terms are kept
with ``len(mu) >= l`` and ``len(nu) >= m`` and in *shared-tail* form: after the
first ``l`` (resp. ``m``) edges both words continue with the same word ``t``,
since ``psi^l(x·a) psi^m(y)^* = psi^l(x) pi(a) psi^m(y)^*`` lets a cylinder
constraint move freely between the two legs.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, NamedTuple

from .errors import PreconditionError
from .graph import DirectedMultigraph, Word
from .shift import is_prefix, merge, prefix, shifted_cylinder_constraint, tail


class Term(NamedTuple):
    l: int
    mu: Word
    m: int
    nu: Word


def canonical(g: DirectedMultigraph, l: int, mu: Word, m: int, nu: Word) -> Term | None:
    """Shared-tail form of a term, or None if it vanishes."""
    t = merge(tail(g, mu, l), tail(g, nu, m))
    if t is None or not g.is_live_word(t):
        return None
    a = prefix(mu, l)
    b = prefix(nu, m)
    if g.source(a) != t.vertex or g.source(b) != t.vertex:
        return None
    return Term(l, Word(a.vertex, a.edges + t.edges), m, Word(b.vertex, b.edges + t.edges))


def _expand(g: DirectedMultigraph, w: Word, k: int) -> list[Word]:
    """Live extensions of w to length at least k (w itself if long enough)."""
    level = [w]
    while level and len(level[0].edges) < k:
        level = [x for u in level for x in g.extensions(u)]
    return level


def _multiply_terms(g: DirectedMultigraph, b: Term, c: Term) -> Term | None:
    if b.m > c.l:
        # (bc)^* = c^* b^*, and there the middle degrees are ordered
        out = _multiply_terms(g, Term(c.m, c.nu, c.l, c.mu), Term(b.m, b.nu, b.l, b.mu))
        return None if out is None else Term(out.m, out.nu, out.l, out.mu)
    l, mu, m, nu = b
    n, lam, p, tau = c
    # psi^m(chi_nu)^* psi^m(chi_lam[:m]) = pi(<chi_nu, chi_lam[:m]>) = pi(chi_{σ^m nu}) when nested
    if not is_prefix(prefix(lam, m), nu):
        return None
    rho = merge(tail(g, nu, m), tail(g, lam, m))
    if rho is None:
        return None
    left = shifted_cylinder_constraint(g, mu, l, rho)
    if left is None:
        return None
    return canonical(g, l + n - m, left, p, tau)


class ToeplitzElement:
    """Finite real (or rational) combination of normal-form terms."""

    __slots__ = ("g", "terms")

    def __init__(self, g: DirectedMultigraph, terms: dict | None = None):
        self.g = g
        self.terms = {t: c for t, c in (terms or {}).items() if c != 0}

    # ---- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, g: DirectedMultigraph) -> "ToeplitzElement":
        return cls(g)

    @classmethod
    def spanning(cls, g: DirectedMultigraph, l: int, mu: Word | None, m: int, nu: Word | None,
                 coeff=1.0) -> "ToeplitzElement":
        """psi^l(chi_Z(mu)) psi^m(chi_Z(nu))^*; ``None`` stands for the constant function 1.

        Words shorter than their degree are expanded over their extensions.
        """
        if l < 0 or m < 0:
            raise PreconditionError("degrees must be nonnegative")
        ones = [Word(v, ()) for v in sorted(g.live)]
        mus = ones if mu is None else [mu]
        nus = ones if nu is None else [nu]
        out = defaultdict(float)
        for a in mus:
            for x in _expand(g, a, l):
                for b in nus:
                    for y in _expand(g, b, m):
                        t = canonical(g, l, x, m, y)
                        if t is not None:
                            out[t] += coeff
        return cls(g, dict(out))

    @classmethod
    def unit(cls, g: DirectedMultigraph) -> "ToeplitzElement":
        return cls.spanning(g, 0, None, 0, None)

    @classmethod
    def pi(cls, g: DirectedMultigraph, w: Word) -> "ToeplitzElement":
        """pi(chi_Z(w)); for a vertex word this is the projection P_v."""
        return cls.spanning(g, 0, w, 0, w)

    @classmethod
    def S(cls, g: DirectedMultigraph, w: Word) -> "ToeplitzElement":
        """S_w = psi^{|w|}(chi_Z(w)) (the product of the S_e along w); S_v = P_v."""
        return cls.spanning(g, len(w.edges), w, 0, None)

    @classmethod
    def S_edge(cls, g: DirectedMultigraph, e: int | str) -> "ToeplitzElement":
        if isinstance(e, str):
            e = g.edge_index(e)
        return cls.S(g, Word(g.r[e], (e,)))

    @classmethod
    def P(cls, g: DirectedMultigraph, v: int | str) -> "ToeplitzElement":
        return cls.pi(g, g.vertex_word(v))

    # ---- algebra -----------------------------------------------------------

    def __add__(self, other: "ToeplitzElement") -> "ToeplitzElement":
        out = dict(self.terms)
        for t, c in other.terms.items():
            out[t] = out.get(t, 0) + c
        return ToeplitzElement(self.g, out)

    def __neg__(self) -> "ToeplitzElement":
        return ToeplitzElement(self.g, {t: -c for t, c in self.terms.items()})

    def __sub__(self, other: "ToeplitzElement") -> "ToeplitzElement":
        return self + (-other)

    def __rmul__(self, s) -> "ToeplitzElement":
        return ToeplitzElement(self.g, {t: s * c for t, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, ToeplitzElement):
            return other * self
        out = defaultdict(float)
        for tb, cb in self.terms.items():
            for tc, cc in other.terms.items():
                t = _multiply_terms(self.g, tb, tc)
                if t is not None:
                    out[t] += cb * cc
        return ToeplitzElement(self.g, dict(out))

    def adjoint(self) -> "ToeplitzElement":
        return ToeplitzElement(self.g, {Term(t.m, t.nu, t.l, t.mu): c for t, c in self.terms.items()})

    @property
    def star(self) -> "ToeplitzElement":
        return self.adjoint()

    # ---- inspection --------------------------------------------------------

    def degrees(self) -> set[int]:
        return {t.l - t.m for t in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def degree(self) -> int:
        """Gauge degree l - m of a homogeneous element (0 for the zero element)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise PreconditionError(f"element is not gauge-homogeneous (degrees {sorted(ds)})")
        return ds.pop() if ds else 0

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.refined().values())

    def norm_bound(self) -> float:
        """Sum of |coefficients|; each spanning term has norm at most one."""
        return float(sum(abs(c) for c in self.terms.values()))

    def max_word_length(self) -> int:
        return max((max(len(t.mu.edges), len(t.nu.edges)) for t in self.terms), default=0)

    def refined(self, tail_length: int | None = None) -> dict:
        """Coefficients after extending every shared tail to a common length.

        Two elements are equal exactly when their refinements agree, so this
        is the comparison form.
        """
        g = self.g

        def tail_len(t: Term) -> int:
            return len(t.mu.edges) - t.l

        k = max((tail_len(t) for t in self.terms), default=0) if tail_length is None else tail_length
        out = defaultdict(float)
        for t, c in self.terms.items():
            tl = tail(g, t.mu, t.l)
            for x in _expand(g, tl, k):
                extra = x.edges[len(tl.edges):]
                out[Term(t.l, Word(t.mu.vertex, t.mu.edges + extra),
                         t.m, Word(t.nu.vertex, t.nu.edges + extra))] += c
        return {t: c for t, c in out.items() if c != 0}

    def close_to(self, other: "ToeplitzElement", tol: float = 1e-12) -> bool:
        k = max(self.max_word_length(), other.max_word_length())
        a, b = self.refined(k), other.refined(k)
        return all(abs(a.get(t, 0) - b.get(t, 0)) <= tol for t in set(a) | set(b))

    # ---- serialization -----------------------------------------------------

    def to_json(self) -> list:
        g = self.g
        rows = [{"coeff": float(c), "l": t.l, "mu": g.word_to_json(t.mu),
                 "m": t.m, "nu": g.word_to_json(t.nu)}
                for t, c in self.terms.items()]
        return sorted(rows, key=lambda r: repr((r["l"], r["mu"], r["m"], r["nu"])))

    @classmethod
    def from_json(cls, g: DirectedMultigraph, rows: Iterable[dict]) -> "ToeplitzElement":
        out = cls.zero(g)
        for row in rows:
            mu = None if row.get("mu") is None else g.word_from_json(row["mu"])
            nu = None if row.get("nu") is None else g.word_from_json(row["nu"])
            out = out + cls.spanning(g, int(row["l"]), mu, int(row["m"]), nu,
                                     float(row.get("coeff", 1.0)))
        return out

    def __repr__(self) -> str:
        g = self.g
        parts = [f"{c:+g}·ψ^{t.l}({g.format_word(t.mu)})ψ^{t.m}({g.format_word(t.nu)})*"
                 for t, c in self.terms.items()]
        return "ToeplitzElement(" + (" ".join(parts) or "0") + ")"
