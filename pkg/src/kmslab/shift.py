"""Cylinder-set arithmetic on the one-sided path space of a graph.

A cylinder ``Z(w)`` is the set of infinite paths starting with the word ``w``.
Two cylinders are either nested or disjoint, so every operation here returns
a single cylinder or ``None`` (the empty set).  Empty cylinders (words whose
source vertex carries no infinite path) are normalised to ``None`` eagerly.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .errors import PreconditionError, SinkError
from .graph import DirectedMultigraph, Word, matrix_power_column_sums, vertex_matrix


def is_prefix(short: Word, long: Word) -> bool:
    return (short.vertex == long.vertex and len(short.edges) <= len(long.edges)
            and long.edges[:len(short.edges)] == short.edges)


def merge(a: Word, b: Word) -> Word | None:
    """The word w with Z(w) = Z(a) ∩ Z(b), or None when the cylinders are disjoint."""
    if len(a.edges) > len(b.edges):
        a, b = b, a
    return b if is_prefix(a, b) else None


def tail(g: DirectedMultigraph, w: Word, k: int) -> Word:
    """σ^k applied to the cylinder word: drop the first k edges."""
    if k > len(w.edges):
        raise PreconditionError(f"cannot shift a length-{len(w.edges)} word by {k}")
    if k == 0:
        return w
    if k == len(w.edges):
        return Word(g.s[w.edges[-1]], ())
    rest = w.edges[k:]
    return Word(g.r[rest[0]], rest)


def prefix(w: Word, k: int) -> Word:
    return Word(w.vertex, w.edges[:k])


def concat(g: DirectedMultigraph, a: Word, b: Word) -> Word | None:
    """The word a·b, or None when s(a) != r(b)."""
    if g.source(a) != b.vertex:
        return None
    return Word(a.vertex, a.edges + b.edges)


def intersect(g: DirectedMultigraph, c1: Word, c2: Word) -> Word | None:
    w = merge(c1, c2)
    if w is None or not g.is_live_word(w):
        return None
    return w


def shifted_cylinder_constraint(g: DirectedMultigraph, mu: Word, l: int, lam: Word) -> Word | None:
    """Word for {z in Z(mu) : σ^l(z) in Z(lam)}, or None when that set is empty.

    Requires ``len(mu) >= l``; shorter words must be expanded first.
    """
    if len(mu.edges) < l:
        raise PreconditionError(f"word of length {len(mu.edges)} is shorter than the shift {l}")
    t = merge(tail(g, mu, l), lam)
    if t is None:
        return None
    out = Word(mu.vertex, mu.edges[:l] + t.edges) if l else t
    return out if g.is_live_word(out) else None


def preimage_count(g: DirectedMultigraph, u: int | str, N: int) -> int:
    """|σ^{-N}(z)| for any infinite path z with r(z) = u."""
    if g.has_sinks():
        raise SinkError(f"graph has sinks {g.sinks()}; the shift is not surjective")
    if isinstance(u, str):
        u = g.vertex_index(u)
    if N == 0:
        return 1
    return matrix_power_column_sums(vertex_matrix(g), N)[u]


@dataclass
class CylinderFunction:
    """A nonnegative step function: a formal combination of cylinder indicators."""

    g: DirectedMultigraph
    terms: dict = field(default_factory=dict)

    @classmethod
    def indicator(cls, g: DirectedMultigraph, w: Word, coeff: float = 1.0) -> "CylinderFunction":
        return cls(g, {w: coeff})

    def depth(self) -> int:
        return max((len(w.edges) for w in self.terms), default=0)

    def __add__(self, other: "CylinderFunction") -> "CylinderFunction":
        out = defaultdict(float, self.terms)
        for w, c in other.terms.items():
            out[w] += c
        return CylinderFunction(self.g, {w: c for w, c in out.items() if c != 0})

    def __mul__(self, other: "CylinderFunction") -> "CylinderFunction":
        out = defaultdict(float)
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = intersect(self.g, w1, w2)
                if w is not None:
                    out[w] += c1 * c2
        return CylinderFunction(self.g, {w: c for w, c in out.items() if c != 0})

    def value_on(self, path: Word) -> float:
        """Value at any infinite path extending ``path`` (must be deep enough)."""
        if len(path.edges) < self.depth():
            raise PreconditionError("path prefix shorter than the function depth")
        return sum(c for w, c in self.terms.items() if is_prefix(w, path))

    def canonical(self, depth: int | None = None) -> dict:
        """Values on the live words of one fixed depth (default: own depth)."""
        d = self.depth() if depth is None else depth
        return {w: self.value_on(w) for w in self.g.words_of_length(d)}
