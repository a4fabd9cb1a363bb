"""Random words, spanning elements and cylinder functions for property checks."""

from __future__ import annotations

import numpy as np

from .algebra import ToeplitzElement
from .graph import DirectedMultigraph, Word
from .shift import CylinderFunction


def random_word(g: DirectedMultigraph, rng: np.random.Generator, length: int,
                source: int | None = None) -> Word:
    """Uniform-step random live word; with ``source`` fixed, built backwards from it."""
    if source is None:
        live = sorted(g.live)
        w = Word(int(rng.choice(live)), ())
        for _ in range(length):
            kids = g.extensions(w)
            w = kids[int(rng.integers(len(kids)))]
        return w
    edges: list[int] = []
    v = source
    for _ in range(length):
        # r(e) is live whenever s(e) is, so the word stays live
        out = list(g.out_edges[v])
        e = out[int(rng.integers(len(out)))]
        edges.append(e)
        v = g.r[e]
    edges.reverse()
    return Word(v, tuple(edges))


def random_spanning(g: DirectedMultigraph, rng: np.random.Generator, l: int, m: int,
                    max_excess: int = 2, share_tail: float = 0.6, attempts: int = 50) -> ToeplitzElement:
    """A nonzero psi^l(chi_mu) psi^m(chi_nu)^* with tails of length <= max_excess."""
    for _ in range(attempts):
        t = random_word(g, rng, int(rng.integers(max_excess + 1)))
        a = random_word(g, rng, l, source=t.vertex)
        mu = Word(a.vertex, a.edges + t.edges)
        if rng.random() < share_tail:
            b = random_word(g, rng, m, source=t.vertex)
            nu = Word(b.vertex, b.edges + t.edges)
        else:
            nu = random_word(g, rng, m + int(rng.integers(max_excess + 1)))
        el = ToeplitzElement.spanning(g, l, mu, m, nu)
        if el.terms:
            return el
    return ToeplitzElement.spanning(g, l, mu, m, nu)


def random_homogeneous(g: DirectedMultigraph, rng: np.random.Generator, degree: int,
                       n_terms: int = 2, max_degree: int = 2, max_excess: int = 2) -> ToeplitzElement:
    """Sum of spanning elements all of gauge degree ``degree`` with random coefficients."""
    out = ToeplitzElement.zero(g)
    lo = max(0, -degree)
    hi = max(lo, max_degree - max(degree, 0))
    for _ in range(n_terms):
        m = int(rng.integers(lo, hi + 1))
        coeff = float(rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 1.5, 3.0]))
        out = out + coeff * random_spanning(g, rng, m + degree, m, max_excess)
    return out


def random_kms_pair(g: DirectedMultigraph, rng: np.random.Generator, max_degree: int = 2,
                    max_excess: int = 2) -> tuple[ToeplitzElement, ToeplitzElement]:
    """Homogeneous pair (b, c), biased towards deg c = -deg b so that phi(bc) is often nonzero."""
    db = int(rng.integers(-max_degree, max_degree + 1))
    dc = -db if rng.random() < 0.8 else int(rng.integers(-max_degree, max_degree + 1))
    b = random_homogeneous(g, rng, db, max_degree=max_degree, max_excess=max_excess)
    c = random_homogeneous(g, rng, dc, max_degree=max_degree, max_excess=max_excess)
    if dc == -db and rng.random() < 0.5:
        c = c + b.adjoint()
    return b, c


def random_element(g: DirectedMultigraph, rng: np.random.Generator, n_terms: int = 3,
                   max_degree: int = 2, max_excess: int = 2) -> ToeplitzElement:
    """Possibly inhomogeneous sum of spanning elements."""
    out = ToeplitzElement.zero(g)
    for _ in range(n_terms):
        l, m = (int(x) for x in rng.integers(0, max_degree + 1, size=2))
        out = out + float(rng.normal()) * random_spanning(g, rng, l, m, max_excess)
    return out


def random_cylinder_function(g: DirectedMultigraph, rng: np.random.Generator, max_depth: int = 2,
                             n_terms: int = 3) -> CylinderFunction:
    """Nonnegative combination of cylinder indicators."""
    terms: dict = {}
    for _ in range(n_terms):
        w = random_word(g, rng, int(rng.integers(max_depth + 1)))
        terms[w] = terms.get(w, 0.0) + float(rng.uniform(0.1, 2.0))
    return CylinderFunction(g, terms)
