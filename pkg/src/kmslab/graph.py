"""Finite directed multigraphs, path words, vertex matrices and components.

Conventions follow the Raeburn path convention: an edge ``e`` has a range
``r(e)`` and a source ``s(e)``, and a path ``e1 e2 ... ek`` is composable when
``s(e_i) == r(e_{i+1})``.  The vertex matrix is ``A[v, w] = |v E^1 w|``, the
number of edges with range ``v`` and source ``w``, so column sums of ``A^N``
count the preimages of a point under ``N`` iterations of the shift.

A *sink* is a vertex that is the source of no edge (the shift is not
surjective on paths ending there); a *source* is a vertex that is the range of
no edge.  A vertex is *live* when some infinite path starts there, i.e. when
the cylinder ``Z(v)`` is nonempty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import networkx as nx
import numpy as np

from .errors import EnumerationCapError, GraphFormatError

DEFAULT_PATH_CAP = 200_000


class Edge(NamedTuple):
    id: str
    range: str
    source: str


class Word(NamedTuple):
    """A finite path, stored by indices.

    ``vertex`` is the range of the word (for a length-0 word it is the word
    itself) and ``edges`` holds edge indices in path order.
    """

    vertex: int
    edges: tuple[int, ...]

    def __len__(self) -> int:  # type: ignore[override]
        return len(self.edges)


@dataclass(frozen=True)
class DirectedMultigraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    _vidx: dict = field(init=False, repr=False, compare=False)
    _eidx: dict = field(init=False, repr=False, compare=False)
    r: tuple[int, ...] = field(init=False, repr=False, compare=False)
    s: tuple[int, ...] = field(init=False, repr=False, compare=False)
    in_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    out_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    live: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.vertices:
            raise GraphFormatError("a graph needs at least one vertex")
        vidx = {}
        for i, v in enumerate(self.vertices):
            if v in vidx:
                raise GraphFormatError(f"duplicate vertex id {v!r}")
            vidx[v] = i
        eidx = {}
        r, s = [], []
        for i, e in enumerate(self.edges):
            if e.id in eidx:
                raise GraphFormatError(f"duplicate edge id {e.id!r}")
            for end in (e.range, e.source):
                if end not in vidx:
                    raise GraphFormatError(f"edge {e.id!r} references unknown vertex {end!r}")
            eidx[e.id] = i
            r.append(vidx[e.range])
            s.append(vidx[e.source])
        n = len(self.vertices)
        ins = [[] for _ in range(n)]
        outs = [[] for _ in range(n)]
        for i in range(len(self.edges)):
            ins[r[i]].append(i)
            outs[s[i]].append(i)
        set_ = object.__setattr__
        set_(self, "_vidx", vidx)
        set_(self, "_eidx", eidx)
        set_(self, "r", tuple(r))
        set_(self, "s", tuple(s))
        set_(self, "in_edges", tuple(tuple(x) for x in ins))
        set_(self, "out_edges", tuple(tuple(x) for x in outs))
        set_(self, "live", _live_vertices(n, r, s))

    # ---- lookups -------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex_index(self, vid: str) -> int:
        try:
            return self._vidx[vid]
        except KeyError:
            raise GraphFormatError(f"unknown vertex {vid!r}") from None

    def edge_index(self, eid: str) -> int:
        try:
            return self._eidx[eid]
        except KeyError:
            raise GraphFormatError(f"unknown edge {eid!r}") from None

    def sinks(self) -> list[str]:
        return [self.vertices[v] for v in range(self.n_vertices) if not self.out_edges[v]]

    def sources(self) -> list[str]:
        return [self.vertices[v] for v in range(self.n_vertices) if not self.in_edges[v]]

    def has_sinks(self) -> bool:
        return any(not out for out in self.out_edges)

    # ---- words -----------------------------------------------------------

    def vertex_word(self, v: int | str) -> Word:
        if isinstance(v, str):
            v = self.vertex_index(v)
        return Word(v, ())

    def word(self, *edge_ids: str) -> Word:
        """Word from edge ids; raises if the edges are not composable."""
        if not edge_ids:
            raise GraphFormatError("use vertex_word for length-0 words")
        idx = tuple(self.edge_index(e) for e in edge_ids)
        return self.word_from_indices(idx)

    def word_from_indices(self, idx: Sequence[int]) -> Word:
        idx = tuple(idx)
        for a, b in zip(idx, idx[1:]):
            if self.s[a] != self.r[b]:
                raise GraphFormatError(
                    f"edges {self.edges[a].id!r}, {self.edges[b].id!r} are not composable"
                )
        return Word(self.r[idx[0]], idx)

    def source(self, w: Word) -> int:
        return self.s[w.edges[-1]] if w.edges else w.vertex

    def word_ids(self, w: Word) -> list[str]:
        return [self.edges[e].id for e in w.edges]

    def word_to_json(self, w: Word):
        if not w.edges:
            return {"vertex": self.vertices[w.vertex]}
        return self.word_ids(w)

    def word_from_json(self, obj) -> Word:
        if isinstance(obj, dict):
            return self.vertex_word(str(obj["vertex"]))
        if not obj:
            raise GraphFormatError("empty edge array; use {'vertex': id}")
        return self.word(*[str(e) for e in obj])

    def format_word(self, w: Word) -> str:
        return " ".join(self.word_ids(w)) if w.edges else self.vertices[w.vertex]

    def is_live_word(self, w: Word) -> bool:
        """True when the cylinder Z(w) is nonempty."""
        return self.source(w) in self.live

    def extensions(self, w: Word, live_only: bool = True) -> list[Word]:
        """One-edge extensions w e; their cylinders partition Z(w)."""
        out = []
        for e in self.in_edges[self.source(w)]:
            if live_only and self.s[e] not in self.live:
                continue
            out.append(Word(w.vertex, w.edges + (e,)))
        return out

    def words_of_length(self, n: int, live_only: bool = True,
                        cap: int = DEFAULT_PATH_CAP) -> list[Word]:
        """All words of length n (live ones by default), in lexicographic order."""
        level = [Word(v, ()) for v in range(self.n_vertices)
                 if not live_only or v in self.live]
        for _ in range(n):
            level = [x for w in level for x in self.extensions(w, live_only)]
            if len(level) > cap:
                raise EnumerationCapError(f"more than {cap} words of length {n}")
        return level

    def words_up_to(self, n: int, live_only: bool = True,
                    cap: int = DEFAULT_PATH_CAP) -> list[Word]:
        out = []
        level = [Word(v, ()) for v in range(self.n_vertices)
                 if not live_only or v in self.live]
        out.extend(level)
        for _ in range(n):
            level = [x for w in level for x in self.extensions(w, live_only)]
            out.extend(level)
            if len(out) > cap:
                raise EnumerationCapError(f"more than {cap} words of length <= {n}")
        return out

    # ---- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "range": e.range, "source": e.source} for e in self.edges],
        }

    @classmethod
    def from_json(cls, obj) -> "DirectedMultigraph":
        if isinstance(obj, (str, bytes)):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict) or "edges" not in obj:
            raise GraphFormatError("graph JSON needs an 'edges' array")
        try:
            edges = []
            for i, e in enumerate(obj["edges"]):
                edges.append(Edge(str(e.get("id", f"e{i}")), str(e["range"]), str(e["source"])))
        except (KeyError, TypeError, AttributeError):
            raise GraphFormatError("each edge needs 'range' and 'source' fields") from None
        vertices = obj.get("vertices")
        if vertices is None:
            vertices = _vertices_in_order(edges)
        return cls(tuple(str(v) for v in vertices), tuple(edges))


def _vertices_in_order(edges: Iterable[Edge]) -> list[str]:
    seen: dict[str, None] = {}
    for e in edges:
        seen.setdefault(e.range)
        seen.setdefault(e.source)
    return list(seen)


def _live_vertices(n: int, r: Sequence[int], s: Sequence[int]) -> frozenset:
    # greatest set L with: v in L  =>  some edge e has r(e) = v and s(e) in L
    alive = set(range(n))
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if not any(r[e] == v and s[e] in alive for e in range(len(r))):
                alive.discard(v)
                changed = True
    return frozenset(alive)


def build_graph(edge_list, vertices: Sequence[str] | None = None) -> DirectedMultigraph:
    """Build a graph from ``(range, source)`` or ``(id, range, source)`` tuples.

    Edge ids default to ``e0, e1, ...``; vertices default to first appearance.
    """
    edges = []
    for i, item in enumerate(edge_list):
        if len(item) == 2:
            edges.append(Edge(f"e{i}", str(item[0]), str(item[1])))
        elif len(item) == 3:
            edges.append(Edge(str(item[0]), str(item[1]), str(item[2])))
        else:
            raise GraphFormatError(f"edge entry {item!r} is not (range, source) or (id, range, source)")
    if vertices is None:
        vertices = _vertices_in_order(edges)
    return DirectedMultigraph(tuple(str(v) for v in vertices), tuple(edges))


# ---- vertex matrix and exact powers ---------------------------------------

def vertex_matrix(g: DirectedMultigraph) -> np.ndarray:
    A = np.zeros((g.n_vertices, g.n_vertices), dtype=np.int64)
    for e in range(g.n_edges):
        A[g.r[e], g.s[e]] += 1
    return A


def _as_int_rows(A) -> list[list[int]]:
    return [[int(x) for x in row] for row in np.asarray(A)]


def column_sum_sequence(A, N_max: int) -> list[list[int]]:
    """Exact column sums of A^N for N = 1..N_max, as Python integers.

    Entry ``[N-1][w]`` is ``sum_v A^N(v, w)``.
    """
    rows = _as_int_rows(A)
    n = len(rows)
    c = [1] * n
    out = []
    for _ in range(N_max):
        c = [sum(c[v] * rows[v][w] for v in range(n)) for w in range(n)]
        out.append(c)
    return out


def matrix_power_column_sums(A, N: int) -> list[int]:
    """Exact column sums ``w -> sum_v A^N(v, w)`` (arbitrary-precision ints)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return column_sum_sequence(A, N)[-1]


def exact_matrix_power(A, N: int) -> list[list[int]]:
    rows = _as_int_rows(A)
    n = len(rows)
    P = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(N):
        P = [[sum(P[i][k] * rows[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return P


# ---- components ------------------------------------------------------------

@dataclass(frozen=True)
class ComponentDecomposition:
    components: tuple[tuple[int, ...], ...]
    nontrivial: tuple[bool, ...]
    order: tuple[int, ...]

    def component_of(self, v: int) -> int:
        for i, comp in enumerate(self.components):
            if v in comp:
                return i
        raise KeyError(v)

    def reorder(self, A) -> np.ndarray:
        A = np.asarray(A)
        idx = np.array(self.order)
        return A[np.ix_(idx, idx)]

    def block(self, A, i: int) -> np.ndarray:
        idx = np.array(self.components[i])
        return np.asarray(A)[np.ix_(idx, idx)]


def scc_decompose(g: DirectedMultigraph) -> ComponentDecomposition:
    """Strongly connected components ordered so the vertex matrix is block upper-triangular.

    Components are listed ranges-first: an edge from component C' to component
    C (source in C', range in C) puts C before C'.  Ties are broken by the
    smallest input index, so the order is deterministic.
    """
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n_vertices))
    # range -> source direction, so a topological order lists ranges first
    G.add_edges_from((g.r[e], g.s[e]) for e in range(g.n_edges))
    C = nx.condensation(G)
    members = {c: tuple(sorted(C.nodes[c]["members"])) for c in C.nodes}
    topo = list(nx.lexicographical_topological_sort(C, key=lambda c: members[c][0]))
    comps = tuple(members[c] for c in topo)
    loops = {g.r[e] for e in range(g.n_edges) if g.r[e] == g.s[e]}
    nontrivial = tuple(len(c) > 1 or c[0] in loops for c in comps)
    order = tuple(v for c in comps for v in c)
    return ComponentDecomposition(comps, nontrivial, order)


def is_hereditary(g: DirectedMultigraph, H: Iterable[int]) -> bool:
    """H is hereditary when v in H and v E* w nonempty imply w in H."""
    H = set(H)
    return all(g.s[e] in H for e in range(g.n_edges) if g.r[e] in H)


def reachable_sources(g: DirectedMultigraph, v: int) -> set[int]:
    """All w with v E* w nonempty (v <= w), including v itself."""
    seen = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        for e in g.in_edges[u]:
            w = g.s[e]
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# ---- path enumeration --------------------------------------------------------

def enumerate_paths(g: DirectedMultigraph, v: int | str, n: int,
                    cap: int = DEFAULT_PATH_CAP) -> list[Word]:
    """All paths of length n with source v (their count is sum_u A^n(u, v)).

    Brute force; used as the oracle for matrix-power column sums.
    """
    if isinstance(v, str):
        v = g.vertex_index(v)
    if n < 0:
        raise ValueError("n must be >= 0")
    partial: list[tuple[int, ...]] = [()]
    heads = [v]
    for _ in range(n):
        nxt, nheads = [], []
        for p, h in zip(partial, heads):
            for e in g.out_edges[h]:
                nxt.append((e,) + p)
                nheads.append(g.r[e])
        if len(nxt) > cap:
            raise EnumerationCapError(f"more than {cap} paths of length {n} from {g.vertices[v]!r}")
        partial, heads = nxt, nheads
    return [Word(h, p) for p, h in zip(partial, heads)]


# ---- bundled graphs ----------------------------------------------------------

def dumbbell(m: int = 2, n: int = 3) -> DirectedMultigraph:
    """m loops at v, n loops at w, and one edge with source w and range v."""
    edges = [(f"a{i}", "v", "v") for i in range(m)]
    edges += [(f"b{i}", "w", "w") for i in range(n)]
    edges.append(("c", "v", "w"))
    return build_graph(edges, vertices=["v", "w"])


def single_loop() -> DirectedMultigraph:
    return build_graph([("e", "v", "v")], vertices=["v"])


def full_shift(N: int) -> DirectedMultigraph:
    """One vertex with N loops."""
    return build_graph([(f"x{i}", "v", "v") for i in range(N)], vertices=["v"])


def cycle_graph(k: int) -> DirectedMultigraph:
    """Vertices u0..u{k-1}, one edge with source u_i and range u_{i+1 mod k}."""
    vs = [f"u{i}" for i in range(k)]
    return build_graph([(f"c{i}", vs[(i + 1) % k], vs[i]) for i in range(k)], vertices=vs)


BUNDLED = {
    "dumbbell": dumbbell,
    "single_loop": single_loop,
    "full_shift": full_shift,
    "cycle": cycle_graph,
}


def random_graph(rng: np.random.Generator, n_vertices: int, max_edges: int = 12,
                 no_sources: bool = False) -> DirectedMultigraph:
    """Random multigraph without sinks (every vertex emits an edge).

    With ``no_sources`` every vertex also receives an edge, so every vertex
    is live.
    """
    vs = [f"q{i}" for i in range(n_vertices)]
    pairs = [(int(rng.integers(n_vertices)), v) for v in range(n_vertices)]
    if no_sources:
        hit = {p[0] for p in pairs}
        pairs += [(v, int(rng.integers(n_vertices))) for v in range(n_vertices) if v not in hit]
    budget = max(0, max_edges - len(pairs))
    for _ in range(int(rng.integers(0, budget + 1))):
        pairs.append((int(rng.integers(n_vertices)), int(rng.integers(n_vertices))))
    return build_graph([(vs[a], vs[b]) for a, b in pairs], vertices=vs)
