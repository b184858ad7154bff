"""Attributed-graph data model, n-hop neighborhoods, and the sensitivity policy.

Vertices carry d categorical attributes: the first d-1 form the
quasi-identifier (QI), the last one is the sensitive attribute. A missing
value is stored as ``None`` and rendered as ``"-"`` on disk. Graphs are
undirected, simple (no self-loops, no parallel edges), and mutation is
insertion-oriented: the public API only grows a graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

MISSING = None
MISSING_TOKEN = "-"

ORIGINAL = "original"
DUPLICATE = "duplicate"
FAKE = "fake"


class GraphError(ValueError):
    """Violation of a graph-model contract (unknown vertex, bad edge, ...)."""


class DomainError(GraphError):
    """Attribute code outside its declared domain."""


class PolicyError(GraphError):
    """Operation asked about the sensitive attribute where only QI attributes apply."""


@dataclass(frozen=True)
class SensitivityPolicy:
    """Predicate over the sensitive attribute's domain.

    kind ``"values"``: codes in ``codes`` are sensitive.
    kind ``"less_than"``: codes ordered before ``threshold`` in the domain
    listing are sensitive (the domain order is the code order).
    """

    kind: str
    codes: frozenset[str] = frozenset()
    threshold: str | None = None

    def __post_init__(self):
        if self.kind not in ("values", "less_than"):
            raise ValueError(f"unknown sensitivity policy kind {self.kind!r}")
        if self.kind == "less_than" and self.threshold is None:
            raise ValueError("less_than policy requires a threshold code")


@dataclass(frozen=True)
class AttributeSchema:
    """Per-attribute domains plus the sensitivity policy for the last attribute."""

    domains: tuple[tuple[str, ...], ...]
    policy: SensitivityPolicy

    def __post_init__(self):
        if len(self.domains) < 2:
            raise ValueError("need at least one QI attribute and one sensitive attribute")
        for j, dom in enumerate(self.domains):
            if not dom:
                raise ValueError(f"attribute {j} has an empty domain")
            if len(set(dom)) != len(dom):
                raise ValueError(f"attribute {j} has duplicate domain codes")

    @property
    def d(self) -> int:
        return len(self.domains)

    @property
    def sensitive_index(self) -> int:
        return self.d - 1

    @property
    def qi_indices(self) -> range:
        return range(self.d - 1)

    def code_index(self, j: int, code: str) -> int:
        try:
            return self.domains[j].index(code)
        except ValueError:
            raise DomainError(f"code {code!r} not in domain of attribute {j}") from None

    def validate_attrs(self, attrs: tuple) -> None:
        if len(attrs) != self.d:
            raise GraphError(f"expected {self.d} attribute values, got {len(attrs)}")
        for j, code in enumerate(attrs):
            if code is not MISSING:
                self.code_index(j, code)


def is_sensitive(code: str | None, schema: AttributeSchema) -> bool:
    """True iff the sensitivity policy flags ``code``. MISSING is never sensitive."""
    if code is MISSING:
        return False
    pol = schema.policy
    idx = schema.code_index(schema.sensitive_index, code)
    if pol.kind == "values":
        return code in pol.codes
    return idx < schema.code_index(schema.sensitive_index, pol.threshold)


@dataclass
class Vertex:
    id: int
    attrs: tuple
    origin: str = ORIGINAL
    dup_of: int | None = None

    @property
    def qi(self) -> tuple:
        return self.attrs[:-1]


class AttributedGraph:
    """Undirected simple graph with attributed vertices.

    A value object: ``copy()`` yields an independent graph. Iteration orders
    are deterministic (sorted ids) so downstream algorithms are reproducible.
    """

    def __init__(self, schema: AttributeSchema):
        self.schema = schema
        self._verts: dict[int, Vertex] = {}
        self._adj: dict[int, set[int]] = {}
        self._edge_count = 0

    # -- construction -------------------------------------------------

    def add_vertex(self, vid: int, attrs: tuple, origin: str = ORIGINAL,
                   dup_of: int | None = None) -> Vertex:
        if vid in self._verts:
            raise GraphError(f"vertex {vid} already exists")
        self.schema.validate_attrs(attrs)
        if origin not in (ORIGINAL, DUPLICATE, FAKE):
            raise GraphError(f"unknown origin {origin!r}")
        if origin == DUPLICATE:
            if dup_of not in self._verts or self._verts[dup_of].origin != ORIGINAL:
                raise GraphError(f"duplicate target {dup_of} missing or not original")
        elif dup_of is not None:
            raise GraphError("dup_of is only valid for duplicates")
        v = Vertex(vid, tuple(attrs), origin, dup_of)
        self._verts[vid] = v
        self._adj[vid] = set()
        return v

    def add_edge(self, u: int, v: int) -> bool:
        """Insert edge {u, v}; returns False if it already exists (set semantics)."""
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        if u not in self._verts or v not in self._verts:
            raise GraphError(f"edge ({u}, {v}) references a missing vertex")
        if v in self._adj[u]:
            return False
        self._adj[u].add(v)
        self._adj[v].add(u)
        self._edge_count += 1
        return True

    # Rollback hooks for rehearsals; not part of the insertion-only release API.
    def _remove_edge(self, u: int, v: int) -> None:
        self._adj[u].discard(v)
        self._adj[v].discard(u)
        self._edge_count -= 1

    def _remove_vertex(self, vid: int) -> None:
        for w in list(self._adj[vid]):
            self._remove_edge(vid, w)
        del self._adj[vid]
        del self._verts[vid]

    # -- queries ------------------------------------------------------

    def __contains__(self, vid: int) -> bool:
        return vid in self._verts

    def vertex(self, vid: int) -> Vertex:
        try:
            return self._verts[vid]
        except KeyError:
            raise GraphError(f"unknown vertex {vid}") from None

    def vertex_ids(self) -> list[int]:
        return sorted(self._verts)

    def vertices(self) -> list[Vertex]:
        return [self._verts[i] for i in self.vertex_ids()]

    def neighbors(self, vid: int) -> set[int]:
        if vid not in self._adj:
            raise GraphError(f"unknown vertex {vid}")
        return self._adj[vid]

    def degree(self, vid: int) -> int:
        return len(self.neighbors(vid))

    def has_edge(self, u: int, v: int) -> bool:
        return u in self._adj and v in self._adj[u]

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in self.vertex_ids():
            for v in self._adj[u]:
                if u < v:
                    out.append((u, v))
        out.sort()
        return out

    @property
    def num_vertices(self) -> int:
        return len(self._verts)

    @property
    def num_edges(self) -> int:
        return self._edge_count

    def max_vertex_id(self) -> int:
        return max(self._verts) if self._verts else -1

    # -- derived graphs -----------------------------------------------

    def copy(self) -> "AttributedGraph":
        g = AttributedGraph(self.schema)
        g._verts = {i: Vertex(v.id, v.attrs, v.origin, v.dup_of) for i, v in self._verts.items()}
        g._adj = {i: set(nbrs) for i, nbrs in self._adj.items()}
        g._edge_count = self._edge_count
        return g

    def induced_subgraph(self, ids) -> "AttributedGraph":
        keep = set(ids)
        missing = keep - self._verts.keys()
        if missing:
            raise GraphError(f"unknown vertices {sorted(missing)}")
        g = AttributedGraph(self.schema)
        for i in sorted(keep):
            v = self._verts[i]
            g._verts[i] = Vertex(v.id, v.attrs, v.origin, v.dup_of)
            g._adj[i] = set()
        for i in sorted(keep):
            for j in self._adj[i]:
                if j in keep and i < j:
                    g._adj[i].add(j)
                    g._adj[j].add(i)
                    g._edge_count += 1
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (self.schema == other.schema
                and {i: v.attrs for i, v in self._verts.items()}
                == {i: v.attrs for i, v in other._verts.items()}
                and self._adj == other._adj)


@dataclass(frozen=True)
class NeighborhoodSubgraph:
    """The induced ball of radius ``radius`` around ``center``.

    ``hop_of`` maps every member to its BFS hop from the center (center: 0).
    ``member_edges`` is the full induced edge set, stored as sorted pairs.
    Immutable snapshot: safe to share across threads.
    """

    center: int
    radius: int
    hop_of: dict[int, int]
    attrs_of: dict[int, tuple]
    member_edges: frozenset
    _fringe: frozenset = field(default=frozenset(), repr=False)

    @property
    def member_ids(self) -> list[int]:
        return sorted(self.hop_of, key=lambda i: (self.hop_of[i], i))

    @property
    def size(self) -> int:
        return len(self.hop_of)

    @property
    def num_edges(self) -> int:
        return len(self.member_edges)

    def neighbor_ids(self) -> list[int]:
        """Members at hop exactly 1, sorted by id."""
        return sorted(i for i, h in self.hop_of.items() if h == 1)

    @property
    def fringe_edges(self) -> frozenset:
        """Induced edges not incident to the center."""
        return self._fringe


def hop_neighborhood(g: AttributedGraph, v: int, n: int) -> NeighborhoodSubgraph:
    """Breadth-first ball of radius ``n`` around ``v`` with induced edges."""
    if v not in g:
        raise GraphError(f"unknown vertex {v}")
    if n < 0:
        raise GraphError("radius must be >= 0")
    # hop levels do not depend on intra-level visit order, so the BFS can
    # expand unsorted neighbor sets
    hop = {v: 0}
    frontier = deque([v])
    while frontier:
        u = frontier.popleft()
        if hop[u] == n:
            continue
        for w in g.neighbors(u):
            if w not in hop:
                hop[w] = hop[u] + 1
                frontier.append(w)
    members = set(hop)
    edges = set()
    fringe = set()
    for u in hop:
        for w in g.neighbors(u) & members:
            if u < w:
                e = (u, w)
                edges.add(e)
                if v != u and v != w:
                    fringe.add(e)
    attrs = {u: g._verts[u].attrs for u in hop}
    return NeighborhoodSubgraph(v, n, hop, attrs, frozenset(edges), frozenset(fringe))


def attribute_pdf(hn: NeighborhoodSubgraph, j: int, schema: AttributeSchema,
                  include_center: bool = True) -> dict[str, float]:
    """Normalized frequency of attribute ``j``'s codes over the ball's members.

    MISSING codes are excluded from numerator and denominator. Only QI
    attributes have a distribution here; asking for the sensitive attribute
    is a policy error.
    """
    if j == schema.sensitive_index:
        raise PolicyError("attribute distributions are defined for QI attributes only")
    if not 0 <= j < schema.d:
        raise GraphError(f"attribute index {j} out of range")
    counts: dict[str, int] = {}
    for vid, attrs in hn.attrs_of.items():
        if not include_center and vid == hn.center:
            continue
        code = attrs[j]
        if code is MISSING:
            continue
        counts[code] = counts.get(code, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return {}
    return {code: c / total for code, c in sorted(counts.items())}
