"""Numeric kernels: neighborhood graph edit distance, attribute-distribution
distance, and the whole-graph anonymization cost.

The neighborhood distance counts the minimum number of vertex/edge
*insertions*, applied to either side, that make two center-rooted balls
isomorphic with centers corresponding. It is structural: vertex attributes do
not constrain the mapping (attribute closeness is enforced separately by the
distribution distance). Symmetrizing over both sides makes it a metric, which
is what the pivot-pruning triangle argument needs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph_core import AttributedGraph, AttributeSchema, NeighborhoodSubgraph, attribute_pdf
from .graph_core import PolicyError  # re-exported for callers  # noqa: F401

# Node budget for the radius>1 branch-and-bound; radius<=1 is always exact.
DEFAULT_NODE_BUDGET = 10 ** 6
# Tighter default for threshold certification: exhausting it conservatively
# treats the pair as too far apart, which is always privacy-safe.
WITHIN_NODE_BUDGET = 2_000

# Normalization of the distribution distance: 1/2 gives the categorical
# earth-mover form; 1.0 would give the plain L1 (Hamming) histogram distance.
EMD_HALF_FACTOR = 0.5


class ContractError(ValueError):
    """Caller violated an operation precondition."""


@dataclass(frozen=True)
class GedResult:
    distance: int
    exact: bool


@dataclass(frozen=True)
class EditDelta:
    vertices_added: int
    edges_added: int

    def __post_init__(self):
        if self.vertices_added < 0 or self.edges_added < 0:
            raise ValueError("insertion-only deltas must be non-negative")

    @property
    def total(self) -> int:
        return self.vertices_added + self.edges_added


def neighborhood_size_diff(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph) -> int:
    """Signed vertex-count difference |V(h1)| - |V(h2)|."""
    return h1.size - h2.size


def emd_attribute_distance(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph,
                           j: int, schema: AttributeSchema,
                           include_center: bool = True) -> float:
    """Half-L1 distance between the two balls' attribute-j distributions."""
    p1 = attribute_pdf(h1, j, schema, include_center)
    p2 = attribute_pdf(h2, j, schema, include_center)
    keys = sorted(set(p1) | set(p2))  # fixed order keeps the sum exactly symmetric
    return EMD_HALF_FACTOR * sum(abs(p1.get(c, 0.0) - p2.get(c, 0.0)) for c in keys)


def anonymization_cost(g: AttributedGraph, g_prime: AttributedGraph) -> int:
    """Symmetric-difference count of vertex ids plus edge pairs."""
    v1, v2 = set(g.vertex_ids()), set(g_prime.vertex_ids())
    e1, e2 = set(g.edges()), set(g_prime.edges())
    return len(v1 ^ v2) + len(e1 ^ e2)


# ---------------------------------------------------------------------------
# Graph edit distance between neighborhoods
# ---------------------------------------------------------------------------


def ged_neighborhood(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph,
                     node_budget: int = DEFAULT_NODE_BUDGET) -> GedResult:
    """Exact minimum-insertion distance between two equal-radius balls.

    Radius <= 1 is always exact. For radius > 1 the depth-first search stops
    after ``node_budget`` expanded mapping nodes and returns its best upper
    bound flagged ``exact=False``.
    """
    if h1.radius != h2.radius:
        raise ContractError("neighborhoods must have equal radii")
    if h1.radius <= 1:
        return GedResult(_ged_radius1(h1, h2, cutoff=None), True)
    dist, exact = _ged_general(h1, h2, cutoff=None, node_budget=node_budget,
                               first_hit=False)
    return GedResult(dist, exact)


def swap_isomorphic(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph) -> bool:
    """O(edges) test for the exchange isomorphism that maps center to center
    and fixes everything else: exactly the relation between a vertex and an
    inserted twin wired to its neighbors."""
    if h1.size != h2.size or h1.num_edges != h2.num_edges:
        return False
    c1, c2 = h1.center, h2.center
    e2 = h2.member_edges
    if c2 not in h1.hop_of and c1 not in h2.hop_of:
        # common case: the centers are outside each other's ball
        for x, d in h1.hop_of.items():
            if h2.hop_of.get(c2 if x == c1 else x) != d:
                return False
        for a, b in h1.member_edges:
            if a == c1:
                e = (c2, b) if c2 < b else (b, c2)
            elif b == c1:
                e = (a, c2) if a < c2 else (c2, a)
            else:
                e = (a, b)
            if e not in e2:
                return False
        return True

    def sw(x: int) -> int:
        return c2 if x == c1 else c1 if x == c2 else x

    for x, d in h1.hop_of.items():
        if h2.hop_of.get(sw(x)) != d:
            return False
    for a, b in h1.member_edges:
        sa, sb = sw(a), sw(b)
        if (sa, sb) not in e2 and (sb, sa) not in e2:
            return False
    return True


def ged_within(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph, limit: int,
               node_budget: int = WITHIN_NODE_BUDGET) -> int | None:
    """Certify whether the ball distance is within ``limit``.

    Returns an achieved insertion count <= limit when one exists (so the true
    distance is certainly <= limit), or None when either no mapping within
    ``limit`` exists (a proof) or the search budget ran out (conservative:
    the pair is treated as too far apart).
    """
    if h1.radius != h2.radius:
        raise ContractError("neighborhoods must have equal radii")
    if limit < 0:
        return None
    if swap_isomorphic(h1, h2):
        return 0
    if h1.radius <= 1:
        d = _ged_radius1(h1, h2, cutoff=limit, node_budget=node_budget)
        return d if d is not None and d <= limit else None
    dist, exact = _ged_general(h1, h2, cutoff=limit, node_budget=node_budget,
                               first_hit=True)
    if dist is not None and dist <= limit:
        return dist
    return None


def _fringe_ce_cap(fdeg1: dict, fdeg2: dict, nf1: int, nf2: int) -> int:
    """Admissible cap on common fringe edges from sorted fringe degrees."""
    a = sorted(fdeg1.values(), reverse=True)
    b = sorted(fdeg2.values(), reverse=True)
    paired = sum(min(x, y) for x, y in zip(a, b))
    return min(nf1, nf2, paired // 2)


def _ged_radius1(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph,
                 cutoff: int | None, node_budget: int | None = None) -> int | None:
    """Exact radius-<=1 distance (stars plus fringe edges).

    Unmatched neighbors cost one vertex and one center edge on the short
    side's supergraph; the fringe term is the symmetric difference of
    neighbor-neighbor edges under the best neighbor assignment. Returns None
    only when a cutoff is given and the distance provably exceeds it (the
    returned value may then be an achieved count <= cutoff rather than the
    strict minimum, which certifies the same admissibility decision).
    """
    n_1 = h1.size - 1
    n_2 = h2.size - 1
    f1 = sorted(h1.fringe_edges)
    f2set = set(h2.fringe_edges)
    base = 2 * abs(n_1 - n_2)
    if not f1 or not f2set:
        d = base + len(f1) + len(f2set)
        return d if cutoff is None or d <= cutoff else None

    # Only fringe-incident neighbors influence the assignment's edge overlap;
    # everyone else can be paired arbitrarily at no fringe cost.
    fdeg1: dict[int, int] = {}
    for a, b in f1:
        fdeg1[a] = fdeg1.get(a, 0) + 1
        fdeg1[b] = fdeg1.get(b, 0) + 1
    fdeg2: dict[int, int] = {}
    for a, b in f2set:
        fdeg2[a] = fdeg2.get(a, 0) + 1
        fdeg2[b] = fdeg2.get(b, 0) + 1
    p1 = sorted(fdeg1, key=lambda x: (-fdeg1[x], x))
    p2 = sorted(fdeg2, key=lambda y: (-fdeg2[y], y))
    adj1: dict[int, set[int]] = {x: set() for x in p1}
    for a, b in f1:
        adj1[a].add(b)
        adj1[b].add(a)
    adj2: dict[int, set[int]] = {y: set() for y in p2}
    for a, b in f2set:
        adj2[a].add(b)
        adj2[b].add(a)

    nf1, nf2 = len(f1), len(f2set)
    ce_cap = _fringe_ce_cap(fdeg1, fdeg2, nf1, nf2)
    if cutoff is not None and base + nf1 + nf2 - 2 * ce_cap > cutoff:
        return None  # degree-sequence bound already rules the pair out

    assign: dict[int, int | None] = {}
    used: set[int] = set()

    def gain_of(x: int, y: int) -> int:
        return sum(1 for z in adj1[x]
                   if assign.get(z) is not None and assign[z] in adj2[y])

    def greedy_ce() -> int:
        ce = 0
        for x in p1:
            pick, pick_key = None, None
            for y in p2:
                if y in used:
                    continue
                key = (gain_of(x, y), -abs(fdeg1[x] - fdeg2[y]), -y)
                if pick_key is None or key > pick_key:
                    pick, pick_key = y, key
            if pick is not None:
                used.add(pick)
                assign[x] = pick
                ce += pick_key[0]
        assign.clear()
        used.clear()
        return ce

    # identity incumbent first: twins share their neighbor set, so the
    # id-preserving assignment is already optimal for them and the greedy
    # aligner (the expensive part) can be skipped entirely
    identity_ce = len(h1.fringe_edges & h2.fringe_edges)
    target_ce = None
    if cutoff is not None:
        # d <= cutoff  <=>  ce >= ceil((base + nf1 + nf2 - cutoff) / 2)
        need = base + nf1 + nf2 - cutoff
        target_ce = max(0, (need + 1) // 2)
        if identity_ce >= target_ce:
            return base + nf1 + nf2 - 2 * identity_ce
    best_ce = identity_ce if identity_ce >= ce_cap else max(identity_ce, greedy_ce())
    if target_ce is not None and best_ce >= target_ce:
        return base + nf1 + nf2 - 2 * best_ce
    nodes = 0
    exhausted = False
    # refinement signature: isomorphic balls agree on it, so matching
    # same-signature vertices first aligns twins almost greedily
    wl1 = {x: (fdeg1[x], tuple(sorted(fdeg1[z] for z in adj1[x]))) for x in p1}
    wl2 = {y: (fdeg2[y], tuple(sorted(fdeg2[z] for z in adj2[y]))) for y in p2}

    NULL = -1
    state = {"ce": 0, "dead": 0}

    def settle(x: int, y: int | None) -> tuple[int, int]:
        """Edges at x whose partner already has a real image get decided."""
        c = d = 0
        for z in adj1[x]:
            az = assign.get(z)
            if az is None or az == NULL:
                continue
            if y is not None and az in adj2[y]:
                c += 1
            else:
                d += 1
        return c, d

    def dfs(idx: int):
        nonlocal best_ce, nodes, exhausted
        if exhausted or (target_ce is not None and best_ce >= target_ce):
            return
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            exhausted = True
            return
        if idx == len(p1):
            best_ce = max(best_ce, state["ce"])
            return
        alive = nf1 - state["ce"] - state["dead"]
        if state["ce"] + min(alive, nf2 - state["ce"]) <= best_ce:
            return
        x = p1[idx]
        cands = [y for y in p2 if y not in used]
        cands.sort(key=lambda y: (-gain_of(x, y), wl1[x] != wl2[y],
                                  abs(fdeg1[x] - fdeg2[y]), y))
        for y in cands:
            c, d = settle(x, y)
            assign[x] = y
            used.add(y)
            state["ce"] += c
            state["dead"] += d
            dfs(idx + 1)
            state["dead"] -= d
            state["ce"] -= c
            used.discard(y)
            del assign[x]
            if exhausted or (target_ce is not None and best_ce >= target_ce):
                return
        # matched to a fringe-free slot or left unmatched: its edges all die
        _, d = settle(x, None)
        undecided = sum(1 for z in adj1[x] if assign.get(z) is None)
        assign[x] = NULL
        state["dead"] += d + undecided
        dfs(idx + 1)
        state["dead"] -= d + undecided
        del assign[x]

    dfs(0)
    d = base + nf1 + nf2 - 2 * best_ce
    if cutoff is not None and d > cutoff:
        # either proven out, or the budget ran dry before a qualifying
        # assignment was found: both exclude the pair conservatively
        return None
    return d


def _ball_arrays(h: NeighborhoodSubgraph):
    order = h.member_ids
    adj = {i: set() for i in order}
    for a, b in h.member_edges:
        adj[a].add(b)
        adj[b].add(a)
    return order, adj


def _ged_general(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph,
                 cutoff: int | None, node_budget: int,
                 first_hit: bool) -> tuple[int | None, bool]:
    """Depth-first branch-and-bound over center-rooted mappings (radius > 1).

    A degree-sequence bound rejects hopeless pairs up front; during the
    search, per-edge liveness is maintained incrementally so the admissible
    bound is O(1) per node. Returns (distance, exact); distance is the best
    upper bound found when the node budget runs out (exact=False), or None
    when a cutoff is given and provably unreachable.
    """
    order1, adj1 = _ball_arrays(h1)
    order2, adj2 = _ball_arrays(h2)
    v1 = [h1.center] + [i for i in order1 if i != h1.center]
    v2set = [i for i in order2 if i != h2.center]
    nv1, nv2 = h1.size, h2.size
    ne1, ne2 = h1.num_edges, h2.num_edges
    hop2 = h2.hop_of

    const = nv1 + nv2 + ne1 + ne2

    def dist_of(score: int) -> int:
        return const - 2 * score  # score = matched vertices (incl. center) + common edges

    # admissible pre-bound: matched vertices and degree-paired edge overlap
    degs1 = sorted((len(adj1[i]) for i in order1), reverse=True)
    degs2 = sorted((len(adj2[i]) for i in order2), reverse=True)
    me_cap = min(ne1, ne2, sum(min(a, b) for a, b in zip(degs1, degs2)) // 2)
    score_cap = min(nv1, nv2) + me_cap
    if cutoff is not None and dist_of(score_cap) > cutoff:
        return None, True

    best_score = -1
    exact = True
    nodes = 0
    mapping: dict[int, int] = {h1.center: h2.center}
    used: set[int] = {h2.center}

    def gain_edges(x: int, y: int) -> int:
        g = 0
        for z in adj1[x]:
            im = mapping.get(z)
            if im is not None and im != -1 and im in adj2[y]:
                g += 1
        return g

    def greedy() -> int:
        score = 1
        for x in v1[1:]:
            pick, pick_key = None, None
            for y in v2set:
                if y in used:
                    continue
                key = (gain_edges(x, y), -abs(len(adj1[x]) - len(adj2[y])),
                       -abs(h1.hop_of[x] - hop2[y]), -y)
                if pick_key is None or key > pick_key:
                    pick, pick_key = y, key
            if pick is None:
                mapping[x] = -1
                continue
            mapping[x] = pick
            used.add(pick)
            score += 1 + pick_key[0]
        for x in v1[1:]:
            y = mapping.pop(x)
            if y != -1:
                used.discard(y)
        return score

    def identity_score() -> int:
        """Score of center-to-center plus id-preserving mapping on shared
        members: optimal for twins, whose balls coincide as vertex sets."""
        shared = (set(order1) & set(order2)) - {h1.center, h2.center}
        m_of = {h1.center: h2.center}
        for x in shared:
            m_of[x] = x
        common = 0
        for a, b in h1.member_edges:
            ia, ib = m_of.get(a), m_of.get(b)
            if ia is not None and ib is not None and ib in adj2.get(ia, ()):
                common += 1
        return 1 + len(shared) + common

    best_score = max(greedy(), identity_score())

    target_score = None
    if cutoff is not None:
        need = const - cutoff
        target_score = (need + 1) // 2 if need > 0 else 0
        if first_hit and best_score >= target_score:
            return dist_of(best_score), True

    common_now = 0
    dead_now = 0
    matched_now = 1
    wl1 = {x: (h1.hop_of[x], len(adj1[x]), tuple(sorted(len(adj1[z]) for z in adj1[x])))
           for x in order1}
    wl2 = {y: (hop2[y], len(adj2[y]), tuple(sorted(len(adj2[z]) for z in adj2[y])))
           for y in order2}

    def decide_edges(x: int, y: int | None):
        """Settle every ball edge at x whose other endpoint already has a
        real image (edges at null neighbors were settled at null time);
        returns the (common, dead) increments for undo."""
        c = d = 0
        for z in adj1[x]:
            imz = mapping.get(z)
            if imz is None or imz == -1:
                continue
            if y is not None and imz in adj2[y]:
                c += 1
            else:
                d += 1
        return c, d

    def bound(idx: int) -> int:
        rem_v = min(len(v1) - idx, nv2 - len(used))
        alive = ne1 - dead_now - common_now
        rem_e = min(alive, ne2 - common_now)
        return matched_now + common_now + rem_v + rem_e

    def dfs(idx: int):
        nonlocal best_score, nodes, exact, common_now, dead_now, matched_now
        if first_hit and target_score is not None and best_score >= target_score:
            return
        if nodes > node_budget:
            exact = False
            return
        if idx == len(v1):
            best_score = max(best_score, matched_now + common_now)
            return
        if bound(idx) <= best_score:
            return
        x = v1[idx]
        # score candidate images through already-mapped neighbors
        scores: dict[int, int] = {}
        for z in adj1[x]:
            imz = mapping.get(z)
            if imz is not None and imz != -1:
                for y in adj2[imz]:
                    if y not in used:
                        scores[y] = scores.get(y, 0) + 1
        cands = [y for y in v2set if y not in used]
        cands.sort(key=lambda y: (-scores.get(y, 0), wl1[x] != wl2[y],
                                  abs(len(adj1[x]) - len(adj2[y])),
                                  abs(h1.hop_of[x] - hop2[y]), y))
        for y in cands:
            nodes += 1
            if nodes > node_budget:
                exact = False
                return
            c, d = decide_edges(x, y)
            mapping[x] = y
            used.add(y)
            common_now += c
            dead_now += d
            matched_now += 1
            dfs(idx + 1)
            matched_now -= 1
            dead_now -= d
            common_now -= c
            used.discard(y)
            del mapping[x]
            if nodes > node_budget:
                exact = False
                return
            if first_hit and target_score is not None and best_score >= target_score:
                return
        nodes += 1
        c, d = decide_edges(x, None)
        extra_dead = sum(1 for z in adj1[x] if mapping.get(z) is None and z != x)
        mapping[x] = -1
        dead_now += d + extra_dead  # null endpoint kills its undecided edges too
        dfs(idx + 1)
        dead_now -= d + extra_dead
        del mapping[x]

    dfs(1)

    d = dist_of(best_score)
    if cutoff is not None and exact and d > cutoff:
        return None, True
    return d, exact
