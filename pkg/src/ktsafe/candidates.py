"""Candidate retrieval: exhaustive scan, pivot pruning, and the kt-tree.

A vertex's initial candidates are the other vertices with the same
quasi-identifier whose n-hop balls are within ``epsilon`` insertions. The
pivot filter discards pairs whose pivot-distance gap exceeds epsilon (sound
by the triangle inequality); the kt-tree adds QI bit-vector tests and
per-node distance intervals on top. Both are pure accelerators: query output
is always identical to the exhaustive scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distances import ged_neighborhood, ged_within
from .graph_core import AttributedGraph, GraphError, NeighborhoodSubgraph, hop_neighborhood

QI_HASH_MULT = 1000003
QI_HASH_ATTR = 8191
DEFAULT_BIT_WIDTH = 64


def qi_bit(schema, j: int, code) -> int:
    """Deterministic bit position for attribute j's code in a B-wide vector."""
    if code is None:
        a = len(schema.domains[j])  # missing gets its own slot past the domain
    else:
        a = schema.code_index(j, code)
    return (a * QI_HASH_MULT + j * QI_HASH_ATTR)


def qi_signature(schema, qi: tuple, width: int) -> tuple[int, ...]:
    """One single-bit mask per QI attribute."""
    return tuple(1 << (qi_bit(schema, j, qi[j]) % width) for j in range(len(qi)))


def _qi_groups(g: AttributedGraph) -> dict[tuple, list[int]]:
    groups: dict[tuple, list[int]] = {}
    for vid in g.vertex_ids():
        groups.setdefault(g.vertex(vid).qi, []).append(vid)
    return groups


def initial_candidate(g: AttributedGraph, v: int, epsilon: int, n: int,
                      index=None) -> list[int]:
    """All vertices (except ``v``) with v's QI and ball distance <= epsilon.

    ``index`` may be a PivotSet or a KtTree built over ``g``; it only prunes,
    never changes the result. Output is sorted by id.
    """
    if v not in g:
        raise GraphError(f"unknown vertex {v}")
    if index is not None and isinstance(index, KtTree):
        return kt_tree_candidates(index, v, epsilon, n)
    qi = g.vertex(v).qi
    ball_v = hop_neighborhood(g, v, n)
    out = []
    for m in g.vertex_ids():
        if m == v or g.vertex(m).qi != qi:
            continue
        if index is not None and isinstance(index, PivotSet):
            if index.prunable(v, m, epsilon, ball_v=ball_v):
                continue
        if ged_within(ball_v, hop_neighborhood(g, m, n), epsilon) is not None:
            out.append(m)
    return out


def pivot_prunable(d_vp: int, d_mp: int, epsilon: int) -> bool:
    """Lower-bound test: the pair is beyond epsilon when |d_vp - d_mp| > epsilon."""
    return abs(d_vp - d_mp) > epsilon


@dataclass
class PivotSet:
    """Pivot vertices with cached balls and lazily filled exact distances.

    The distance cache is insert-once: a key is computed at most once and
    never rewritten, so concurrent readers of a shared instance are safe.
    """

    graph: AttributedGraph
    pivots: list[int]
    n: int
    cached_balls: dict[int, NeighborhoodSubgraph] = field(default_factory=dict)
    cached_dists: dict[tuple[int, int], tuple[int, bool]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.pivots)) != len(self.pivots):
            raise GraphError("pivots must be distinct")
        for p in self.pivots:
            if p not in self.graph:
                raise GraphError(f"pivot {p} not in graph")
            self.cached_balls[p] = hop_neighborhood(self.graph, p, self.n)

    def distance(self, p: int, v: int, ball_v: NeighborhoodSubgraph | None = None) -> tuple[int, bool]:
        key = (p, v)
        hit = self.cached_dists.get(key)
        if hit is None:
            if ball_v is None:
                ball_v = hop_neighborhood(self.graph, v, self.n)
            r = ged_neighborhood(self.cached_balls[p], ball_v)
            hit = (r.distance, r.exact)
            self.cached_dists[key] = hit
        return hit

    def prunable(self, v: int, m: int, epsilon: int,
                 ball_v: NeighborhoodSubgraph | None = None) -> bool:
        """True when some pivot certifies ged(ball(v), ball(m)) > epsilon."""
        for p in self.pivots:
            d_vp, exact_v = self.distance(p, v, ball_v)
            d_mp, exact_m = self.distance(p, m)
            if exact_v and exact_m and pivot_prunable(d_vp, d_mp, epsilon):
                return True
        return False


def select_pivots(g: AttributedGraph, sample_size: int, iterations: int,
                  pivot_count: int, epsilon: int, n: int, seed: int = 0) -> PivotSet:
    """Hill-climb a pivot set maximizing Lemma-style prunings on a sample.

    Each iteration replaces one random pivot and keeps the variant that
    prunes more ordered sample pairs. Deterministic under ``seed``.
    """
    if pivot_count < 1 or iterations < 1:
        raise GraphError("pivot_count and iterations must be >= 1")
    ids = g.vertex_ids()
    if not ids:
        raise GraphError("cannot select pivots on an empty graph")
    rng = np.random.default_rng(seed)
    pivot_count = min(pivot_count, len(ids))
    sample = _bfs_sample(g, min(sample_size, len(ids)), rng)
    balls = {v: hop_neighborhood(g, v, n) for v in sample}
    dist_cache: dict[tuple[int, int], tuple[int, bool]] = {}

    def dist(p: int, v: int) -> tuple[int, bool]:
        key = (p, v)
        if key not in dist_cache:
            ball_p = balls.get(p) or hop_neighborhood(g, p, n)
            r = ged_neighborhood(ball_p, balls[v])
            dist_cache[key] = (r.distance, r.exact)
        return dist_cache[key]

    def pruned_pairs(pvts: list[int]) -> int:
        cnt = 0
        for v in sample:
            for m in sample:
                if m == v:
                    continue
                for p in pvts:
                    d_vp, ev = dist(p, v)
                    d_mp, em = dist(p, m)
                    if ev and em and pivot_prunable(d_vp, d_mp, epsilon):
                        cnt += 1
                        break
        return cnt

    current = sorted(int(x) for x in rng.choice(ids, size=pivot_count, replace=False))
    best_count = pruned_pairs(current)
    best = list(current)
    for _ in range(iterations - 1):
        candidate = list(best)
        slot = int(rng.integers(0, pivot_count))
        replacement = int(rng.choice(ids))
        if replacement in candidate:
            continue
        candidate[slot] = replacement
        count = pruned_pairs(candidate)
        if count > best_count:
            best_count = count
            best = candidate
    return PivotSet(graph=g, pivots=best, n=n)


def _bfs_sample(g: AttributedGraph, size: int, rng: np.random.Generator) -> list[int]:
    """Connected-ish sample: BFS from random seeds until ``size`` vertices."""
    ids = g.vertex_ids()
    picked: list[int] = []
    seen: set[int] = set()
    order = [int(x) for x in rng.permutation(ids)]
    cursor = 0
    from collections import deque

    while len(picked) < size and cursor < len(order):
        root = order[cursor]
        cursor += 1
        if root in seen:
            continue
        dq = deque([root])
        seen.add(root)
        while dq and len(picked) < size:
            u = dq.popleft()
            picked.append(u)
            for w in sorted(g.neighbors(u)):
                if w not in seen:
                    seen.add(w)
                    dq.append(w)
    return picked


# ---------------------------------------------------------------------------
# kt-tree synopsis
# ---------------------------------------------------------------------------


@dataclass
class KtTreeNode:
    children: list["KtTreeNode"] = field(default_factory=list)
    member_ids: list[int] = field(default_factory=list)  # leaves only
    bit_vectors: tuple[int, ...] = ()
    pivot_id: int | None = None
    ged_interval: tuple[int, int] | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class KtTree:
    graph: AttributedGraph
    n: int
    width: int
    root: KtTreeNode
    pivots: PivotSet


def build_kt_tree(g: AttributedGraph, pivots: PivotSet, width: int = DEFAULT_BIT_WIDTH,
                  n: int = 1) -> KtTree:
    """Bottom-up index: QI leaves, pivot-nearest clusters, then supernodes.

    Every node carries OR-ed QI bit vectors and the [min, max] interval of
    its members' exact ball distances to the node's pivot.
    """
    if width < 8:
        raise GraphError("bit vector width must be >= 8")
    if g.num_vertices == 0:
        raise GraphError("cannot build a kt-tree over an empty graph")
    schema = g.schema
    groups = _qi_groups(g)

    def sig_of(qi: tuple) -> tuple[int, ...]:
        return qi_signature(schema, qi, width)

    def interval_over(members: list[int], pivot: int) -> tuple[int, int]:
        lo, hi = None, None
        for m in members:
            d, exact = pivots.distance(pivot, m)
            if not exact:
                # conservative: widen to an unprunable interval
                d_lo, d_hi = 0, 10 ** 9
            else:
                d_lo = d_hi = d
            lo = d_lo if lo is None else min(lo, d_lo)
            hi = d_hi if hi is None else max(hi, d_hi)
        return (lo, hi)

    # leaves: one per distinct QI
    leaves = []
    for qi in sorted(groups, key=lambda q: tuple("" if c is None else c for c in q)):
        members = sorted(groups[qi])
        leaves.append(KtTreeNode(member_ids=members, bit_vectors=sig_of(qi)))

    # cluster leaves under the nearest pivot (by the leaf's smallest member)
    pivot_nodes: dict[int, KtTreeNode] = {p: KtTreeNode(pivot_id=p) for p in pivots.pivots}
    for leaf in leaves:
        rep = leaf.member_ids[0]
        best_p, best_d = None, None
        for p in pivots.pivots:
            d, exact = pivots.distance(p, rep)
            key = (d if exact else 10 ** 9, p)
            if best_d is None or key < best_d:
                best_d, best_p = key, p
        node = pivot_nodes[best_p]
        leaf.pivot_id = best_p
        leaf.ged_interval = interval_over(leaf.member_ids, best_p)
        node.children.append(leaf)

    level = [nd for _, nd in sorted(pivot_nodes.items()) if nd.children]
    for nd in level:
        members = [m for leaf in nd.children for m in leaf.member_ids]
        nd.ged_interval = interval_over(members, nd.pivot_id)
        nd.bit_vectors = tuple(
            _or_all(child.bit_vectors[j] for child in nd.children)
            for j in range(len(schema.domains) - 1))

    # repeatedly group into ceil(sqrt(count)) supernodes until a single root
    while len(level) > 1:
        target = max(1, math.isqrt(len(level) - 1) + 1)  # ceil(sqrt(count))
        if target >= len(level):
            target = max(1, len(level) - 1)
        supers = [KtTreeNode(pivot_id=level[i].pivot_id) for i in range(target)]
        capacity = math.ceil(len(level) / target)
        for nd in level:
            best_i, best_key = None, None
            for i, sup in enumerate(supers):
                if len(sup.children) >= capacity:
                    continue
                d, exact = pivots.distance(sup.pivot_id, _node_rep(nd))
                key = (d if exact else 10 ** 9, i)
                if best_key is None or key < best_key:
                    best_key, best_i = key, i
            supers[best_i].children.append(nd)
        supers = [s for s in supers if s.children]
        for sup in supers:
            members = list(_node_members(sup))
            sup.ged_interval = interval_over(members, sup.pivot_id)
            sup.bit_vectors = tuple(
                _or_all(child.bit_vectors[j] for child in sup.children)
                for j in range(len(schema.domains) - 1))
        level = supers

    return KtTree(graph=g, n=n, width=width, root=level[0], pivots=pivots)


def _or_all(bits) -> int:
    out = 0
    for b in bits:
        out |= b
    return out


def _node_rep(nd: KtTreeNode) -> int:
    if nd.is_leaf:
        return nd.member_ids[0]
    return _node_rep(nd.children[0])


def _node_members(nd: KtTreeNode):
    if nd.is_leaf:
        yield from nd.member_ids
    else:
        for ch in nd.children:
            yield from _node_members(ch)


def kt_tree_candidates(tree: KtTree, v: int, epsilon: int, n: int) -> list[int]:
    """Index-accelerated candidate query; equals the exhaustive scan."""
    g = tree.graph
    if v not in g:
        raise GraphError(f"unknown vertex {v}")
    if n != tree.n:
        raise GraphError(f"tree was built for n={tree.n}, queried with n={n}")
    schema = g.schema
    qi = g.vertex(v).qi
    sig = qi_signature(schema, qi, tree.width)
    ball_v = hop_neighborhood(g, v, n)

    survivors: list[int] = []

    def descend(node: KtTreeNode):
        if node.bit_vectors and any(sig[j] & node.bit_vectors[j] == 0 for j in range(len(sig))):
            return
        if node.ged_interval is not None and node.pivot_id is not None:
            d_vp, exact = tree.pivots.distance(node.pivot_id, v, ball_v)
            lo, hi = node.ged_interval
            if exact and (d_vp - hi > epsilon or lo - d_vp > epsilon):
                return  # the gap exceeds epsilon for every member distance
        if node.is_leaf:
            survivors.extend(node.member_ids)
            return
        for ch in node.children:
            descend(ch)

    descend(tree.root)
    out = []
    for m in survivors:
        if m == v or g.vertex(m).qi != qi:
            continue
        if ged_within(ball_v, hop_neighborhood(g, m, n), epsilon) is not None:
            out.append(m)
    return sorted(out)
