"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the package's search machinery: the distribution
oracle recomputes half-L1 from raw codes with numpy, and the edit oracle
enumerates insertion *sets* (insertions commute, so sets and sequences reach
the same supergraphs) on both sides and joins canonical forms.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from ktsafe.graph_core import NeighborhoodSubgraph


def emd_half_l1_oracle(codes1, codes2, domain) -> float:
    """Half-L1 between normalized histograms of two raw code lists."""
    idx = {c: i for i, c in enumerate(domain)}
    h1 = np.zeros(len(domain))
    h2 = np.zeros(len(domain))
    for c in codes1:
        if c is not None:
            h1[idx[c]] += 1
    for c in codes2:
        if c is not None:
            h2[idx[c]] += 1
    if h1.sum() > 0:
        h1 = h1 / h1.sum()
    if h2.sum() > 0:
        h2 = h2 / h2.sum()
    return 0.5 * float(np.abs(h1 - h2).sum())


# -- rooted structural graphs as hashable states ----------------------------


def ball_state(h: NeighborhoodSubgraph):
    """(num_vertices, edge index pairs, center index) with members relabeled 0..n-1."""
    order = sorted(h.hop_of)
    pos = {v: i for i, v in enumerate(order)}
    edges = frozenset((min(pos[a], pos[b]), max(pos[a], pos[b])) for a, b in h.member_edges)
    return len(order), edges, pos[h.center]


def canonical_form(n: int, edges: frozenset, center: int):
    """Minimal edge tuple over center-fixing relabelings (classes pruned by degree)."""
    deg = [0] * n
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    others = sorted((v for v in range(n) if v != center), key=lambda v: (deg[v], v))
    best = None
    # group vertices by degree; permutations only permute within groups
    groups = []
    for v in others:
        if groups and deg[groups[-1][0]] == deg[v]:
            groups[-1].append(v)
        else:
            groups.append([v])
    perms_per_group = [list(itertools.permutations(gr)) for gr in groups]
    for combo in itertools.product(*perms_per_group):
        relabel = {center: 0}
        i = 1
        for gr in combo:
            for v in gr:
                relabel[v] = i
                i += 1
        cand = tuple(sorted((min(relabel[a], relabel[b]), max(relabel[a], relabel[b]))
                            for a, b in edges))
        if best is None or cand < best:
            best = cand
    return (n, best)


def _expand_states(n: int, edges: frozenset, center: int, max_cost: int):
    """All supergraph canonical forms reachable with <= max_cost insertions."""
    seen = {}
    frontier = [(n, edges)]
    seen_states = {(n, edges)}
    key0 = canonical_form(n, edges, center)
    seen[key0] = 0
    for cost in range(1, max_cost + 1):
        nxt = []
        for sn, sedges in frontier:
            # insert an isolated vertex
            cand = (sn + 1, sedges)
            if cand not in seen_states:
                seen_states.add(cand)
                nxt.append(cand)
                key = canonical_form(sn + 1, sedges, center)
                if key not in seen:
                    seen[key] = cost
            # insert one missing edge
            for a in range(sn):
                for b in range(a + 1, sn):
                    if (a, b) not in sedges:
                        cand = (sn, sedges | {(a, b)})
                        if cand not in seen_states:
                            seen_states.add(cand)
                            nxt.append(cand)
                            key = canonical_form(sn, cand[1], center)
                            if key not in seen:
                                seen[key] = cost
        frontier = nxt
    return seen


def ged_insertion_oracle(h1: NeighborhoodSubgraph, h2: NeighborhoodSubgraph,
                         max_edits: int = 4) -> int | None:
    """Minimum total insertions (either side) reaching rooted-isomorphic graphs.

    Returns None when no solution exists within ``max_edits``.
    """
    n1, e1, c1 = ball_state(h1)
    n2, e2, c2 = ball_state(h2)
    best = None
    states1 = _expand_states(n1, e1, c1, max_edits)
    states2 = _expand_states(n2, e2, c2, max_edits)
    for key, cost1 in states1.items():
        cost2 = states2.get(key)
        if cost2 is None:
            continue
        total = cost1 + cost2
        if total <= max_edits and (best is None or total < best):
            best = total
    return best
