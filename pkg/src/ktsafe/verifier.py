"""Anonymizer-free validation of per-vertex safety plus graph utility metrics.

This module recomputes every protection set from scratch using only the
graph model and the distance kernels, so any defect in the anonymization
pipeline surfaces here rather than being certified by its own bookkeeping.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .distances import ged_within
from .graph_core import (
    MISSING,
    AttributedGraph,
    GraphError,
    NeighborhoodSubgraph,
    hop_neighborhood,
    is_sensitive,
)


@dataclass(frozen=True)
class VertexCheck:
    vertex: int
    safe: bool
    protection_size: int
    sensitive_fraction: float
    witness: tuple[str, ...] = ()


@dataclass(frozen=True)
class GraphCheck:
    safe: bool
    failing_vertices: tuple[int, ...]
    safe_fraction: float
    checks: dict = field(default_factory=dict, hash=False, compare=False)


def _sub_ball(h: NeighborhoodSubgraph, radius: int) -> NeighborhoodSubgraph:
    if radius >= h.radius:
        return h
    hop = {v: d for v, d in h.hop_of.items() if d <= radius}
    edges = frozenset(e for e in h.member_edges if e[0] in hop and e[1] in hop)
    fringe = frozenset(e for e in edges if h.center not in e)
    attrs = {v: h.attrs_of[v] for v in hop}
    return NeighborhoodSubgraph(h.center, radius, hop, attrs, edges, fringe)


def _pdf(h: NeighborhoodSubgraph, j: int, include_center: bool) -> dict[str, float]:
    counts: dict[str, int] = {}
    for vid, attrs in h.attrs_of.items():
        if not include_center and vid == h.center:
            continue
        code = attrs[j]
        if code is MISSING:
            continue
        counts[code] = counts.get(code, 0) + 1
    total = sum(counts.values())
    return {c: cnt / total for c, cnt in counts.items()} if total else {}


def _emd(p1: dict, p2: dict) -> float:
    keys = sorted(set(p1) | set(p2))
    return 0.5 * sum(abs(p1.get(c, 0.0) - p2.get(c, 0.0)) for c in keys)


class _Checker:
    """Shared caches for verifying many vertices of one graph."""

    def __init__(self, g: AttributedGraph, params):
        self.g = g
        self.p = params
        self.schema = g.schema
        self.include_center = getattr(params, "include_center", True)
        self.buckets: dict[tuple, list[int]] = {}
        for vid in g.vertex_ids():
            self.buckets.setdefault(g.vertex(vid).qi, []).append(vid)
        self._balls: dict[int, NeighborhoodSubgraph] = {}
        self._pdfs: dict[tuple, dict] = {}

    def ball(self, v: int) -> NeighborhoodSubgraph:
        h = self._balls.get(v)
        if h is None:
            h = hop_neighborhood(self.g, v, self.p.n)
            self._balls[v] = h
        return h

    def pdf(self, v: int, L: int, j: int) -> dict:
        key = (v, L, j)
        hit = self._pdfs.get(key)
        if hit is None:
            hit = _pdf(_sub_ball(self.ball(v), L), j, self.include_center)
            self._pdfs[key] = hit
        return hit

    def distributions_close(self, v: int, u: int) -> bool:
        for L in range(1, self.p.n + 1):
            for j in self.schema.qi_indices:
                if _emd(self.pdf(v, L, j), self.pdf(u, L, j)) > self.p.t + 1e-12:
                    return False
        return True

    def protection_set(self, v: int) -> list[int]:
        qi = self.g.vertex(v).qi
        ball_v = self.ball(v)
        deg_v = self.g.degree(v)
        members = []
        for u in self.buckets[qi]:
            if u == v:
                members.append(u)
                continue
            if self.p.n == 1 and 2 * abs(self.g.degree(u) - deg_v) > self.p.epsilon:
                continue
            if ged_within(ball_v, self.ball(u), self.p.epsilon) is None:
                continue
            if self.distributions_close(v, u):
                members.append(u)
        return members

    def check_vertex(self, v: int) -> VertexCheck:
        members = self.protection_set(v)
        idx = self.schema.sensitive_index
        n_sens = sum(1 for m in members
                     if is_sensitive(self.g.vertex(m).attrs[idx], self.schema))
        frac = n_sens / len(members)
        witness = []
        if len(members) < self.p.k:
            witness.append(f"protection set has {len(members)} members, needs {self.p.k}")
        if frac > self.p.alpha + 1e-12:
            witness.append(f"sensitive fraction {frac:.4f} exceeds {self.p.alpha}")
        return VertexCheck(vertex=v, safe=not witness, protection_size=len(members),
                           sensitive_fraction=frac, witness=tuple(witness))


def verify_kt_safe_vertex(g: AttributedGraph, v: int, params) -> VertexCheck:
    """Recompute ``v``'s protection set from scratch and test both safety
    conditions; the witness lists whichever failed."""
    if v not in g:
        raise GraphError(f"unknown vertex {v}")
    return _Checker(g, params).check_vertex(v)


def verify_kt_safe_graph(g: AttributedGraph, params) -> GraphCheck:
    """Check every vertex; the graph is safe only if all of them are."""
    checker = _Checker(g, params)
    failing = []
    checks = {}
    total = g.num_vertices
    for v in g.vertex_ids():
        res = checker.check_vertex(v)
        checks[v] = res
        if not res.safe:
            failing.append(v)
    frac = 1.0 if total == 0 else (total - len(failing)) / total
    return GraphCheck(safe=not failing, failing_vertices=tuple(failing),
                      safe_fraction=frac, checks=checks)


# ---------------------------------------------------------------------------
# Utility measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UtilityReport:
    degree_histogram: dict[int, int]
    spl_samples: tuple[int, ...]
    spl_mean: float
    spl_std: float
    spl_dropped: int
    clustering_histogram: dict[float, int]
    largest_component_size: int
    kt_safe_fraction: float | None = None


def _bfs_distance(g: AttributedGraph, src: int, dst: int) -> int | None:
    if src == dst:
        return 0
    dist = {src: 0}
    dq = deque([src])
    while dq:
        u = dq.popleft()
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                if w == dst:
                    return dist[w]
                dq.append(w)
    return None


def _transitivity(g: AttributedGraph, v: int) -> float:
    nbrs = sorted(g.neighbors(v))
    d = len(nbrs)
    if d < 2:
        return 0.0
    closed = 0
    for i in range(d):
        for j in range(i + 1, d):
            if g.has_edge(nbrs[i], nbrs[j]):
                closed += 1
    return closed / (d * (d - 1) / 2)


def _largest_component(g: AttributedGraph) -> int:
    seen: set[int] = set()
    best = 0
    for v in g.vertex_ids():
        if v in seen:
            continue
        size = 0
        dq = deque([v])
        seen.add(v)
        while dq:
            u = dq.popleft()
            size += 1
            for w in g.neighbors(u):
                if w not in seen:
                    seen.add(w)
                    dq.append(w)
        best = max(best, size)
    return best


def _report_for(g: AttributedGraph, pair_sample_count: int,
                rng: np.random.Generator, params=None) -> UtilityReport:
    deg_hist: dict[int, int] = {}
    for v in g.vertex_ids():
        d = g.degree(v)
        deg_hist[d] = deg_hist.get(d, 0) + 1

    ids = g.vertex_ids()
    samples: list[int] = []
    dropped = 0
    if len(ids) >= 2:
        for _ in range(pair_sample_count):
            dist = None
            for _attempt in range(10):  # unreachable pairs are resampled
                i, j = rng.choice(len(ids), size=2, replace=False)
                dist = _bfs_distance(g, ids[int(i)], ids[int(j)])
                if dist is not None:
                    break
            if dist is None:
                dropped += 1
            else:
                samples.append(dist)

    clus_hist: dict[float, int] = {round(b / 10, 1): 0 for b in range(10)}
    for v in g.vertex_ids():
        c = _transitivity(g, v)
        b = min(int(c * 10), 9)
        clus_hist[round(b / 10, 1)] += 1

    frac = None
    if params is not None:
        frac = verify_kt_safe_graph(g, params).safe_fraction
    arr = np.array(samples, dtype=float)
    return UtilityReport(
        degree_histogram=dict(sorted(deg_hist.items())),
        spl_samples=tuple(samples),
        spl_mean=float(arr.mean()) if len(arr) else 0.0,
        spl_std=float(arr.std()) if len(arr) else 0.0,
        spl_dropped=dropped,
        clustering_histogram=clus_hist,
        largest_component_size=_largest_component(g),
        kt_safe_fraction=frac,
    )


def utility_report(g_original: AttributedGraph, g_anonymized: AttributedGraph,
                   pair_sample_count: int, seed: int = 0,
                   params=None) -> tuple[UtilityReport, UtilityReport]:
    """Degree, shortest-path, clustering, and component statistics for both
    graphs, sampled deterministically under ``seed``."""
    if pair_sample_count < 1:
        raise GraphError("pair_sample_count must be >= 1")
    rng_o = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    rng_a = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    return (_report_for(g_original, pair_sample_count, rng_o, params),
            _report_for(g_anonymized, pair_sample_count, rng_a, params))
