"""Divide-and-conquer preprocessing: size-bounded partitioning with n-hop
halos, the sample-calibrated cost model, and the center-swap search for a
low-cost partitioning.

Cores are pairwise disjoint and cover the whole vertex set; each partition's
working graph is the original graph induced on core plus halo, where the halo
duplicates every vertex within n hops of a core border vertex so a partition
can be anonymized without looking outside itself.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph_core import AttributedGraph, GraphError, hop_neighborhood


@dataclass(frozen=True)
class PartitionedSubgraph:
    core_ids: frozenset
    halo_ids: frozenset
    graph: AttributedGraph

    def border_core_ids(self, host: AttributedGraph) -> list[int]:
        """Core vertices with a host edge leaving the core."""
        out = []
        for v in sorted(self.core_ids):
            if any(w not in self.core_ids for w in host.neighbors(v)):
                out.append(v)
        return out


@dataclass
class CostSample:
    """Per-vertex anonymization costs measured on a small calibration sample."""

    ball_sizes: dict[int, int]
    kt_cost: dict[int, int]         # edits attributed to making the vertex safe
    merge_cost: dict[int, int]      # border-conflict premium, border samples only
    sample_vertex_ids: list[int] = field(default_factory=list)


class CalibrationError(ValueError):
    pass


def _expand_with_halo(host: AttributedGraph, core: set[int], n: int) -> PartitionedSubgraph:
    border = [v for v in sorted(core) if any(w not in core for w in host.neighbors(v))]
    halo: set[int] = set()
    dist = {v: 0 for v in border}
    dq = deque(border)
    while dq:
        u = dq.popleft()
        if dist[u] == n:
            continue
        for w in sorted(host.neighbors(u)):
            if w not in dist:
                dist[w] = dist[u] + 1
                dq.append(w)
                if w not in core:
                    halo.add(w)
    sub = host.induced_subgraph(core | halo)
    return PartitionedSubgraph(core_ids=frozenset(core), halo_ids=frozenset(halo), graph=sub)


def _spread_seeds(g: AttributedGraph, ids: list[int], s: int) -> list[int]:
    """Greedy far-apart seeds: min id first, then repeatedly the farthest vertex."""
    idset = set(ids)
    seeds = [min(ids)]
    while len(seeds) < min(s, len(ids)):
        dist = {sd: 0 for sd in seeds}
        dq = deque(seeds)
        while dq:
            u = dq.popleft()
            for w in sorted(g.neighbors(u)):
                if w in idset and w not in dist:
                    dist[w] = dist[u] + 1
                    dq.append(w)
        unreached = [v for v in ids if v not in dist]
        if unreached:
            seeds.append(min(unreached))  # disconnected piece: seed it directly
            continue
        candidates = [(d, v) for v, d in dist.items() if v not in seeds]
        if not candidates:
            break
        far = max(d for d, _ in candidates)
        seeds.append(min(v for d, v in candidates if d == far))
    return seeds


def _grow_regions(g: AttributedGraph, ids: list[int], seeds: list[int],
                  capacity: int) -> list[set[int]]:
    """Multi-source BFS with per-region capacity; leftovers join the smallest region."""
    idset = set(ids)
    region_of: dict[int, int] = {}
    regions: list[set[int]] = [set() for _ in seeds]
    heap = []
    for ri, sd in enumerate(seeds):
        heapq.heappush(heap, (0, ri, sd))
    while heap:
        hop, ri, v = heapq.heappop(heap)
        if v in region_of or len(regions[ri]) >= capacity:
            continue
        region_of[v] = ri
        regions[ri].add(v)
        for w in sorted(g.neighbors(v)):
            if w in idset and w not in region_of:
                heapq.heappush(heap, (hop + 1, ri, w))
    for v in ids:
        if v not in region_of:
            smallest = min(range(len(regions)), key=lambda i: (len(regions[i]), i))
            regions[smallest].add(v)
            region_of[v] = smallest
    return [r for r in regions if r]


def partition_graph(g: AttributedGraph, gamma: int, s: int, n: int) -> list[PartitionedSubgraph]:
    """Recursive size-bounded partitioning with halo expansion.

    Splits any piece larger than ``gamma`` into ``s`` similar-size regions by
    capacity-capped BFS growing from spread-out seeds, then recurses. A graph
    that already fits returns as a single halo-free partition.
    """
    if gamma < 1:
        raise GraphError("gamma must be >= 1")
    if s < 2:
        raise GraphError("s must be >= 2")
    if g.num_vertices == 0:
        return []
    if g.num_vertices <= gamma:
        return [PartitionedSubgraph(core_ids=frozenset(g.vertex_ids()),
                                    halo_ids=frozenset(), graph=g.copy())]

    cores: list[set[int]] = []

    def split(ids: list[int]):
        if len(ids) <= gamma:
            cores.append(set(ids))
            return
        seeds = _spread_seeds(g, ids, s)
        capacity = math.ceil(len(ids) / len(seeds))
        for region in _grow_regions(g, ids, seeds, capacity):
            split(sorted(region))

    split(g.vertex_ids())
    return [_expand_with_halo(g, core, n) for core in cores]


def partition_count_for(num_vertices: int, gamma: int, s: int) -> int:
    """Region count the recursive splitter would produce for this size."""
    if num_vertices <= gamma:
        return 1
    count = 1
    size = num_vertices
    while size > gamma:
        count *= s
        size = math.ceil(size / s)
    return count


def estimate_partition_cost(parts: list[PartitionedSubgraph], sample: CostSample,
                            n: int) -> float:
    """Cost-model estimate: nearest-ball-size sample cost per core vertex plus
    the border samples' merge premium, once per duplicated halo instance.

    Nearest-sample ties break toward the smallest sample vertex id.
    """
    import bisect

    if not sample.ball_sizes:
        raise CalibrationError("cost sample is empty")
    kt_items = sorted((sample.ball_sizes[u], u, sample.kt_cost.get(u, 0))
                      for u in sample.kt_cost)
    kt_sizes = [t[0] for t in kt_items]
    mer_items = sorted((sample.ball_sizes[u], u, sample.merge_cost.get(u, 0))
                       for u in sample.merge_cost)
    mer_sizes = [t[0] for t in mer_items]

    def nearest(items, sizes, ball_size: int) -> float:
        i = bisect.bisect_left(sizes, ball_size)
        candidates = []
        if i < len(items):
            candidates.append(i)  # start of the run at or above ball_size
        if i > 0:
            below = bisect.bisect_left(sizes, sizes[i - 1])
            candidates.append(below)  # start of the run just below (smallest id)
        best = None
        for j in candidates:
            key = (abs(items[j][0] - ball_size), items[j][1])
            if best is None or key < best[0]:
                best = (key, items[j][2])
        return best[1]

    total = 0.0
    for part in parts:
        sub = part.graph
        for v in sorted(part.core_ids):
            size = hop_neighborhood(sub, v, n).size
            total += nearest(kt_items, kt_sizes, size)
        if mer_items:
            for v in sorted(part.halo_ids):
                size = hop_neighborhood(sub, v, n).size
                total += nearest(mer_items, mer_sizes, size)
    return total


def select_partitioning(g: AttributedGraph, gamma: int, s: int, iterations: int,
                        sample: CostSample, seed: int = 0,
                        n: int = 1) -> list[PartitionedSubgraph]:
    """Hill-climb over center sets, keeping the partitioning whose estimated
    anonymization cost is lowest. Deterministic under ``seed``."""
    if iterations < 1:
        raise GraphError("iterations must be >= 1")
    ids = g.vertex_ids()
    if not ids:
        return []
    if g.num_vertices <= gamma:
        return partition_graph(g, gamma, s, n)
    rng = np.random.default_rng(seed)
    count = min(partition_count_for(g.num_vertices, gamma, s), len(ids))

    def build(centers: list[int]) -> list[PartitionedSubgraph]:
        regions = _grow_regions(g, ids, centers, gamma)
        return [_expand_with_halo(g, set(r), n) for r in regions]

    centers = sorted(int(x) for x in rng.choice(ids, size=count, replace=False))
    best_parts = build(centers)
    best_cost = estimate_partition_cost(best_parts, sample, n, host=g)
    best_centers = list(centers)
    for _ in range(iterations - 1):
        candidate = list(best_centers)
        slot = int(rng.integers(0, count))
        replacement = int(rng.choice(ids))
        if replacement in candidate:
            continue
        candidate[slot] = replacement
        parts = build(candidate)
        cost = estimate_partition_cost(parts, sample, n, host=g)
        if cost < best_cost:
            best_cost = cost
            best_centers = candidate
            best_parts = parts
    return best_parts


def calibrate_cost_sample(g: AttributedGraph, sample_size: int, params,
                          seed: int = 0) -> CostSample:
    """Anonymize a BFS sample of the graph and record per-vertex edit counts.

    The sample is partitioned with gamma scaled down proportionally so border
    effects show up at sample scale; edits forced by halo conflicts are
    booked as merge premium on their border owner, everything else as the
    owner's kt-safety cost.
    """
    from .anonymizer import anonymize  # deferred: calibration runs the anonymizer

    if sample_size < 1:
        raise CalibrationError("sample_size must be >= 1")
    if sample_size > g.num_vertices:
        raise CalibrationError("sample_size exceeds graph size")
    rng = np.random.default_rng(seed)
    from .candidates import _bfs_sample

    picked = sorted(_bfs_sample(g, sample_size, rng))
    sample_graph = g.induced_subgraph(picked)

    scaled_gamma = max(25, math.ceil(params.gamma * sample_size / max(1, g.num_vertices)))
    sub_params = params.replace(gamma=min(scaled_gamma, max(1, sample_size)),
                                collect_attribution=True, verify_output=False)
    _, _, report = anonymize(sample_graph, sub_params)
    attribution = report["attribution"]

    ball_sizes = {u: hop_neighborhood(sample_graph, u, params.n).size for u in picked}
    kt_cost = {u: 0 for u in picked}
    merge_cost: dict[int, int] = {}
    border: set[int] = set(attribution["border_vertices"])
    for owner, cnt in attribution["kt_edits"].items():
        if owner in kt_cost:
            kt_cost[owner] = cnt
    for owner, cnt in attribution["halo_forced_edits"].items():
        if owner in border:
            merge_cost[owner] = cnt
    for b in border:
        merge_cost.setdefault(b, 0)
    return CostSample(ball_sizes=ball_sizes, kt_cost=kt_cost,
                      merge_cost=merge_cost, sample_vertex_ids=picked)
