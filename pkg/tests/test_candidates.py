from __future__ import annotations

import pytest

from ktsafe.candidates import (
    KtTree,
    PivotSet,
    build_kt_tree,
    initial_candidate,
    kt_tree_candidates,
    pivot_prunable,
    qi_signature,
    select_pivots,
)
from ktsafe.graph_core import AttributedGraph, GraphError

from .fixtures import fig1_graph, random_graph, small_schema


class TestInitialCandidate:
    def test_fig1_hub_candidates(self):
        # both hubs share QI 0.5 and structurally identical 1-hop balls
        g = fig1_graph()
        assert 4 in initial_candidate(g, 1, epsilon=5, n=1)

    def test_unique_qi_gives_empty(self):
        g = fig1_graph()
        assert initial_candidate(g, 5, epsilon=100, n=1) == []  # only 0.6 vertex

    def test_huge_epsilon_gives_all_qi_equal(self):
        g = fig1_graph()
        eps = 2 * (g.num_vertices + g.num_edges)
        assert initial_candidate(g, 1, epsilon=eps, n=1) == [3, 4]
        assert initial_candidate(g, 2, epsilon=eps, n=1) == [6]

    def test_unknown_vertex(self):
        with pytest.raises(GraphError):
            initial_candidate(fig1_graph(), 99, 1, 1)

    def test_epsilon_zero_excludes_mismatched(self):
        g = fig1_graph()
        assert initial_candidate(g, 1, epsilon=0, n=1) == [4]


class TestPivotPruning:
    def test_prunable_cases(self):
        assert pivot_prunable(10, 3, 5)
        assert not pivot_prunable(7, 7, 0)
        assert not pivot_prunable(4, 2, 2)  # gap equals epsilon: keep

    def test_pivot_filter_is_sound(self):
        for seed in range(20):
            g = random_graph(30, 0.15, seed)
            pivots = PivotSet(graph=g, pivots=[0, 7, 13], n=1)
            for v in list(g.vertex_ids())[:10]:
                plain = initial_candidate(g, v, epsilon=3, n=1)
                filtered = initial_candidate(g, v, epsilon=3, n=1, index=pivots)
                assert plain == filtered, (seed, v)

    def test_select_pivots_deterministic(self):
        g = random_graph(40, 0.1, 3)
        a = select_pivots(g, sample_size=15, iterations=5, pivot_count=3, epsilon=3, n=1, seed=9)
        b = select_pivots(g, sample_size=15, iterations=5, pivot_count=3, epsilon=3, n=1, seed=9)
        assert a.pivots == b.pivots

    def test_select_pivots_single_iteration_is_initial(self):
        g = random_graph(40, 0.1, 3)
        a = select_pivots(g, sample_size=10, iterations=1, pivot_count=4, epsilon=3, n=1, seed=5)
        assert len(a.pivots) == 4

    def test_more_iterations_never_prune_fewer(self):
        # keep-if-better: the accepted pruning count is non-decreasing
        g = random_graph(50, 0.12, 11)

        def count_for(pvts, sample):
            cnt = 0
            for v in sample:
                for m in sample:
                    if m != v and pvts.prunable(v, m, 3):
                        cnt += 1
            return cnt

        sample = list(g.vertex_ids())[:12]
        low = select_pivots(g, 12, 1, 3, 3, 1, seed=2)
        high = select_pivots(g, 12, 25, 3, 3, 1, seed=2)
        assert count_for(high, sample) >= count_for(low, sample)


class TestKtTree:
    def test_single_leaf_when_one_qi(self):
        schema = small_schema(num_qi=1, codes=3)
        g = AttributedGraph(schema)
        for i in range(5):
            g.add_vertex(i, ("1", "1"))
        g.add_edge(0, 1)
        pivots = PivotSet(graph=g, pivots=[0], n=1)
        tree = build_kt_tree(g, pivots, width=16, n=1)
        leaves = _leaves(tree.root)
        assert len(leaves) == 1
        assert leaves[0].member_ids == [0, 1, 2, 3, 4]

    def test_singleton_leaf_interval(self):
        g = fig1_graph()
        pivots = PivotSet(graph=g, pivots=[1], n=1)
        tree = build_kt_tree(g, pivots, width=32, n=1)
        for leaf in _leaves(tree.root):
            if len(leaf.member_ids) == 1:
                m = leaf.member_ids[0]
                d, exact = pivots.distance(leaf.pivot_id, m)
                assert exact and leaf.ged_interval == (d, d)

    def test_membership_completeness(self):
        # every vertex must survive the bit tests along some root-to-leaf path
        for seed in range(6):
            g = random_graph(50, 0.08, seed + 100)
            pivots = PivotSet(graph=g, pivots=[0, 5, 9, 14], n=1)
            tree = build_kt_tree(g, pivots, width=64, n=1)
            for v in g.vertex_ids():
                sig = qi_signature(g.schema, g.vertex(v).qi, tree.width)
                found = _find_vertex(tree.root, v, sig)
                assert found, (seed, v)

    def test_width_floor(self):
        g = fig1_graph()
        pivots = PivotSet(graph=g, pivots=[1], n=1)
        with pytest.raises(GraphError):
            build_kt_tree(g, pivots, width=4, n=1)

    def test_empty_graph_rejected(self):
        g = AttributedGraph(small_schema())
        with pytest.raises(GraphError):
            build_kt_tree(g, PivotSet.__new__(PivotSet), width=16, n=1)

    def test_oracle_equivalence(self):
        for seed in range(12):
            g = random_graph(40, 0.1, seed + 31)
            pivots = select_pivots(g, 15, 3, 4, 3, 1, seed=seed)
            tree = build_kt_tree(g, pivots, width=64, n=1)
            for v in list(g.vertex_ids())[::4]:
                plain = initial_candidate(g, v, epsilon=3, n=1)
                via_tree = kt_tree_candidates(tree, v, epsilon=3, n=1)
                assert plain == via_tree, (seed, v)

    def test_all_distinct_qis_prune_to_scan(self):
        schema = small_schema(num_qi=2, codes=4)
        g = AttributedGraph(schema)
        codes = [(a, b) for a in "0123" for b in "0123"]
        for i, (a, b) in enumerate(codes[:10]):
            g.add_vertex(i, (a, b, "1"))
        pivots = PivotSet(graph=g, pivots=[0], n=1)
        tree = build_kt_tree(g, pivots, width=64, n=1)
        for v in g.vertex_ids():
            assert kt_tree_candidates(tree, v, epsilon=10, n=1) == []


def _leaves(node):
    if node.is_leaf:
        return [node]
    out = []
    for ch in node.children:
        out.extend(_leaves(ch))
    return out


def _find_vertex(node, v, sig):
    if node.bit_vectors and any(sig[j] & node.bit_vectors[j] == 0 for j in range(len(sig))):
        return False
    if node.is_leaf:
        return v in node.member_ids
    return any(_find_vertex(ch, v, sig) for ch in node.children)
