from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ktsafe.graph_core import (
    MISSING,
    AttributedGraph,
    AttributeSchema,
    GraphError,
    PolicyError,
    SensitivityPolicy,
    attribute_pdf,
    hop_neighborhood,
    is_sensitive,
)

from .fixtures import FIG_SCHEMA, fig1_graph, path_graph, random_graph, small_schema


class TestSchema:
    def test_requires_two_attributes(self):
        with pytest.raises(ValueError):
            AttributeSchema(domains=(("a",),), policy=SensitivityPolicy("values"))

    def test_rejects_duplicate_codes(self):
        with pytest.raises(ValueError):
            AttributeSchema(domains=(("a", "a"), ("b",)), policy=SensitivityPolicy("values"))

    def test_rejects_empty_domain(self):
        with pytest.raises(ValueError):
            AttributeSchema(domains=((), ("b",)), policy=SensitivityPolicy("values"))


class TestGraphInvariants:
    def test_no_self_loops(self):
        g = fig1_graph()
        with pytest.raises(GraphError):
            g.add_edge(1, 1)

    def test_edges_need_vertices(self):
        g = fig1_graph()
        with pytest.raises(GraphError):
            g.add_edge(1, 99)

    def test_parallel_edges_collapse(self):
        g = fig1_graph()
        assert g.add_edge(2, 5)
        assert not g.add_edge(5, 2)
        assert g.num_edges == 8

    def test_attrs_validated(self):
        g = fig1_graph()
        with pytest.raises(GraphError):
            g.add_vertex(10, ("0.5",))  # wrong arity
        with pytest.raises(GraphError):
            g.add_vertex(10, ("nope", "0.5"))

    def test_duplicate_must_point_at_original(self):
        g = fig1_graph()
        with pytest.raises(GraphError):
            g.add_vertex(10, ("0.5", "0.5"), origin="duplicate", dup_of=77)
        g.add_vertex(10, ("0.5", "0.5"), origin="duplicate", dup_of=1)
        with pytest.raises(GraphError):
            g.add_vertex(11, ("0.5", "0.5"), origin="duplicate", dup_of=10)

    def test_copy_is_independent(self):
        g = fig1_graph()
        h = g.copy()
        h.add_vertex(10, ("0.5", "0.5"))
        h.add_edge(10, 1)
        assert 10 not in g
        assert g.num_edges == 7


class TestHopNeighborhood:
    def test_fig1_one_hop_of_hub(self):
        # Example 2: the hub's neighbors carry values {0.4, 0.5, 0.5}
        g = fig1_graph()
        hn = hop_neighborhood(g, 1, 1)
        assert sorted(hn.hop_of) == [1, 2, 3, 4]
        neighbor_vals = sorted(g.vertex(v).attrs[0] for v in hn.neighbor_ids())
        assert neighbor_vals == ["0.4", "0.5", "0.5"]

    def test_radius_zero(self):
        g = fig1_graph()
        hn = hop_neighborhood(g, 3, 0)
        assert hn.member_ids == [3]
        assert hn.member_edges == frozenset()

    def test_path_two_hops(self):
        g = path_graph(["0", "1", "2"])
        hn = hop_neighborhood(g, 0, 2)
        assert sorted(hn.hop_of) == [0, 1, 2]
        assert hn.member_edges == frozenset({(0, 1), (1, 2)})

    def test_unknown_vertex(self):
        with pytest.raises(GraphError):
            hop_neighborhood(fig1_graph(), 42, 1)

    def test_induced_edges_and_order(self):
        g = fig1_graph()
        hn = hop_neighborhood(g, 1, 1)
        assert hn.member_edges == frozenset({(1, 2), (1, 3), (1, 4), (2, 3)})
        assert hn.fringe_edges == frozenset({(2, 3)})
        assert hn.member_ids == [1, 2, 3, 4]  # (hop, id) ordering

    @given(st.integers(0, 10_000), st.integers(0, 3))
    @settings(max_examples=40, deadline=None)
    def test_balls_are_monotone(self, seed, n):
        g = random_graph(12, 0.3, seed)
        for v in g.vertex_ids():
            small = hop_neighborhood(g, v, n)
            big = hop_neighborhood(g, v, n + 1)
            assert set(small.hop_of) <= set(big.hop_of)
            assert small.member_edges <= big.member_edges

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_one_hop_size_is_degree_plus_one(self, seed):
        g = random_graph(15, 0.25, seed)
        for v in g.vertex_ids():
            assert hop_neighborhood(g, v, 1).size == g.degree(v) + 1


class TestSensitivity:
    def test_less_than_policy(self):
        assert is_sensitive("0.1", FIG_SCHEMA)
        assert not is_sensitive("0.7", FIG_SCHEMA)
        assert not is_sensitive("0.2", FIG_SCHEMA)  # strict less-than

    def test_missing_never_sensitive(self):
        assert not is_sensitive(MISSING, FIG_SCHEMA)

    def test_outside_domain(self):
        with pytest.raises(GraphError):
            is_sensitive("0.9", FIG_SCHEMA)

    def test_value_set_policy(self):
        schema = small_schema()
        assert is_sensitive("0", schema)
        assert not is_sensitive("1", schema)


class TestAttributePdf:
    def test_hand_counted_fig1(self):
        # hub ball members carry A1 values {0.5, 0.4, 0.5, 0.5}
        g = fig1_graph()
        hn = hop_neighborhood(g, 1, 1)
        assert attribute_pdf(hn, 0, FIG_SCHEMA) == {"0.4": 0.25, "0.5": 0.75}

    def test_singleton(self):
        g = fig1_graph()
        hn = hop_neighborhood(g, 5, 0)
        assert attribute_pdf(hn, 0, FIG_SCHEMA) == {"0.6": 1.0}

    def test_symmetry(self):
        g = path_graph(["0", "0", "1", "1"])
        g.add_edge(0, 3)  # cycle: ball(0,1) has values {0,0,1}
        hn = hop_neighborhood(g, 1, 1)
        assert attribute_pdf(hn, 0, g.schema) == {"0": 2 / 3, "1": 1 / 3}

    def test_sensitive_index_rejected(self):
        g = fig1_graph()
        hn = hop_neighborhood(g, 1, 1)
        with pytest.raises(PolicyError):
            attribute_pdf(hn, 1, FIG_SCHEMA)

    def test_missing_excluded(self):
        schema = small_schema(num_qi=1)
        g = AttributedGraph(schema)
        g.add_vertex(0, ("1", "1"))
        g.add_vertex(1, (MISSING, "1"))
        g.add_edge(0, 1)
        hn = hop_neighborhood(g, 0, 1)
        assert attribute_pdf(hn, 0, schema) == {"1": 1.0}

    def test_center_switch(self):
        g = fig1_graph()
        hn = hop_neighborhood(g, 1, 1)
        assert attribute_pdf(hn, 0, FIG_SCHEMA, include_center=False) == {
            "0.4": 1 / 3,
            "0.5": 2 / 3,
        }

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_pdf_normalized(self, seed):
        g = random_graph(12, 0.3, seed)
        for v in g.vertex_ids():
            hn = hop_neighborhood(g, v, 1)
            pdf = attribute_pdf(hn, 0, g.schema)
            assert abs(sum(pdf.values()) - 1.0) < 1e-12
            assert all(p >= 0 for p in pdf.values())
