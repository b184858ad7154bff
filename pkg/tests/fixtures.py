"""Shared graph fixtures: the six-vertex social-network example and random graphs."""

from __future__ import annotations

import numpy as np

from ktsafe.graph_core import (
    FAKE,
    AttributedGraph,
    AttributeSchema,
    SensitivityPolicy,
)

# Two attributes: A1 is the quasi-identifier, A2 (salary-like) is sensitive
# when below 0.2.
FIG_SCHEMA = AttributeSchema(
    domains=(("0.4", "0.5", "0.6"), ("0.1", "0.2", "0.5", "0.7")),
    policy=SensitivityPolicy(kind="less_than", threshold="0.2"),
)

FIG1_ATTRS = {
    1: ("0.5", "0.7"),
    2: ("0.4", "0.5"),
    3: ("0.5", "0.5"),
    4: ("0.5", "0.1"),
    5: ("0.6", "0.5"),
    6: ("0.4", "0.5"),
}

FIG1_EDGES = [(1, 2), (1, 3), (1, 4), (4, 5), (4, 6), (2, 3), (5, 6)]


def fig1_graph() -> AttributedGraph:
    g = AttributedGraph(FIG_SCHEMA)
    for vid, attrs in FIG1_ATTRS.items():
        g.add_vertex(vid, attrs)
    for u, v in FIG1_EDGES:
        g.add_edge(u, v)
    return g


def fig2_graph() -> AttributedGraph:
    """fig1 plus one fake neighbor on each of the two hub vertices."""
    g = fig1_graph()
    g.add_vertex(7, ("0.6", "0.5"), origin=FAKE)
    g.add_vertex(8, ("0.5", "0.5"), origin=FAKE)
    g.add_edge(1, 7)
    g.add_edge(4, 8)
    return g


def small_schema(num_qi: int = 2, codes: int = 3) -> AttributeSchema:
    doms = tuple(tuple(str(c) for c in range(codes)) for _ in range(num_qi + 1))
    return AttributeSchema(domains=doms, policy=SensitivityPolicy(kind="values", codes=frozenset({"0"})))


def random_graph(n: int, p: float, seed: int, schema: AttributeSchema | None = None) -> AttributedGraph:
    """Erdos-Renyi graph with uniformly random attributes."""
    schema = schema or small_schema()
    rng = np.random.default_rng(seed)
    g = AttributedGraph(schema)
    for i in range(n):
        attrs = tuple(dom[rng.integers(0, len(dom))] for dom in schema.domains)
        g.add_vertex(i, attrs)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                g.add_edge(i, j)
    return g


def path_graph(labels, schema: AttributeSchema | None = None) -> AttributedGraph:
    schema = schema or small_schema(num_qi=1, codes=max(3, len(set(labels))))
    g = AttributedGraph(schema)
    for i, lab in enumerate(labels):
        g.add_vertex(i, (str(lab), schema.domains[-1][0]))
    for i in range(len(labels) - 1):
        g.add_edge(i, i + 1)
    return g
