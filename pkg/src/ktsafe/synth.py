"""Seeded synthetic attributed graphs with uniform, gaussian, or zipf degrees.

Each vertex draws a target degree from the named family; edges are realized
with a configuration-model stub pairing that rejects self-loops and repeated
pairs, re-pairing rejected stubs for up to 100 rounds and discarding the
residue. Attributes are four-dimensional over codes 1..5, drawn from the same
family; code "1" is the sensitive value of the last attribute.

Family parameters are calibrated so a 10,000-node graph lands on the
published edge counts for these generators (uniform ~98K, gaussian ~164K,
zipf ~56K edges).
"""

from __future__ import annotations

import numpy as np

from .graph_core import AttributedGraph, AttributeSchema, SensitivityPolicy

KINDS = ("uniform", "gaussian", "zipf")

UNIFORM_MAX_DEGREE = 40
# The gaussian family's published edge count implies a mean degree of ~32.8;
# sigma stays at 8.
GAUSSIAN_MEAN = 32.8
GAUSSIAN_SIGMA = 8.0
ZIPF_EXPONENT = 0.8
ZIPF_MAX_DEGREE = 40

ATTR_COUNT = 4
ATTR_CODES = tuple(str(c) for c in range(1, 6))

SYNTH_SCHEMA = AttributeSchema(
    domains=tuple(ATTR_CODES for _ in range(ATTR_COUNT)),
    policy=SensitivityPolicy(kind="values", codes=frozenset({"1"})),
)


def _degree_sample(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "uniform":
        return rng.integers(0, UNIFORM_MAX_DEGREE + 1, size=n)
    if kind == "gaussian":
        d = np.rint(rng.normal(GAUSSIAN_MEAN, GAUSSIAN_SIGMA, size=n)).astype(int)
        return np.clip(d, 0, None)
    if kind == "zipf":
        support = np.arange(1, ZIPF_MAX_DEGREE + 1)
        probs = support.astype(float) ** (-ZIPF_EXPONENT)
        probs /= probs.sum()
        return rng.choice(support, size=n, p=probs)
    raise ValueError(f"unknown generator kind {kind!r}")


def _attr_sample(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    m = len(ATTR_CODES)
    if kind == "uniform":
        return rng.integers(0, m, size=n)
    if kind == "gaussian":
        codes = np.rint(rng.normal(3.0, 1.0, size=n)).astype(int)
        return np.clip(codes, 1, m) - 1
    if kind == "zipf":
        support = np.arange(1, m + 1)
        probs = support.astype(float) ** (-ZIPF_EXPONENT)
        probs /= probs.sum()
        return rng.choice(support, size=n, p=probs) - 1
    raise ValueError(f"unknown generator kind {kind!r}")


def generate_synthetic(kind: str, node_count: int, seed: int) -> AttributedGraph:
    """Deterministic attributed graph of ``node_count`` vertices."""
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    rng = np.random.default_rng(seed)

    g = AttributedGraph(SYNTH_SCHEMA)
    attr_cols = [_attr_sample(kind, node_count, rng) for _ in range(ATTR_COUNT)]
    for i in range(node_count):
        attrs = tuple(ATTR_CODES[int(col[i])] for col in attr_cols)
        g.add_vertex(i, attrs)

    degrees = np.minimum(_degree_sample(kind, node_count, rng), node_count - 1)
    stubs = np.repeat(np.arange(node_count), degrees)
    for _ in range(100):
        if len(stubs) < 2:
            break
        rng.shuffle(stubs)
        if len(stubs) % 2 == 1:
            stubs, odd = stubs[:-1], stubs[-1:]
        else:
            odd = stubs[:0]
        left, right = stubs[0::2], stubs[1::2]
        rejected = [int(x) for x in odd]
        for u, v in zip(left, right):
            u, v = int(u), int(v)
            if u == v or g.has_edge(u, v):
                rejected.append(u)
                rejected.append(v)
            else:
                g.add_edge(u, v)
        if not rejected:
            break
        stubs = np.array(rejected, dtype=np.int64)
    return g
