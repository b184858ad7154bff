"""Tab-separated graph files and schema headers.

Vertex file: ``id<TAB>A_1<TAB>...<TAB>A_d`` with ``-`` for a missing value,
preceded by ``#`` header lines declaring the attribute domains and the
sensitivity policy. Edge file: ``u<TAB>v`` per line, set semantics.

Released files never carry origin tags or any edit statistics; vertex ids are
re-randomized under the run seed on save so inserted vertices are not
positionally identifiable.
"""

from __future__ import annotations

import numpy as np

from .graph_core import (
    MISSING,
    MISSING_TOKEN,
    AttributedGraph,
    AttributeSchema,
    GraphError,
    SensitivityPolicy,
)

FORMAT_TAG = "# ktsafe graph v1"


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def _policy_header(policy: SensitivityPolicy) -> str:
    if policy.kind == "less_than":
        return f"# sensitive: less_than {policy.threshold}"
    return "# sensitive: values " + " ".join(sorted(policy.codes))


def _parse_header(lines, path) -> AttributeSchema | None:
    domains: dict[int, tuple[str, ...]] = {}
    policy = None
    for lineno, line in lines:
        body = line[1:].strip()
        if body.startswith("domain "):
            try:
                idx_part, codes_part = body[len("domain "):].split(":", 1)
                idx = int(idx_part)
            except ValueError:
                raise ParseError(path, lineno, f"bad domain header {line!r}")
            domains[idx] = tuple(codes_part.split())
        elif body.startswith("sensitive:"):
            toks = body[len("sensitive:"):].split()
            if not toks:
                raise ParseError(path, lineno, "empty sensitivity policy")
            if toks[0] == "less_than" and len(toks) == 2:
                policy = SensitivityPolicy(kind="less_than", threshold=toks[1])
            elif toks[0] == "values":
                policy = SensitivityPolicy(kind="values", codes=frozenset(toks[1:]))
            else:
                raise ParseError(path, lineno, f"bad sensitivity policy {line!r}")
    if not domains:
        return None
    if policy is None:
        raise ParseError(path, 0, "domains declared but sensitivity policy missing")
    if sorted(domains) != list(range(len(domains))):
        raise ParseError(path, 0, "domain headers must cover indices 0..d-1")
    return AttributeSchema(domains=tuple(domains[i] for i in range(len(domains))),
                           policy=policy)


def load_graph(vertex_path, edge_path, schema: AttributeSchema | None = None) -> AttributedGraph:
    """Read a graph from a vertex file and an edge file.

    The schema comes from the explicit argument or, failing that, from the
    vertex file's header. Malformed lines, out-of-domain codes, and dangling
    or self-loop edges raise with the offending line number.
    """
    header = []
    rows = []
    with open(vertex_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                header.append((lineno, line))
                continue
            rows.append((lineno, line))
    if schema is None:
        schema = _parse_header(header, vertex_path)
        if schema is None:
            raise ParseError(vertex_path, 0, "no schema argument and no domain headers")
    g = AttributedGraph(schema)
    for lineno, line in rows:
        parts = line.split("\t")
        if len(parts) != 1 + schema.d:
            raise ParseError(vertex_path, lineno,
                             f"expected id plus {schema.d} values, got {len(parts)} fields")
        try:
            vid = int(parts[0])
        except ValueError:
            raise ParseError(vertex_path, lineno, f"bad vertex id {parts[0]!r}")
        attrs = tuple(MISSING if tok == MISSING_TOKEN else tok for tok in parts[1:])
        try:
            g.add_vertex(vid, attrs)
        except GraphError as exc:
            raise ParseError(vertex_path, lineno, str(exc))
    with open(edge_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(edge_path, lineno, f"expected two fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(edge_path, lineno, f"bad edge endpoints {line!r}")
            try:
                g.add_edge(u, v)  # duplicates collapse silently (set semantics)
            except GraphError as exc:
                raise ParseError(edge_path, lineno, str(exc))
    return g


def save_graph(g: AttributedGraph, vertex_path, edge_path, seed: int = 0) -> dict[int, int]:
    """Write the released form of ``g``; returns the id relabeling used.

    Ids are permuted deterministically under ``seed`` and origin/provenance
    is dropped, so the files carry no trace of which vertices were inserted.
    """
    rng = np.random.default_rng(seed)
    old_ids = g.vertex_ids()
    perm = rng.permutation(len(old_ids))
    relabel = {old: int(perm[i]) for i, old in enumerate(old_ids)}
    schema = g.schema
    with open(vertex_path, "w", encoding="utf-8") as fh:
        fh.write(FORMAT_TAG + "\n")
        for j, dom in enumerate(schema.domains):
            fh.write(f"# domain {j}: " + " ".join(dom) + "\n")
        fh.write(_policy_header(schema.policy) + "\n")
        for new, old in sorted((relabel[o], o) for o in old_ids):
            attrs = g.vertex(old).attrs
            toks = [MISSING_TOKEN if a is MISSING else a for a in attrs]
            fh.write("\t".join([str(new)] + toks) + "\n")
    with open(edge_path, "w", encoding="utf-8") as fh:
        fh.write(FORMAT_TAG + "\n")
        out = sorted((min(relabel[u], relabel[v]), max(relabel[u], relabel[v]))
                     for u, v in g.edges())
        for u, v in out:
            fh.write(f"{u}\t{v}\n")
    return relabel
