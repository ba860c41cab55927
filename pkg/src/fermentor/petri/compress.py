"""Reachability-graph compression by repeated and homogeneous sequences.

Two passes over a complete graph:

* star pass: a maximal chain of edges with one label ``t`` whose inner nodes
  have exactly one incoming and one outgoing edge becomes a single ``t*``
  edge;
* homogeneous pass: among the paths from ``u`` to ``v`` whose inner nodes
  have in/out degree one, any two or more paths with equal transition
  occurrence counts collapse into a single ``(σ)`` edge.

Only inner nodes of collapsed paths disappear, and every collapsed path is
replaced by an edge with the same endpoints, so reachability among the
remaining nodes is unchanged.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .analysis import ReachGraph
from .net import PetriError


@dataclass(frozen=True)
class EdgeLabel:
    kind: str  # "single", "star" or "parikh"
    counts: tuple[tuple[str, int], ...]

    @classmethod
    def single(cls, t: str) -> "EdgeLabel":
        return cls("single", ((t, 1),))

    def __str__(self) -> str:
        if self.kind == "single":
            return self.counts[0][0]
        if self.kind == "star":
            return f"{self.counts[0][0]}*"
        return "(" + ",".join(f"{t}:{n}" for t, n in self.counts) + ")"

    @property
    def parikh(self) -> Counter:
        return Counter(dict(self.counts))


@dataclass
class CompressedGraph:
    source: ReachGraph
    nodes: list[int]  # surviving node indices of the source graph
    edges: list[tuple[int, int, EdgeLabel]]

    @property
    def root(self) -> int:
        return self.source.root


def _degrees(nodes, edges):
    indeg = {n: 0 for n in nodes}
    outdeg = {n: 0 for n in nodes}
    for u, v, _ in edges:
        outdeg[u] += 1
        indeg[v] += 1
    return indeg, outdeg


def _star_pass(nodes, edges, root):
    indeg, outdeg = _degrees(nodes, edges)
    out_edge = {}
    in_label = {}
    for e in edges:
        u, v, lab = e
        if outdeg[u] == 1:
            out_edge[u] = e
        if indeg[v] == 1:
            in_label[v] = lab

    def inner(n, lab):
        # a pass-through node on a chain of `lab` edges
        return (n != root and indeg[n] == 1 and outdeg[n] == 1
                and in_label[n] == lab and out_edge[n][2] == lab)

    removed = set()
    new_edges = []
    consumed = set()
    for e in edges:
        u, v, lab = e
        if lab.kind != "single" or inner(u, lab):
            continue
        length = 1
        while inner(v, lab):
            removed.add(v)
            consumed.add(id(out_edge[v]))
            length += 1
            v = out_edge[v][1]
        consumed.add(id(e))
        t = lab.counts[0][0]
        new_edges.append((u, v, EdgeLabel("star", ((t, length),)) if length > 1 else lab))
    # edges on pure cycles of pass-through nodes are never chain heads; keep them
    for e in edges:
        if id(e) not in consumed and e[0] not in removed:
            new_edges.append(e)
    new_edges = [e for e in new_edges if e[0] not in removed and e[1] not in removed]
    return [n for n in nodes if n not in removed], new_edges


def _homogeneous_pass(nodes, edges, root):
    indeg, outdeg = _degrees(nodes, edges)
    out_edges = defaultdict(list)
    for e in edges:
        out_edges[e[0]].append(e)

    def passthrough(n):
        return n != root and indeg[n] == 1 and outdeg[n] == 1

    paths = defaultdict(list)  # (u, v, parikh key) -> [(inner nodes, edges)]
    for u in nodes:
        if passthrough(u):
            continue
        for e in out_edges[u]:
            inner_nodes, path = [], [e]
            v = e[1]
            while passthrough(v) and v != u:
                inner_nodes.append(v)
                nxt = out_edges[v][0]
                path.append(nxt)
                v = nxt[1]
            if passthrough(v):
                continue  # closed loop back through pass-through nodes
            counts = Counter()
            for _, _, lab in path:
                counts.update(lab.parikh)
            key = tuple(sorted(counts.items()))
            paths[(u, v, key)].append((inner_nodes, path))

    removed = set()
    drop = set()
    merged = []
    for (u, v, key), bundle in paths.items():
        if len(bundle) < 2:
            continue
        for inner_nodes, path in bundle:
            removed.update(inner_nodes)
            drop.update(id(e) for e in path)
        merged.append((u, v, EdgeLabel("parikh", key)))
    kept = [e for e in edges if id(e) not in drop]
    return [n for n in nodes if n not in removed], kept + merged


def compress(graph: ReachGraph) -> CompressedGraph:
    if graph.truncated:
        raise PetriError("cannot compress a truncated reachability graph")
    nodes = list(range(len(graph.nodes)))
    edges = [(u, v, EdgeLabel.single(t)) for u, t, v in graph.edges]
    nodes, edges = _star_pass(nodes, edges, graph.root)
    nodes, edges = _homogeneous_pass(nodes, edges, graph.root)
    order = {n: i for i, n in enumerate(nodes)}
    edges.sort(key=lambda e: (order[e[0]], order[e[1]], e[2].kind, e[2].counts))
    return CompressedGraph(graph, nodes, edges)


def reachability_matrix(nodes, edges) -> dict[int, set[int]]:
    """Reflexive-transitive successor sets keyed by node (for checks and tests)."""
    adj = defaultdict(set)
    for e in edges:
        adj[e[0]].add(e[1])
    out = {}
    for n in nodes:
        seen = {n}
        stack = [n]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        out[n] = seen
    return out
