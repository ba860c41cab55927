"""DOT rendering of reachability graphs (full or compressed)."""
from __future__ import annotations

from .analysis import ReachGraph
from .compress import CompressedGraph
from .net import NetState


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _marking_label(graph: ReachGraph, state: NetState) -> str:
    parts = [f"{p.id}:{m}" if m > 1 else p.id
             for p, m in zip(graph.net.places, state.marking) if m]
    return ",".join(parts) or "0"


def export_dot(graph: ReachGraph | CompressedGraph, name: str | None = None) -> str:
    """Deterministic DOT text; node labels list the marked places."""
    if isinstance(graph, CompressedGraph):
        base = graph.source
        nodes = graph.nodes
        edges = [(u, v, str(lab)) for u, v, lab in graph.edges]
    else:
        base = graph
        nodes = range(len(graph.nodes))
        edges = [(u, v, t) for u, t, v in graph.edges]
    title = _esc(name or base.net.name)
    lines = [f'digraph "{title}" {{', "  rankdir=LR;", "  node [shape=box];"]
    for n in nodes:
        label = _esc(f"M{n}\n" + _marking_label(base, base.nodes[n])).replace("\n", "\\n")
        style = ", peripheries=2" if n == base.root else ""
        lines.append(f'  m{n} [label="{label}"{style}];')
    for u, v, lab in edges:
        lines.append(f'  m{u} -> m{v} [label="{_esc(lab)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
