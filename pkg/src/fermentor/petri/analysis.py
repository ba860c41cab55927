"""Reachability graphs and the verdicts computed on them.

Exploration is breadth first with transitions tried in declaration order, so
node numbering is a pure function of the net.  A state's identity includes
the residual rewrite budgets: equal markings with different budgets have
different futures.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from .net import (
    Net,
    NetState,
    PetriError,
    WorkflowInfo,
    classify_workflow,
    extended,
    initial_state,
    successors,
    unextended,
)

DEFAULT_BUDGET = 1_000_000

UNBOUNDED = "unbounded"
UNKNOWN = "unknown"


@dataclass
class ReachGraph:
    net: Net
    nodes: list[NetState]
    edges: list[tuple[int, str, int]]
    root: int = 0
    truncated: bool = False
    omega_witness: tuple[int, int] | None = None
    elapsed: float = 0.0
    index: dict[NetState, int] = field(default_factory=dict, repr=False)

    @property
    def complete(self) -> bool:
        return not self.truncated

    def successors(self) -> list[list[tuple[str, int]]]:
        out: list[list[tuple[str, int]]] = [[] for _ in self.nodes]
        for u, t, v in self.edges:
            out[u].append((t, v))
        return out

    def predecessors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for u, _, v in self.edges:
            out[v].append(u)
        return out


def _dominates(net: Net, big: NetState, small: NetState) -> bool:
    if big.residual != small.residual or big.marking == small.marking:
        return False
    for m1, m0, cap in zip(big.marking, small.marking, net.capacities):
        if m1 < m0:
            return False
        # growth confined to uncapacitated places keeps every run from
        # `small` replayable from `big`, which makes the growth repeatable
        if m1 != m0 and cap is not None:
            return False
    return True


def explore(net: Net, budget: int = DEFAULT_BUDGET, stop_on_omega: bool = False) -> ReachGraph:
    """Breadth-first construction of the reachability graph of ``net``.

    Stops with ``truncated=True`` as soon as a state beyond ``budget`` would
    be needed.  Along the BFS tree, a new state that strictly dominates one
    of its ancestors (same residuals, growth only in uncapacitated places)
    is recorded as ``omega_witness``: evidence that the net is unbounded.
    The check is skipped under ``restore_on_reset`` because a reset keyed to
    the initial marking does not commute with pumping tokens.  With
    ``stop_on_omega`` the search ends (truncated) at the first witness.
    """
    if budget < 1:
        raise PetriError("budget must be >= 1")
    t0 = time.perf_counter()
    root = initial_state(net)
    nodes = [root]
    index = {root: 0}
    parent = [-1]
    edges: list[tuple[int, str, int]] = []
    witness = None
    check_omega = not net.restore_on_reset and any(c is None for c in net.capacities)
    truncated = False
    queue = deque([0])
    while queue and not truncated:
        u = queue.popleft()
        for t, s in successors(net, nodes[u]):
            v = index.get(s)
            if v is None:
                if len(nodes) >= budget:
                    truncated = True
                    break
                v = len(nodes)
                nodes.append(s)
                index[s] = v
                parent.append(u)
                queue.append(v)
                if check_omega and witness is None:
                    a = u
                    while a >= 0:
                        if _dominates(net, s, nodes[a]):
                            witness = (a, v)
                            break
                        a = parent[a]
                    if witness is not None and stop_on_omega:
                        edges.append((u, t, v))
                        truncated = True
                        break
            edges.append((u, t, v))
    return ReachGraph(
        net, nodes, edges, 0, truncated, witness, time.perf_counter() - t0, index
    )


def bounds(graph: ReachGraph) -> dict[str, int | str]:
    """Per-place bound: exact on complete graphs, else unbounded/unknown."""
    net = graph.net
    if graph.omega_witness is not None:
        a, d = graph.omega_witness
        grown = {
            i for i, (x, y) in enumerate(zip(graph.nodes[d].marking, graph.nodes[a].marking)) if x > y
        }
    else:
        grown = set()
    out: dict[str, int | str] = {}
    for i, p in enumerate(net.places):
        if i in grown:
            out[p.id] = UNBOUNDED
        elif graph.truncated:
            out[p.id] = UNKNOWN
        else:
            out[p.id] = max(s.marking[i] for s in graph.nodes)
    return out


def _backward_closure(preds: list[list[int]], targets) -> set[int]:
    seen = set(targets)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for u in preds[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def liveness(graph: ReachGraph) -> dict[str, bool | None]:
    """A transition is live when every node can reach a node enabling it.

    Values are ``None`` (unknown) on truncated graphs.
    """
    net = graph.net
    if graph.truncated:
        return {t.id: None for t in net.transitions}
    enabling: dict[str, set[int]] = {t.id: set() for t in net.transitions}
    for u, t, _ in graph.edges:
        enabling[t].add(u)
    preds = graph.predecessors()
    n = len(graph.nodes)
    out = {}
    for t in net.transitions:
        if not enabling[t.id]:
            out[t.id] = False
        else:
            out[t.id] = len(_backward_closure(preds, enabling[t.id])) == n
    return out


# -- verdicts -----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    clause: str
    message: str
    witness: dict | None = None

    def to_dict(self):
        return {"clause": self.clause, "message": self.message, "witness": self.witness}


@dataclass(frozen=True)
class Verdict:
    """``status`` is sound/unsound/unknown for the direct check and
    holds/fails/unknown for the liveness-and-boundedness route."""

    status: str
    violations: tuple[Violation, ...] = ()
    note: str = ""

    @property
    def reason(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def to_dict(self):
        return {
            "status": self.status,
            "violations": [v.to_dict() for v in self.violations],
            "note": self.note,
        }


def _sparse(net: Net, state: NetState) -> dict:
    return {
        "marking": {p.id: m for p, m in zip(net.places, state.marking) if m},
        "residual": {f"{a.source}->{a.target}": r for a, r in zip(net.rewritable_arcs, state.residual)},
    }


def soundness(net: Net, workflow: WorkflowInfo, graph: ReachGraph) -> Verdict:
    """Check the three soundness clauses on the graph of the unextended workflow.

    1. every reachable state can reach the end marking (one token on end,
       nothing elsewhere);
    2. any reachable marking covering the end marking equals it;
    3. every transition labels at least one edge.

    All violated clauses are listed, lowest clause first.
    """
    if not workflow.is_workflow:
        raise PetriError(f"net {net.name!r} is not a workflow")
    if graph.truncated:
        return Verdict(UNKNOWN, note="state budget exhausted before the graph was complete")
    net = graph.net
    end = net.place_index[workflow.end_place]
    m_end = tuple(1 if i == end else 0 for i in range(len(net.places)))
    final = [i for i, s in enumerate(graph.nodes) if s.marking == m_end]
    violations = []

    can_finish = _backward_closure(graph.predecessors(), final)
    stuck = next((i for i in range(len(graph.nodes)) if i not in can_finish), None)
    if stuck is not None:
        violations.append(Violation(
            "1", "a reachable state cannot reach the end marking",
            _sparse(net, graph.nodes[stuck]),
        ))

    for s in graph.nodes:
        if s.marking != m_end and all(x >= y for x, y in zip(s.marking, m_end)):
            violations.append(Violation(
                "2", "end place marked while tokens remain elsewhere", _sparse(net, s)
            ))
            break

    fired = {t for _, t, _ in graph.edges}
    dead = [t.id for t in net.transitions if t.id not in fired]
    if dead:
        violations.append(Violation(
            "3", f"transition {dead[0]} never fires", {"transitions": dead}
        ))
    return Verdict("unsound" if violations else "sound", tuple(violations))


def theorem_from_graph(graph: ReachGraph) -> Verdict:
    """Liveness-and-boundedness verdict on a graph of the extended workflow."""
    net = graph.net
    b = bounds(graph)
    unb = [p for p, v in b.items() if v == UNBOUNDED]
    if unb:
        a, d = graph.omega_witness
        return Verdict("fails", (Violation(
            "bounded", f"place {unb[0]} is unbounded",
            {"ancestor": _sparse(net, graph.nodes[a]), "descendant": _sparse(net, graph.nodes[d])},
        ),))
    if graph.truncated:
        return Verdict(UNKNOWN, note="state budget exhausted before the graph was complete")
    live = liveness(graph)
    not_live = [t for t, ok in live.items() if not ok]
    if not_live:
        return Verdict("fails", (Violation(
            "live", f"transition {not_live[0]} is not live", {"transitions": not_live}
        ),))
    return Verdict("holds")


def soundness_via_theorem1(net: Net, workflow: WorkflowInfo | None = None,
                           budget: int = DEFAULT_BUDGET) -> Verdict:
    """Sound if the extended workflow is live and bounded."""
    workflow = workflow or classify_workflow(net)
    if not workflow.is_workflow:
        raise PetriError(f"net {net.name!r} is not a workflow")
    return theorem_from_graph(explore(extended(net), budget, stop_on_omega=True))


@dataclass
class AnalysisReport:
    net: str
    workflow: WorkflowInfo
    bounds: dict
    live: dict
    sound: Verdict
    theorem1: Verdict
    stats: dict
    graph: ReachGraph | None = field(default=None, repr=False, compare=False)

    @property
    def exit_code(self) -> int:
        return {"sound": 0, "unsound": 1}.get(self.sound.status, 2)

    def to_dict(self, timing: bool = True) -> dict:
        stats = dict(self.stats)
        if not timing:
            stats.pop("wall_time", None)
        return {
            "net": self.net,
            "workflow": {
                "is_workflow": self.workflow.is_workflow,
                "start_place": self.workflow.start_place,
                "end_place": self.workflow.end_place,
                "extension_transition": self.workflow.extension_transition,
            },
            "bounds": self.bounds,
            "live": self.live,
            "sound": self.sound.to_dict(),
            "theorem1": self.theorem1.to_dict(),
            "stats": stats,
        }


def analyze(net: Net, budget: int = DEFAULT_BUDGET) -> AnalysisReport:
    """Full verification pass.

    Bounds and liveness describe the extended workflow (the net itself if it
    is not a workflow); soundness is checked directly on the workflow
    without its extension and, independently, through liveness and
    boundedness of the extension.
    """
    t0 = time.perf_counter()
    info = classify_workflow(net)
    if info.is_workflow:
        ext_graph = explore(extended(net), budget, stop_on_omega=True)
        base_graph = explore(unextended(net), budget)
        sound = soundness(net, info, base_graph)
        theorem = theorem_from_graph(ext_graph)
        stats = {
            "nodes": len(ext_graph.nodes),
            "edges": len(ext_graph.edges),
            "workflow_nodes": len(base_graph.nodes),
            "workflow_edges": len(base_graph.edges),
        }
    else:
        ext_graph = explore(net, budget)
        sound = Verdict(UNKNOWN, note="net is not a workflow")
        theorem = Verdict(UNKNOWN, note="net is not a workflow")
        stats = {"nodes": len(ext_graph.nodes), "edges": len(ext_graph.edges)}
    stats["truncated"] = ext_graph.truncated
    stats["wall_time"] = time.perf_counter() - t0
    return AnalysisReport(
        net.name, info, bounds(ext_graph), liveness(ext_graph), sound, theorem, stats, ext_graph
    )
