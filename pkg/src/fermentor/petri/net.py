"""Edge-rewritable Petri nets and the token game.

A net is immutable structure (places, transitions, weighted arcs).  Arcs may
carry a rewrite limit: the arc stays in the flow relation until the
transition at its transition end has fired that many times, after which it
is masked out of every preset/post-set.  The dynamic part of the net lives
in :class:`NetState`, which pairs the marking with the residual firing budget
of every rewritable arc.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping


class PetriError(ValueError):
    """Structural or semantic misuse of a net."""


class NotEnabledError(PetriError):
    pass


class UnknownNodeError(PetriError, KeyError):
    pass


@dataclass(frozen=True)
class Place:
    id: str
    capacity: int | None = None  # None means unbounded
    initial: int = 0
    label: str = ""


@dataclass(frozen=True)
class Transition:
    id: str
    label: str = ""


@dataclass(frozen=True)
class Arc:
    source: str
    target: str
    weight: int = 1
    rewrite_limit: int | None = None

    @property
    def rewritable(self) -> bool:
        return self.rewrite_limit is not None


@dataclass(frozen=True)
class _Compiled:
    # per transition: ((place_index, weight, slot), ...), slot -1 = not rewritable
    inputs: tuple
    outputs: tuple
    slots: tuple
    # inputs on ordinary arcs: a cheap necessary condition for enabling
    fixed_needs: tuple = ()
    # precomputed (delta, needs, produced) when no arc of the transition is rewritable
    static: tuple | None = None


@dataclass(frozen=True)
class Net:
    """Validated edge-rewritable Petri net.

    ``restore_on_reset`` makes the workflow extension transition refill every
    rewrite budget when its firing brings the marking back to the initial
    one.  Off by default: removed arcs stay removed.
    """

    places: tuple[Place, ...]
    transitions: tuple[Transition, ...]
    arcs: tuple[Arc, ...]
    name: str = "net"
    restore_on_reset: bool = False

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        _validate(self)

    @cached_property
    def place_index(self) -> dict[str, int]:
        return {p.id: i for i, p in enumerate(self.places)}

    @cached_property
    def transition_index(self) -> dict[str, int]:
        return {t.id: i for i, t in enumerate(self.transitions)}

    @cached_property
    def rewritable_arcs(self) -> tuple[Arc, ...]:
        """Rewritable arcs in declaration order; residual tuples follow this order."""
        return tuple(a for a in self.arcs if a.rewritable)

    @cached_property
    def capacities(self) -> tuple[int | None, ...]:
        return tuple(p.capacity for p in self.places)

    @cached_property
    def _compiled(self) -> tuple[_Compiled, ...]:
        slot_of = {id(a): i for i, a in enumerate(self.rewritable_arcs)}
        ins = [[] for _ in self.transitions]
        outs = [[] for _ in self.transitions]
        slots = [[] for _ in self.transitions]
        for a in self.arcs:
            slot = slot_of.get(id(a), -1)
            if a.source in self.transition_index:
                ti = self.transition_index[a.source]
                outs[ti].append((self.place_index[a.target], a.weight, slot))
            else:
                ti = self.transition_index[a.target]
                ins[ti].append((self.place_index[a.source], a.weight, slot))
            if slot >= 0:
                slots[ti].append(slot)
        compiled = []
        for i, o, s in zip(ins, outs, slots):
            c = _Compiled(tuple(i), tuple(o), tuple(s),
                          tuple((p, w) for p, w, slot in i if slot < 0))
            if not s:
                d, needs, produced = _delta(c, ())
                c = dataclasses.replace(c, static=(d, tuple(needs), tuple(produced)))
            compiled.append(c)
        return tuple(compiled)

    @cached_property
    def workflow(self) -> "WorkflowInfo":
        return classify_workflow(self)

    def arc(self, source: str, target: str) -> Arc | None:
        for a in self.arcs:
            if a.source == source and a.target == target:
                return a
        return None

    def preset(self, node: str) -> tuple[str, ...]:
        return tuple(a.source for a in self.arcs if a.target == node)

    def postset(self, node: str) -> tuple[str, ...]:
        return tuple(a.target for a in self.arcs if a.source == node)

    def replace(self, **changes) -> "Net":
        return dataclasses.replace(self, **changes)


def _validate(net: Net) -> None:
    seen: set[str] = set()
    for node in (*net.places, *net.transitions):
        if node.id in seen:
            raise PetriError(f"duplicate id {node.id!r}")
        seen.add(node.id)
    places = {p.id for p in net.places}
    transitions = {t.id for t in net.transitions}
    for p in net.places:
        if p.initial < 0:
            raise PetriError(f"place {p.id!r}: negative initial tokens")
        if p.capacity is not None:
            if p.capacity < 1:
                raise PetriError(f"place {p.id!r}: capacity must be positive")
            if p.initial > p.capacity:
                raise PetriError(
                    f"place {p.id!r}: initial tokens {p.initial} exceed capacity {p.capacity}"
                )
    pairs: set[tuple[str, str]] = set()
    for a in net.arcs:
        for end in (a.source, a.target):
            if end not in seen:
                raise PetriError(f"arc {a.source}->{a.target}: undeclared node {end!r}")
        if (a.source in places) == (a.target in places):
            kind = "place-to-place" if a.source in places else "transition-to-transition"
            raise PetriError(f"arc {a.source}->{a.target}: {kind} arc")
        if (a.source, a.target) in pairs:
            raise PetriError(f"duplicate arc {a.source}->{a.target}")
        pairs.add((a.source, a.target))
        if a.weight < 1:
            raise PetriError(f"arc {a.source}->{a.target}: weight must be positive")
        if a.rewrite_limit is not None and a.rewrite_limit < 1:
            raise PetriError(f"arc {a.source}->{a.target}: rewrite limit must be >= 1")
    assert transitions.isdisjoint(places)


@dataclass(frozen=True)
class NetState:
    """Marking plus residual rewrite budgets, both positional.

    ``marking[i]`` belongs to ``net.places[i]`` and ``residual[j]`` to
    ``net.rewritable_arcs[j]``.  States hash and compare by value.
    """

    marking: tuple[int, ...]
    residual: tuple[int, ...] = ()

    def tokens(self, net: Net) -> dict[str, int]:
        return {p.id: m for p, m in zip(net.places, self.marking)}

    def residuals(self, net: Net) -> dict[tuple[str, str], int]:
        return {(a.source, a.target): r for a, r in zip(net.rewritable_arcs, self.residual)}

    def live_arcs(self, net: Net) -> list[Arc]:
        live = []
        slot = 0
        for a in net.arcs:
            if a.rewritable:
                if self.residual[slot] > 0:
                    live.append(a)
                slot += 1
            else:
                live.append(a)
        return live


def initial_state(net: Net) -> NetState:
    return NetState(
        tuple(p.initial for p in net.places),
        tuple(a.rewrite_limit for a in net.rewritable_arcs),
    )


def state_from_tokens(net: Net, tokens: Mapping[str, int], residual: Mapping | None = None) -> NetState:
    """Build a state from a sparse marking; unspecified residuals start full."""
    for pid in tokens:
        if pid not in net.place_index:
            raise UnknownNodeError(pid)
    marking = tuple(int(tokens.get(p.id, 0)) for p in net.places)
    res = residual or {}
    return NetState(
        marking,
        tuple(int(res.get((a.source, a.target), a.rewrite_limit)) for a in net.rewritable_arcs),
    )


def _tindex(net: Net, t: str) -> int:
    try:
        return net.transition_index[t]
    except KeyError:
        raise UnknownNodeError(f"unknown transition {t!r}") from None


def _delta(comp: _Compiled, residual: tuple[int, ...]):
    delta: dict[int, int] = {}
    needs = []
    for p, w, slot in comp.inputs:
        if slot < 0 or residual[slot] > 0:
            delta[p] = delta.get(p, 0) - w
            needs.append((p, w))
    produced = []
    for p, w, slot in comp.outputs:
        if slot < 0 or residual[slot] > 0:
            delta[p] = delta.get(p, 0) + w
            produced.append(p)
    return delta, needs, produced


def _enabled(net: Net, state: NetState, ti: int) -> bool:
    comp = net._compiled[ti]
    marking = state.marking
    delta, needs, produced = _delta(comp, state.residual)
    for p, w in needs:
        if marking[p] < w:
            return False
    caps = net.capacities
    for p in produced:
        k = caps[p]
        if k is not None and marking[p] + delta[p] > k:
            return False
    return True


def enabled(net: Net, state: NetState, t: str) -> bool:
    return _enabled(net, state, _tindex(net, t))


def enabled_transitions(net: Net, state: NetState) -> list[str]:
    return [t.id for i, t in enumerate(net.transitions) if _enabled(net, state, i)]


def _fire(net: Net, state: NetState, ti: int) -> NetState:
    comp = net._compiled[ti]
    delta, _, _ = _delta(comp, state.residual)
    marking = list(state.marking)
    for p, d in delta.items():
        marking[p] += d
    residual = list(state.residual)
    for slot in comp.slots:
        if residual[slot] > 0:
            residual[slot] -= 1
    marking_t = tuple(marking)
    if net.restore_on_reset and net.transitions[ti].id == net.workflow.extension_transition:
        init = initial_state(net)
        if marking_t == init.marking:
            return init
    return NetState(marking_t, tuple(residual))


def fire(net: Net, state: NetState, t: str) -> NetState:
    """Fire ``t`` and return the successor; ``state`` is left untouched."""
    ti = _tindex(net, t)
    if not _enabled(net, state, ti):
        raise NotEnabledError(f"transition {t!r} is not enabled")
    return _fire(net, state, ti)


def successors(net: Net, state: NetState) -> list[tuple[str, NetState]]:
    """All ``(transition id, successor)`` pairs in declaration order."""
    out = []
    marking = state.marking
    residual = state.residual
    caps = net.capacities
    restore = net.restore_on_reset
    for ti, comp in enumerate(net._compiled):
        if any(marking[p] < w for p, w in comp.fixed_needs):
            continue
        delta, needs, produced = comp.static or _delta(comp, residual)
        if any(marking[p] < w for p, w in needs):
            continue
        if any(caps[p] is not None and marking[p] + delta[p] > caps[p] for p in produced):
            continue
        if restore:
            out.append((net.transitions[ti].id, _fire(net, state, ti)))
            continue
        new = list(marking)
        for p, d in delta.items():
            new[p] += d
        if comp.slots:
            res = list(residual)
            for slot in comp.slots:
                if res[slot] > 0:
                    res[slot] -= 1
            res = tuple(res)
        else:
            res = residual
        out.append((net.transitions[ti].id, NetState(tuple(new), res)))
    return out


def fire_sequence(net: Net, state: NetState, sequence: Iterable[str]) -> NetState:
    for t in sequence:
        state = fire(net, state, t)
    return state


# -- workflow structure -------------------------------------------------------


@dataclass(frozen=True)
class WorkflowInfo:
    start_place: str | None
    end_place: str | None
    is_workflow: bool
    extension_transition: str | None = None
    sources: tuple[str, ...] = field(default=(), compare=False)
    sinks: tuple[str, ...] = field(default=(), compare=False)


def _is_extension(net: Net, t: str) -> tuple[str, str] | None:
    pre, post = net.preset(t), net.postset(t)
    if len(pre) == 1 and len(post) == 1 and pre != post:
        return pre[0], post[0]
    return None


def classify_workflow(net: Net) -> WorkflowInfo:
    """Find the start/end places, looking through a possible extension transition.

    A transition with a single input place and a single output place whose
    removal leaves the input place as the unique sink and the output place as
    the unique source is reported as the extension transition.
    """
    def shape(skip: str | None):
        arcs = [a for a in net.arcs if skip not in (a.source, a.target)]
        has_in = {a.target for a in arcs}
        has_out = {a.source for a in arcs}
        sources = tuple(p.id for p in net.places if p.id not in has_in)
        sinks = tuple(p.id for p in net.places if p.id not in has_out)
        return sources, sinks

    sources, sinks = shape(None)
    if len(sources) == 1 and len(sinks) == 1 and sources != sinks:
        return WorkflowInfo(sources[0], sinks[0], True, None, sources, sinks)
    for t in reversed(net.transitions):
        ends = _is_extension(net, t.id)
        if ends is None:
            continue
        end, start = ends
        s2, k2 = shape(t.id)
        if s2 == (start,) and k2 == (end,):
            return WorkflowInfo(start, end, True, t.id, s2, k2)
    return WorkflowInfo(
        sources[0] if len(sources) == 1 else None,
        sinks[0] if len(sinks) == 1 else None,
        False,
        None,
        sources,
        sinks,
    )


def extend_workflow(net: Net, transition_id: str = "t_ext") -> Net:
    """Add a transition consuming from the end place and producing into start."""
    info = classify_workflow(net)
    if not info.is_workflow:
        raise PetriError(f"net {net.name!r} is not a workflow")
    if info.extension_transition is not None:
        raise PetriError(
            f"net {net.name!r} already has extension transition {info.extension_transition!r}"
        )
    tid = transition_id
    taken = set(net.place_index) | set(net.transition_index)
    n = 1
    while tid in taken:
        tid = f"{transition_id}{n}"
        n += 1
    return net.replace(
        transitions=(*net.transitions, Transition(tid, "extension")),
        arcs=(*net.arcs, Arc(info.end_place, tid), Arc(tid, info.start_place)),
    )


def without_transition(net: Net, t: str) -> Net:
    _tindex(net, t)
    return net.replace(
        transitions=tuple(x for x in net.transitions if x.id != t),
        arcs=tuple(a for a in net.arcs if t not in (a.source, a.target)),
    )


def unextended(net: Net) -> Net:
    """The workflow with its extension transition (if any) stripped."""
    ext = net.workflow.extension_transition
    return without_transition(net, ext) if ext else net


def extended(net: Net) -> Net:
    return net if net.workflow.extension_transition else extend_workflow(net)


def with_rewrite_limit(net: Net, limit: int) -> Net:
    """Override the rewrite limit of every rewritable arc."""
    return net.replace(
        arcs=tuple(
            dataclasses.replace(a, rewrite_limit=limit) if a.rewritable else a for a in net.arcs
        )
    )


def with_arc_weight(net: Net, source: str, target: str, weight: int) -> Net:
    if net.arc(source, target) is None:
        raise UnknownNodeError(f"no arc {source}->{target}")
    return net.replace(
        arcs=tuple(
            dataclasses.replace(a, weight=weight) if (a.source, a.target) == (source, target) else a
            for a in net.arcs
        )
    )
