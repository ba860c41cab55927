import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermentor.petri import (
    Arc,
    Net,
    NetState,
    NetSyntaxError,
    NotEnabledError,
    PetriError,
    Place,
    Transition,
    UnknownNodeError,
    bundled_net_path,
    classify_workflow,
    enabled,
    enabled_transitions,
    extend_workflow,
    fire,
    format_net,
    initial_state,
    load_net,
    parse_net,
    state_from_tokens,
    with_rewrite_limit,
    without_transition,
)

from oracles import random_net

CHAIN = """
net chain
place start init 1
place end
trans t
arc start -> t
arc t -> end
"""


def net_of(places, transitions, arcs):
    return Net(tuple(places), tuple(Transition(t) for t in transitions), tuple(arcs))


def test_parse_chain():
    net = parse_net(CHAIN)
    assert net.name == "chain"
    assert [p.id for p in net.places] == ["start", "end"]
    assert [t.id for t in net.transitions] == ["t"]
    assert net.arcs == (Arc("start", "t"), Arc("t", "end"))
    assert net.places[0].initial == 1
    assert net.places[1].capacity is None


def test_parse_options_and_labels():
    net = parse_net(
        'place p capacity 3 init 2 label "a \\"quoted\\" label"  # trailing comment\n'
        "trans t label \"go\"\n"
        "arc p -> t weight 2\n"
        "arc t -> p rewritable 4\n"
    )
    p = net.places[0]
    assert (p.capacity, p.initial, p.label) == (3, 2, 'a "quoted" label')
    assert net.arc("p", "t").weight == 2
    assert net.arc("t", "p").rewrite_limit == 4


def test_bundled_ssf_shape():
    net = load_net(bundled_net_path("ssf.net"))
    assert len(net.places) == 29
    assert len(net.transitions) == 17
    assert len(net.rewritable_arcs) == 9
    # every rewritable arc is a collect loop t1..t9 returning to its parameter place
    assert {a.source for a in net.rewritable_arcs} == {f"t{i}" for i in range(1, 10)}
    assert all(a.rewrite_limit == 1 for a in net.rewritable_arcs)
    study_inputs = [a for a in net.arcs if a.target in {f"t{i}" for i in range(10, 15)}]
    assert len(study_inputs) == 10 and all(a.weight == 2 for a in study_inputs)
    assert net.transitions[16].label == "adjust"


@pytest.mark.parametrize(
    "text, fragment, line",
    [
        ("place a\nplace b\narc a -> b\n", "place-to-place", 3),
        ("place a\nplace a\n", "duplicate id", 2),
        ("place a\ntrans t\narc a -> t\narc a -> t\n", "duplicate arc", 4),
        ("place a\ntrans t\narc a -> u\n", "undeclared", 3),
        ("place a capacity 1 init 2\n", "exceed capacity", 1),
        ("place a init x\n", "non-negative integer", 1),
        ("frobnicate a\n", "unknown statement", 1),
        ("arc a b\n", "expected '->'", 1),
        ('place a label "open\n', "unterminated", 1),
        ("trans t\nplace p\narc t -> p rewritable 0\n", "rewrite limit", 3),
    ],
)
def test_parse_errors(text, fragment, line):
    with pytest.raises(NetSyntaxError) as info:
        parse_net(text)
    assert fragment in str(info.value)
    assert info.value.line == line
    assert info.value.column >= 1


def test_parse_error_column():
    with pytest.raises(NetSyntaxError) as info:
        parse_net("place p capacity zero\n")
    assert info.value.column == 18


def test_format_round_trip():
    net = load_net(bundled_net_path("ssf.net"))
    again = parse_net(format_net(net))
    assert again == net


def test_initial_state():
    net = parse_net(CHAIN)
    s = initial_state(net)
    assert s.tokens(net) == {"start": 1, "end": 0}
    assert s.residual == ()

    loop = net_of([Place("p", None, 1)], ["t"], [Arc("p", "t"), Arc("t", "p", 1, 3)])
    assert initial_state(loop).residuals(loop) == {("t", "p"): 3}


def test_ssf_initial_state_with_limit_two():
    net = with_rewrite_limit(load_net(bundled_net_path("ssf.net")), 2)
    res = initial_state(net).residuals(net)
    assert len(res) == 9 and set(res.values()) == {2}


def test_enabled_basic():
    net = net_of([Place("p1", None, 1), Place("p2")], ["t"], [Arc("p1", "t"), Arc("t", "p2")])
    assert enabled(net, initial_state(net), "t")
    empty = state_from_tokens(net, {})
    assert not enabled(net, empty, "t")
    with pytest.raises(UnknownNodeError):
        enabled(net, empty, "nope")


def test_capacity_blocks_output():
    net = net_of([Place("p2", 1, 1)], ["t"], [Arc("t", "p2")])
    assert not enabled(net, initial_state(net), "t")
    net2 = net_of([Place("p2", 2, 1)], ["t"], [Arc("t", "p2")])
    assert enabled(net2, initial_state(net2), "t")


def test_capacity_self_loop_uses_net_change():
    # p full at capacity 2, t consumes 2 and returns 1: 2 - 2 + 1 = 1 <= 2
    net = net_of([Place("p", 2, 2)], ["t"], [Arc("p", "t", 2), Arc("t", "p", 1)])
    s = initial_state(net)
    assert enabled(net, s, "t")
    assert fire(net, s, "t").marking == (1,)


def test_fire_chain_and_purity():
    net = parse_net(CHAIN)
    s = initial_state(net)
    s2 = fire(net, s, "t")
    assert s2.tokens(net) == {"start": 0, "end": 1}
    assert s.tokens(net) == {"start": 1, "end": 0}
    assert fire(net, s, "t") == s2
    with pytest.raises(NotEnabledError):
        fire(net, s2, "t")


def test_self_loop_update():
    net = net_of([Place("p", None, 2)], ["t"], [Arc("p", "t", 2), Arc("t", "p", 1)])
    assert fire(net, initial_state(net), "t").marking == (1,)


def test_rewritable_feedback_loop():
    net = net_of([Place("p", None, 1)], ["t"], [Arc("p", "t"), Arc("t", "p", 1, 2)])
    s0 = initial_state(net)
    s1 = fire(net, s0, "t")
    s2 = fire(net, s1, "t")
    assert [s.marking[0] for s in (s0, s1, s2)] == [1, 1, 1]
    assert [s.residual[0] for s in (s0, s1, s2)] == [2, 1, 0]
    assert Arc("t", "p", 1, 2) not in s2.live_arcs(net)
    s3 = fire(net, s2, "t")
    assert s3 == NetState((0,), (0,))
    assert not enabled(net, s3, "t")


def test_rewritable_input_arc_is_masked():
    # once the rewritable input arc is gone, t no longer needs a token from q
    net = net_of(
        [Place("p", None, 3), Place("q", None, 1), Place("out")],
        ["t"],
        [Arc("p", "t"), Arc("q", "t", 1, 1), Arc("t", "out")],
    )
    s = fire(net, initial_state(net), "t")
    assert s.tokens(net) == {"p": 2, "q": 0, "out": 1}
    s = fire(net, s, "t")
    assert s.tokens(net) == {"p": 1, "q": 0, "out": 2}


def test_classify_workflow():
    info = classify_workflow(parse_net(CHAIN))
    assert info.is_workflow and (info.start_place, info.end_place) == ("start", "end")
    assert info.extension_transition is None

    two_sources = net_of(
        [Place("a", None, 1), Place("b", None, 1), Place("end")],
        ["t"],
        [Arc("a", "t"), Arc("b", "t"), Arc("t", "end")],
    )
    assert not classify_workflow(two_sources).is_workflow

    ssf = classify_workflow(load_net(bundled_net_path("ssf.net")))
    assert ssf.is_workflow
    assert (ssf.start_place, ssf.end_place, ssf.extension_transition) == ("P_start", "P_1", "t16")


def test_extend_workflow():
    net = parse_net(CHAIN)
    ext = extend_workflow(net)
    t = ext.transitions[-1].id
    assert ext.arc("end", t) is not None and ext.arc(t, "start") is not None
    assert classify_workflow(ext).extension_transition == t
    with pytest.raises(PetriError):
        extend_workflow(ext)
    with pytest.raises(PetriError):
        extend_workflow(net_of([Place("a", None, 1), Place("b", None, 1)], ["t"], [Arc("a", "t"), Arc("b", "t")]))


def test_extend_ssf_matches_bundled_extension():
    ssf = load_net(bundled_net_path("ssf.net"))
    base = without_transition(ssf, "t16")
    rebuilt = extend_workflow(base, "t16")
    assert {(a.source, a.target, a.weight) for a in rebuilt.arcs} == {
        (a.source, a.target, a.weight) for a in ssf.arcs
    }


def test_restore_on_reset_refills_budgets():
    ssf = load_net(bundled_net_path("ssf.net"))
    seq = ["t0"] + [f"t{i}" for i in range(1, 10) for _ in range(2)] + [f"t{i}" for i in range(10, 17)]
    for restore, expect_full in ((False, False), (True, True)):
        net = ssf.replace(restore_on_reset=restore)
        s = initial_state(net)
        for t in seq:
            s = fire(net, s, t)
        assert s.marking == initial_state(net).marking
        assert (s == initial_state(net)) is expect_full


# -- properties over random nets ---------------------------------------------


def _walk(net, rng, steps):
    s = initial_state(net)
    for _ in range(steps):
        ts = enabled_transitions(net, s)
        if not ts:
            return
        t = rng.choice(ts)
        yield s, t, fire(net, s, t)
        s = fire(net, s, t)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_token_conservation_capacity_and_monotone_removal(seed):
    rng = random.Random(seed)
    net = random_net(rng, capped=rng.random() < 0.5)
    for s, t, s2 in _walk(net, rng, 30):
        live = s.live_arcs(net)
        for i, p in enumerate(net.places):
            gain = sum(a.weight for a in live if a.source == t and a.target == p.id)
            loss = sum(a.weight for a in live if a.target == t and a.source == p.id)
            assert s2.marking[i] - s.marking[i] == gain - loss
            if p.capacity is not None:
                assert 0 <= s2.marking[i] <= p.capacity
        assert all(b <= a for a, b in zip(s.residual, s2.residual))
        assert set(s2.live_arcs(net)) <= set(live)
