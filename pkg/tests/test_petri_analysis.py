import json
import random
import re
from pathlib import Path

import pydot
import pytest

from fermentor.petri import (
    Arc,
    Net,
    PetriError,
    Place,
    Transition,
    analyze,
    bounds,
    bundled_net_path,
    classify_workflow,
    compress,
    explore,
    export_dot,
    extend_workflow,
    liveness,
    load_net,
    parse_net,
    reachability_matrix,
    soundness,
    soundness_via_theorem1,
    unextended,
)

from oracles import brute_force_states, random_net

GOLDEN = Path(__file__).parent / "golden" / "ssf_counts.json"


def _nodes(dot):
    return [n for n in dot.get_nodes() if n.get_name() not in ("node", "edge", "graph")]


def net_of(places, transitions, arcs, name="n"):
    return Net(tuple(places), tuple(Transition(t) for t in transitions), tuple(arcs), name)


def chain():
    return net_of([Place("start", None, 1), Place("end")], ["t"], [Arc("start", "t"), Arc("t", "end")])


def bundled(name, **kw):
    return load_net(bundled_net_path(name)).replace(**kw)


def test_explore_chain():
    g = explore(chain())
    assert len(g.nodes) == 2 and g.edges == [(0, "t", 1)]
    assert not g.truncated and g.omega_witness is None


def test_explore_rewritable_loop_has_four_states():
    net = net_of([Place("p", None, 1)], ["t"], [Arc("p", "t"), Arc("t", "p", 1, 2)])
    g = explore(net)
    assert [(s.marking, s.residual) for s in g.nodes] == [
        ((1,), (2,)), ((1,), (1,)), ((1,), (0,)), ((0,), (0,))
    ]


def test_producer_is_unbounded():
    net = net_of([Place("p")], ["t"], [Arc("t", "p")])
    g = explore(net, budget=50)
    assert g.truncated
    assert g.omega_witness is not None
    assert bounds(g) == {"p": "unbounded"}
    assert liveness(g) == {"t": None}


def test_capacity_domination_is_not_unboundedness():
    # p grows but is capped: growth in a capacitated place proves nothing
    net = net_of([Place("p", 3)], ["t"], [Arc("t", "p")])
    g = explore(net)
    assert g.omega_witness is None and len(g.nodes) == 4
    assert bounds(g) == {"p": 3}


def test_budget_validation_and_truncation():
    with pytest.raises(PetriError):
        explore(chain(), budget=0)
    g = explore(chain(), budget=1)
    assert g.truncated and len(g.nodes) == 1
    assert bounds(g) == {"start": "unknown", "end": "unknown"}


def test_explore_deterministic():
    net = bundled("parallel.net")
    g1, g2 = explore(net), explore(net)
    assert g1.nodes == g2.nodes and g1.edges == g2.edges


def test_every_edge_is_a_firing():
    from fermentor.petri import fire

    net = bundled("parallel.net")
    g = explore(net)
    for u, t, v in g.edges:
        assert fire(net, g.nodes[u], t) == g.nodes[v]


@pytest.mark.parametrize("seed", range(25))
def test_explore_matches_brute_force(seed):
    net = random_net(random.Random(seed))
    g = explore(net)
    assert set((s.marking, s.residual) for s in g.nodes) == brute_force_states(net)
    states = brute_force_states(net)
    for i, p in enumerate(net.places):
        assert bounds(g)[p.id] == max(m[i] for m, _ in states)


def test_bounds_fork():
    # two producers feed p, so two tokens can coexist there
    net = net_of(
        [Place("a", None, 1), Place("b", None, 1), Place("p")],
        ["ta", "tb"],
        [Arc("a", "ta"), Arc("ta", "p"), Arc("b", "tb"), Arc("tb", "p")],
    )
    assert bounds(explore(net)) == {"a": 1, "b": 1, "p": 2}


def test_bounds_chain():
    assert bounds(explore(chain())) == {"start": 1, "end": 1}


def test_liveness():
    assert liveness(explore(extend_workflow(chain()))) == {"t": True, "t_ext": True}
    assert liveness(explore(chain())) == {"t": False}
    dead = net_of(
        [Place("a", None, 1), Place("b")],
        ["t", "u"],
        [Arc("a", "t"), Arc("t", "a"), Arc("b", "u")],
    )
    assert liveness(explore(dead)) == {"t": True, "u": False}


def test_soundness_sequential():
    net = bundled("sequential.net")
    info = classify_workflow(net)
    assert soundness(net, info, explore(net)).status == "sound"
    assert soundness_via_theorem1(net, info).status == "holds"


def test_soundness_broken_xor_reports_leftover_token():
    net = bundled("broken_xor.net")
    v = soundness(net, classify_workflow(net), explore(net))
    assert v.status == "unsound"
    clause2 = [x for x in v.violations if x.clause == "2"]
    assert clause2
    assert clause2[0].witness["marking"] in ({"end": 1, "p2": 1}, {"end": 1, "p1": 1})
    assert soundness_via_theorem1(net).status == "fails"


def test_soundness_dead_transition():
    net = net_of(
        [Place("start", None, 1), Place("end"), Place("q")],
        ["t", "ghost"],
        [Arc("start", "t"), Arc("t", "end"), Arc("q", "ghost"), Arc("ghost", "end"), Arc("ghost", "q")],
    )
    # q is fed only by ghost, so ghost can never fire
    info = classify_workflow(net)
    assert info.is_workflow
    v = soundness(net, info, explore(net))
    assert v.status == "unsound" and [x.clause for x in v.violations] == ["3"]
    assert soundness_via_theorem1(net, info).status == "fails"


def test_soundness_rejects_non_workflow_and_truncation():
    net = net_of([Place("a", None, 1), Place("b", None, 1)], ["t"], [Arc("a", "t"), Arc("b", "t")])
    with pytest.raises(PetriError):
        soundness(net, classify_workflow(net), explore(net))
    with pytest.raises(PetriError):
        soundness_via_theorem1(net)
    seq = bundled("sequential.net")
    assert soundness(seq, classify_workflow(seq), explore(seq, budget=2)).status == "unknown"


def test_ssf_verdicts_and_golden_counts():
    golden = json.loads(GOLDEN.read_text())
    net = bundled("ssf.net", restore_on_reset=True)
    report = analyze(net)
    assert report.sound.status == "sound"
    assert report.theorem1.status == "holds"
    assert all(report.live.values())
    assert all(isinstance(b, int) for b in report.bounds.values())
    assert report.bounds == golden["bounds"]
    for key in ("nodes", "edges", "workflow_nodes", "workflow_edges"):
        assert report.stats[key] == golden["restore_on_reset"][key]

    # permanent removal: the second cycle cannot collect again
    plain = bundled("ssf.net")
    g = explore(plain)
    assert (len(g.nodes), len(g.edges)) == tuple(golden["permanent_removal"].values())
    assert soundness_via_theorem1(plain).status == "fails"


def test_ssf_state_count_matches_brute_force():
    golden = json.loads(GOLDEN.read_text())
    states = brute_force_states(unextended(bundled("ssf.net")))
    assert len(states) == golden["restore_on_reset"]["workflow_nodes"]


# -- compression -----------------------------------------------------------------


def test_star_compression_of_chain():
    net = parse_net(
        "place p init 3\nplace q\ntrans t\narc p -> t\narc t -> q\n"
    )
    g = explore(net)
    assert len(g.edges) == 3
    c = compress(g)
    assert [(u, v, str(lab)) for u, v, lab in c.edges] == [(0, 3, "t*")]
    assert c.nodes == [0, 3]


def test_diamond_merges_to_parikh_class():
    net = parse_net(
        "place a init 1\nplace b init 1\nplace a2\nplace b2\n"
        "trans t1\ntrans t2\narc a -> t1\narc t1 -> a2\narc b -> t2\narc t2 -> b2\n"
    )
    c = compress(explore(net))
    assert [(u, v, str(lab)) for u, v, lab in c.edges] == [(0, 3, "(t1:1,t2:1)")]


def test_unequal_diamond_is_kept():
    # two routes from the root to the same marking with different occurrence counts
    net = parse_net(
        "place a init 2\nplace b\ntrans x\ntrans y\n"
        "arc a -> x\narc x -> b\narc a -> y weight 2\narc y -> b weight 2\n"
    )
    g = explore(net)
    c = compress(g)
    labels = sorted(str(lab) for _, _, lab in c.edges)
    assert "y" in labels and "x*" in labels
    assert not any(lab.kind == "parikh" for _, _, lab in c.edges)


def _assert_reachability_preserved(g):
    c = compress(g)
    before = reachability_matrix(range(len(g.nodes)), [(u, v) for u, _, v in g.edges])
    after = reachability_matrix(c.nodes, c.edges)
    keep = set(c.nodes)
    for n in c.nodes:
        assert after[n] == before[n] & keep
    return c


@pytest.mark.parametrize("seed", range(40))
def test_compression_preserves_reachability(seed):
    g = explore(random_net(random.Random(1000 + seed)))
    _assert_reachability_preserved(g)


def test_compress_rejects_truncated():
    with pytest.raises(PetriError):
        compress(explore(chain(), budget=1))


# -- DOT ---------------------------------------------------------------------------


def test_dot_export():
    g = explore(chain())
    text = export_dot(g)
    assert text.count("[label=") == 3  # two nodes, one edge
    assert "m0 -> m1" in text
    assert export_dot(g) == text
    (parsed,) = pydot.graph_from_dot_data(text)
    assert len(_nodes(parsed)) == 2 and len(parsed.get_edges()) == 1


def test_dot_export_compressed_parses():
    c = compress(explore(bundled("parallel.net")))
    text = export_dot(c)
    (parsed,) = pydot.graph_from_dot_data(text)
    assert len(parsed.get_edges()) == len(c.edges)
    assert '"(ta:1,tb:1)"' in text


_STMT = re.compile(
    r'\s*(?:m\d+ \[label="(?:[^"\\]|\\.)*"(?:, peripheries=2)?\];'
    r'|m\d+ -> m\d+ \[label="(?:[^"\\]|\\.)*"\];'
    r'|rankdir=LR;|node \[shape=box\];)'
)


def _check_dot_subset(text):
    """Line grammar for the DOT subset the exporter writes; pydot is far too slow at this size."""
    lines = text.splitlines()
    assert re.fullmatch(r'digraph "(?:[^"\\]|\\.)*" \{', lines[0])
    assert lines[-1] == "}"
    for line in lines[1:-1]:
        assert _STMT.fullmatch(line), line
    return sum(" -> " in line for line in lines)


def test_dot_export_compressed_ssf_parses():
    c = compress(explore(unextended(bundled("ssf.net"))))
    text = export_dot(c)
    assert _check_dot_subset(text) == len(c.edges)
    # the checker agrees with pydot on a graph small enough for pydot
    small = export_dot(compress(explore(bundled("parallel.net"))))
    (parsed,) = pydot.graph_from_dot_data(small)
    assert _check_dot_subset(small) == len(parsed.get_edges())
