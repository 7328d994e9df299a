import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grcsim.engine import (ContractViolation, MalformedPartition, NodeView, Simulation, Step,
                           dump_trace, form_circuits, make_partition, pin, pin_of, run_until_halt,
                           singleton_partition)
from grcsim.graph import Graph
from grcsim.mst import mst_construct

from conftest import code_of


def closure_by_networkx(g, k, partitions):
    """Circuits as connected components of the pin graph: one node per pin, one edge per binding."""
    pins = nx.Graph()
    pins.add_nodes_from(range(g.m * k))
    for v, part in enumerate(partitions):
        ids = [e * k + i for e in g.ports[v] for i in range(k)]
        for group in part:
            for a, b in zip(group, group[1:]):
                pins.add_edge(ids[a], ids[b])
    return sorted((frozenset(c) for c in nx.connected_components(pins)), key=min)


def test_pin_codes_roundtrip():
    for k in (1, 2, 3):
        for port in range(1, 5):
            for index in range(1, k + 1):
                assert pin_of(pin(port, index, k), k) == (port, index)


def test_four_node_two_pin_configuration_forms_three_circuits():
    g = Graph(4, [(0, 1), (1, 2), (1, 3), (2, 3)], k=2)

    def c(v, e, i):
        return code_of(g, v, e, i)

    parts = [
        singleton_partition(1, 2),
        make_partition(3, 2, [[c(1, 1, 1), c(1, 2, 1)], [c(1, 0, 2), c(1, 1, 2), c(1, 2, 2)]]),
        make_partition(2, 2, [[c(2, 1, 1), c(2, 3, 1)], [c(2, 1, 2), c(2, 3, 2)]]),
        # the last node keeps its pins apart, yet two of them end up on one circuit
        singleton_partition(2, 2),
    ]
    circuits = form_circuits(g, 2, parts)
    assert len(circuits.classes) == 3
    assert sorted(len(cl) for cl in circuits.classes) == [1, 3, 4]
    assert circuits.same_circuit(2 * 2 + 0, 3 * 2 + 0)


def test_all_singletons_gives_one_circuit_per_pin():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)], k=3)
    parts = [singleton_partition(g.degree(v), 3) for v in range(4)]
    assert form_circuits(g, 3, parts).classes == [frozenset([p]) for p in range(12)]


def test_middle_node_binding_joins_path():
    g = Graph(3, [(0, 1), (1, 2)])
    parts = [((0,),), ((0, 1),), ((0,),)]
    assert form_circuits(g, 1, parts).classes == [frozenset({0, 1})]


@st.composite
def graph_and_partitions(draw):
    n = draw(st.integers(2, 8))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    k = draw(st.integers(1, 3))
    g = Graph(n, edges, k=k)
    parts = []
    for v in range(n):
        codes = list(range(g.degree(v) * k))
        labels = draw(st.lists(st.integers(0, 3), min_size=len(codes), max_size=len(codes)))
        groups = {}
        for code, lab in zip(codes, labels):
            groups.setdefault(lab, []).append(code)
        parts.append(make_partition(g.degree(v), k, groups.values()))
    return g, k, parts


@settings(max_examples=300, deadline=None)
@given(graph_and_partitions())
def test_closure_matches_pin_graph_components(case):
    g, k, parts = case
    assert form_circuits(g, k, parts).classes == closure_by_networkx(g, k, parts)


def _scripted_program(script):
    """Program that replays ``script[v]``: a list of (beeps, partition) per round; records feedback."""

    def program(view):
        return _run(view, script)

    def _run(view, script):
        seen = []
        for beeps, part in script(view):
            fb = yield Step(beeps, part)
            seen.append(fb.bits())
        return seen

    return program


def test_lone_beeper_hears_itself():
    g = Graph(2, [(0, 1)])

    def script(view):
        yield ((0,) if view.local_input == "a" else ()), None

    res = run_until_halt(g, _scripted_program(script), inputs=["a", "b"])
    assert res.outputs == [["1"], ["1"]]


def test_far_nodes_on_one_circuit_both_hear():
    g = Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])

    def script(view):
        yield (), None
        whole = make_partition(view.degree, 1, [range(view.degree)])
        yield ((0,) if view.local_input == "talker" else ()), whole

    inputs = ["talker", None, None, None, None]
    res = run_until_halt(g, _scripted_program(script), inputs=inputs)
    assert res.outputs[0][1] == "1"
    assert res.outputs[4][1] == "1"
    assert all(set(o[0]) == {"0"} for o in res.outputs)


def test_halting_immediately_uses_no_rounds():
    def stop(view):
        if False:
            yield
        return view.degree

    g = Graph(3, [(0, 1), (1, 2)])
    res = run_until_halt(g, stop)
    assert res.rounds == 0
    assert res.outputs == [1, 2, 1]
    assert not res.timed_out


def test_mst_on_triangle_keeps_two_lightest(triangle):
    r = mst_construct(triangle, seed=4)
    assert r.edges == {0, 1}


def test_round_zero_must_be_singletons():
    g = Graph(2, [(0, 1)], k=2)

    def program(view):
        yield Step((), make_partition(1, 2, [[0, 1]]))

    with pytest.raises(MalformedPartition):
        run_until_halt(g, program)


@pytest.mark.parametrize("partition", [((0,), (0,)), ((0,),), ((0,), (1,), (5,)), ((0,), (), (1,))])
def test_malformed_partitions_are_rejected(partition):
    g = Graph(2, [(0, 1)], k=2)

    def program(view):
        yield Step(())
        yield Step((), partition)

    with pytest.raises(MalformedPartition):
        run_until_halt(g, program)


@pytest.mark.parametrize("beeps", [(7,), (-1,), ("x",)])
def test_beeping_on_foreign_pin_is_a_contract_violation(beeps):
    g = Graph(2, [(0, 1)], k=2)

    def program(view):
        yield Step(beeps)

    with pytest.raises(ContractViolation):
        run_until_halt(g, program)


def test_node_view_hides_global_structure():
    view = NodeView(3, 2, None, None)
    assert not hasattr(view, "n")
    assert not hasattr(view, "id")
    with pytest.raises(AttributeError):
        view.neighbours = []


def _coin_program(view):
    bits = []
    for _ in range(6):
        b = view.coin()
        bits.append(b)
        fb = yield Step((0,) if b and view.degree else ())
    return bits


def test_same_seed_same_trace_and_different_seed_differs():
    g = Graph(4, [(0, 1), (1, 2), (2, 3)])
    a = Simulation(g, _coin_program, 11, trace=True).run(100)
    b = Simulation(g, _coin_program, 11, trace=True).run(100)
    c = Simulation(g, _coin_program, 12, trace=True).run(100)
    assert dump_trace(a.trace, 1) == dump_trace(b.trace, 1)
    assert a.outputs != c.outputs


def test_timeout_is_flagged():
    def forever(view):
        while True:
            yield Step(())

    res = run_until_halt(Graph(2, [(0, 1)]), forever, max_rounds=5)
    assert res.timed_out and res.rounds == 5
    with pytest.raises(ValueError):
        run_until_halt(Graph(2, [(0, 1)]), forever, max_rounds=0)


def test_trace_lines_hold_partition_beeps_and_feedback():
    g = Graph(2, [(0, 1)], k=2)

    def program(view):
        yield Step((1,), None, "hello")

    res = Simulation(g, program, trace=True).run(10)
    lines = dump_trace(res.trace, 2).splitlines()
    assert lines[0] == "t=0 v=0 part=1.1|1.2 beeps=1.2 fb=01 state=hello"
    assert len(lines) == 2
