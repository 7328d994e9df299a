import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from grcsim import cutsim
from grcsim.cutsim import (SideMessage, TraceCorruption, cut_pins, merge_cut, name_width, project_classes,
                           random_cut, side_message, verify_round_equivalence)
from grcsim.engine import Step, default_rng_factory, form_circuits, global_pin_table, make_partition
from grcsim.graph import Graph, generate
from grcsim.mst import MSTProgram, port_weights
from grcsim.spanner import SpannerProgram


@pytest.mark.parametrize("q, width", [(0, 0), (1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (64, 6)])
def test_name_width(q, width):
    assert name_width(q) == width


@given(st.lists(st.tuples(st.integers(0, 7), st.booleans()), min_size=1, max_size=8))
def test_side_message_roundtrip(pairs):
    q = len(pairs)
    width = name_width(q)
    names = [min(nm, (1 << width) - 1) if width else 0 for nm, _ in pairs]
    msg = SideMessage(names, [b for _, b in pairs], width)
    text = msg.encode()
    assert len(text) == q * (width + 1)
    assert SideMessage.decode(text, q) == msg


def test_decode_rejects_wrong_length():
    with pytest.raises(ValueError):
        SideMessage.decode("101", 2)


def test_cut_pins_follow_edge_then_index_order():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert cut_pins(g, {0, 1}, 2) == [2, 3, 6, 7]


def test_names_follow_first_appearance():
    msg = side_message([10, 11, 12, 13], {10: 5, 11: 2, 12: 5, 13: 9}, {2})
    assert msg.names == [0, 1, 0, 2]
    assert msg.beeps == [False, True, False, False]


def test_merge_chains_names_across_sides():
    # A joins pins 0-1 and 2-3, B joins 1-2: all four pins form one circuit
    a = SideMessage([0, 0, 1, 1], [False, False, False, True], 2)
    b = SideMessage([0, 1, 1, 2], [False, False, False, False], 2)
    assert merge_cut(a, b) == [True] * 4
    assert merge_cut(a, SideMessage([0, 1, 2, 3], [False] * 4, 2)) == [False, False, True, True]


def test_single_binder_has_one_class_per_side():
    g = generate("star", 4, k=2)
    tables = global_pin_table(g, 2)
    parts = [make_partition(3, 2, [range(6)])] + [make_partition(1, 2, []) for _ in range(3)]
    classes = project_classes(tables, 2, parts, [0])
    assert len(set(classes.values())) == 1
    leaf = project_classes(tables, 2, parts, [1])
    assert len(set(leaf.values())) == 2


def test_gluing_side_classes_reproduces_circuits():
    rng = random.Random(2)
    for _ in range(50):
        g = generate("gnp-connected", 10, seed=rng.randrange(1000), k=2)
        parts = []
        for v in range(g.n):
            codes = list(range(g.degree(v) * 2))
            rng.shuffle(codes)
            cut = rng.randrange(len(codes) + 1)
            parts.append(make_partition(g.degree(v), 2, [codes[:cut], codes[cut:]]))
        side = random_cut(g.n, rng)
        tables = global_pin_table(g, 2)
        q = cut_pins(g, side, 2)
        ca = project_classes(tables, 2, parts, sorted(side))
        cb = project_classes(tables, 2, parts, sorted(set(range(g.n)) - side))
        circuits = form_circuits(g, 2, parts)
        for i, p in enumerate(q):
            # beep only on cut pin i from side A; exactly the cut pins on its circuit must light up
            ma = side_message(q, ca, {ca[p]})
            mb = side_message(q, cb, set())
            lit = merge_cut(ma, mb)
            assert lit == [circuits.same_circuit(p, x) for x in q]


def _chain_program(view):
    # round 0 singletons, then every node binds all pins; node with input "go" beeps
    yield Step(())
    whole = make_partition(view.degree, 1, [range(view.degree)])
    for _ in range(3):
        yield Step((0,) if view.local_input == "go" else (), whole)


def test_circuit_spanning_alternating_cut_is_exact():
    g = generate("path", 10)
    inputs = ["go"] + [None] * 9
    rep = verify_round_equivalence(g, _chain_program, 0, {0, 2, 4, 6, 8}, 10, inputs=inputs)
    assert rep.ok and rep.rounds == 4 and rep.q == 9


def test_single_edge_cut_exchanges_two_bits():
    rep = verify_round_equivalence(Graph(2, [(0, 1)]), _chain_program, 0, {0}, 10, inputs=["go", None])
    assert rep.q == 1 and rep.bits == [2, 2, 2, 2] and rep.bound == 2 and rep.ok


def test_silent_nodes_give_silent_feedback():
    def quiet(view):
        for _ in range(3):
            fb = yield Step(())
            assert fb.bits() == "0" * view.degree

    rep = verify_round_equivalence(generate("cycle", 6), quiet, 0, {0, 1, 2}, 5)
    assert rep.ok and rep.rounds == 3


def test_mst_program_replays_exactly():
    g = generate("gnp-connected", 16, seed=3, weights="uniform", W=16)
    rep = verify_round_equivalence(g, MSTProgram(3), 4, random_cut(16, random.Random(1)), 30,
                                   inputs=port_weights(g))
    assert rep.ok and rep.rounds == 30


def test_spanner_star_with_center_alone_stays_within_bound():
    g = generate("star", 9)
    rep = verify_round_equivalence(g, SpannerProgram(2, 0.5, 3), 2, {0}, 40)
    assert rep.q == 8 * 3
    assert rep.ok and max(rep.bits) <= 2 * 24 * (5 + 1)


def test_one_sided_cut_is_rejected():
    with pytest.raises(ValueError):
        verify_round_equivalence(generate("path", 3), _chain_program, 0, {0, 1, 2}, 3)


def test_broken_merge_is_caught(monkeypatch):
    monkeypatch.setattr(cutsim, "merge_cut", lambda own, other: list(own.beeps))
    g = generate("path", 6)
    rep = verify_round_equivalence(g, _chain_program, 0, {0, 1, 2}, 5, inputs=["go"] + [None] * 5)
    assert rep.mismatches and not rep.ok


def test_diverging_randomness_is_trace_corruption(monkeypatch):
    monkeypatch.setattr(cutsim, "default_rng_factory", lambda seed: default_rng_factory(seed + 1))
    g = generate("gnp-connected", 12, seed=1, weights="uniform")
    with pytest.raises(TraceCorruption):
        verify_round_equivalence(g, MSTProgram(3), 0, set(range(6)), 20, inputs=port_weights(g))
