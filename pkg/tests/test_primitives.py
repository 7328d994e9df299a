import math
import random
from statistics import fmean, pstdev

import pytest

from grcsim.engine import NodeView, Step, form_circuits, run_until_halt
from grcsim.graph import Graph, generate
from grcsim.primitives import (GLOBAL, CountingProgram, ExchangeProgram, LeaderElectionProgram, Node,
                               OrientProgram, OutgoingProgram, ProtocolViolation, _decode_into,
                               counting_duration, median_duration)

from conftest import scripted


def _layout_partitions(g):
    parts = []
    for v in range(g.n):
        node = Node(NodeView(g.degree(v), 3, None, None))
        node.layout()
        parts.append(node.partition)
    return parts


@pytest.mark.parametrize("g, size", [(generate("path", 3), 2), (generate("complete", 4), 6),
                                     (generate("path", 2), 1)])
def test_global_circuit_spans_every_index_two_pin(g, size):
    circuits = form_circuits(g, 3, _layout_partitions(g))
    global_pins = frozenset(e * 3 + GLOBAL - 1 for e in range(g.m))
    assert global_pins in circuits.classes
    assert len(global_pins) == size


def test_single_node_counting_mean_is_two():
    res = run_until_halt(Graph(1, []), CountingProgram(4000), seed=3, max_rounds=10**6)
    durations = res.outputs[0]
    mean = fmean(durations)
    assert abs(mean - 2) <= 3 * math.sqrt(2 / len(durations))


def test_forced_heads_stretch_counting():
    res = run_until_halt(Graph(1, []), CountingProgram(1), rng_factory=scripted({0: [1] * 5}))
    assert res.outputs[0][0] >= 6


@pytest.mark.parametrize("durations, r, tau", [([3, 6, 7], 2, 6), ([7, 3, 6], 2, 6), ([4], 1, 4),
                                               ([9, 1, 5, 5, 2], 3, 5)])
def test_median_duration(durations, r, tau):
    assert median_duration(durations, r) == tau


@pytest.mark.parametrize("durations, r", [([1, 2], 2), ([1], 0), ([], 1)])
def test_median_duration_rejects_bad_counts(durations, r):
    with pytest.raises(ValueError):
        median_duration(durations, r)


@pytest.mark.parametrize("n", [1, 8, 64])
def test_abstract_counting_tail_matches_closed_form(n):
    # Pr[duration > t] = Pr[someone survives t fair coins] = 1 - (1 - 2^-t)^n
    rng = random.Random(n)
    trials = 20_000
    samples = [counting_duration(n, rng) for _ in range(trials)]
    for t in range(1, 9):
        p = 1 - (1 - 2.0 ** -t) ** n
        got = sum(d > t for d in samples) / trials
        assert abs(got - p) <= 3 * math.sqrt(p * (1 - p) / trials) + 1e-9


def test_engine_counting_matches_abstract_sampler():
    g = generate("complete", 8)
    res = run_until_halt(g, CountingProgram(600), seed=5, max_rounds=10**6)
    engine = res.outputs[0]
    assert all(o == engine for o in res.outputs)
    rng = random.Random(9)
    abstract = [counting_duration(8, rng) for _ in range(6000)]
    spread = math.sqrt(pstdev(engine) ** 2 / len(engine) + pstdev(abstract) ** 2 / len(abstract))
    assert abs(fmean(engine) - fmean(abstract)) <= 4 * spread


def _orient(g, coins=None, seed=0):
    factory = scripted(coins or {}, seed)
    return run_until_halt(g, OrientProgram(), seed, rng_factory=factory).outputs


def test_heads_tails_orients_away_from_tails_node():
    out = _orient(Graph(2, [(0, 1)]), {0: [1], 1: [0]})
    assert out[1][0] == [True]
    assert out[0][0] == [False]
    assert out[0][1] == 1


@pytest.mark.parametrize("coins", [(1, 1), (0, 0)])
def test_equal_coins_leave_edge_for_a_later_phase(coins):
    out = _orient(Graph(2, [(0, 1)]), {0: [coins[0]], 1: [coins[1]]})
    assert out[0][1] >= 2
    assert out[0][0][0] != out[1][0][0]


def test_orientation_finishes_within_four_log_n_phases():
    late = 0
    for seed in range(200):
        g = generate("gnp-connected", 64, seed=seed)
        out = run_until_halt(g, OrientProgram(), seed).outputs
        for e, (u, v) in enumerate(g.edges):
            assert out[u][0][g.port_of(u, e) - 1] != out[v][0][g.port_of(v, e) - 1]
        late += max(o[1] for o in out) > 4 * math.log2(64)
    assert late <= 2


def _exchange(g, sends):
    inputs = [{"send": sends.get(v, {})} for v in range(g.n)]
    return run_until_halt(g, ExchangeProgram(), 1, inputs=inputs).outputs


def test_exchange_delivers_one_and_silence():
    out = _exchange(Graph(2, [(0, 1)]), {0: {1: 1}})
    assert out[1] == {1: 1}
    assert out[0] == {}


def test_opposite_sends_share_one_frame():
    out = _exchange(Graph(2, [(0, 1)]), {0: {1: 0}, 1: {1: 1}})
    assert out[1] == {1: 0}
    assert out[0] == {1: 1}


def test_exchange_is_lossless_on_random_messages():
    g = generate("gnp-connected", 20, seed=2)
    rng = random.Random(4)
    sends = {v: {p: rng.choice((0, 1, None)) for p in range(1, g.degree(v) + 1)} for v in range(g.n)}
    sends = {v: {p: b for p, b in m.items() if b is not None} for v, m in sends.items()}
    out = _exchange(g, sends)
    for v in range(g.n):
        expected = {}
        for p, e in enumerate(g.ports[v], start=1):
            u = g.other(e, v)
            b = sends[u].get(g.port_of(u, e))
            if b is not None:
                expected[p] = b
        assert out[v] == expected


def test_beep_then_silence_is_not_a_codeword():
    with pytest.raises(ProtocolViolation):
        _decode_into({}, [1], [True], [False])


def _elect(g, candidates, seed=0, coins=None):
    inputs = [{"candidate": v in candidates} for v in range(g.n)]
    res = run_until_halt(g, LeaderElectionProgram(3), seed, inputs=inputs,
                         rng_factory=scripted(coins or {}, seed))
    return [v for v in range(g.n) if res.outputs[v][0]], res.outputs[0][1]


def test_single_candidate_always_wins():
    for seed in range(10):
        assert _elect(generate("cycle", 7), {4}, seed) == ([4], True)


def test_tails_candidate_withdraws():
    # first coin paces the counting run, the second is the tournament toss
    leaders, _ = _elect(Graph(2, [(0, 1)]), {0, 1}, coins={0: [1, 1], 1: [1, 0]})
    assert leaders == [0]


def test_no_candidates_is_reported():
    assert _elect(generate("path", 4), set()) == ([], False)


def test_exactly_one_leader_over_many_seeds():
    g = generate("gnp-connected", 128, seed=1)
    bad = 0
    for seed in range(100):
        cands = set(random.Random(seed).sample(range(128), 40))
        leaders, _ = _elect(g, cands, seed)
        bad += len(leaders) != 1 or not set(leaders) <= cands
    assert bad <= 1


def _outgoing(g, h, seed=0):
    inputs = [{"in_h": [e in h for e in g.ports[v]]} for v in range(g.n)]
    out = run_until_halt(g, OutgoingProgram(3), seed, inputs=inputs).outputs
    found = set()
    for v in range(g.n):
        found |= {g.ports[v][p - 1] for p in out[v]}
    return found


def test_no_outgoing_edges_in_one_cluster(two_triangles):
    assert _outgoing(two_triangles, set(range(7))) == set()


def test_every_edge_outgoing_without_clusters(two_triangles):
    assert _outgoing(two_triangles, set(), seed=3) == set(range(7))


def test_only_bridge_leaves_two_triangles(two_triangles):
    for seed in range(5):
        assert _outgoing(two_triangles, set(range(6)), seed) == {6}


def test_node_program_cannot_see_n():
    def program(view):
        yield Step(())
        return sorted(a for a in dir(view) if not a.startswith("_"))

    assert run_until_halt(Graph(2, [(0, 1)]), program).outputs[0] == ["coin", "degree", "k", "local_input",
                                                                          "randbits"]
