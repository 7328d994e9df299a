"""Distributed verification of subgraph predicates.

Every predicate is decided unanimously: each yes/no check ends with a vote
on the global circuit, so all nodes read the same bit.  The subgraph H is
given locally as one membership bit per incident edge.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .engine import run_until_halt
from .graph import Graph, GraphError, _DSU, components, generate, is_connected, oracle_mst
from .mst import mst_phases
from .primitives import GLOBAL, MSG, Counting, Node, detect_outgoing, global_vote, orient_edges

TASKS = (
    "mst",
    "connected-spanning",
    "e-cycle",
    "st-connectivity",
    "connectivity",
    "cut",
    "edge-on-all-st-paths",
    "st-cut",
    "hamiltonian-cycle",
    "simple-path",
)
LOG_TASKS = TASKS[1:]


# -- building blocks ------------------------------------------------------------

def _setup(node: Node):
    yield node.step((), "setup")
    node.layout()


def _connected(node: Node, h_ports, c: int, participate: bool):
    """Outgoing edge detection on H followed by a vote; True if nobody saw an outgoing edge."""
    yield from orient_edges(node)
    node.layout(h_ports)
    out = yield from detect_outgoing(node, c, participate)
    return not (yield from global_vote(node, participate and bool(out), "decide"))


def _e_cycle(node: Node, h_ports, marked, c: int):
    if (yield from global_vote(node, marked is not None and marked not in h_ports, "check")):
        return False
    yield from orient_edges(node)
    node.layout(h_ports - {marked})
    out = yield from detect_outgoing(node, c)
    return not (yield from global_vote(node, marked in out, "decide"))


def _st_connected(node: Node, h_ports, terminal: bool, c: int):
    """s and t beep coin flips on their component circuit while c CountingToLogn runs go on.

    A terminal that stays silent but hears a beep reports on a second global
    circuit in the following round; one extra round after the counting lets
    the last report through.
    """
    node.layout(h_ports, global_indices=(GLOBAL, MSG))
    second = node.code(1, MSG) if node.degree else None
    pacer = Counting(node, c)
    g = node.gpin
    report = positive = False
    while True:
        gb = pacer.beep()
        beeps = [g] if gb and g is not None else []
        bit = bool(terminal and node.coin())
        if bit and node.cpin is not None:
            beeps.append(node.cpin)
        if report and second is not None:
            beeps.append(second)
        fb = yield node.step(beeps, "st")
        positive = positive or node.heard_global(fb, report, second)
        report = terminal and not bit and node.heard_cluster(fb, bit)
        if pacer.observe(node.heard_global(fb, gb)):
            break
    positive = positive or (yield from global_vote(node, report, "st", second))
    return positive


# -- per-task node programs -------------------------------------------------------

def _mst(node, inp, c):
    h = inp["h"]
    w2 = [2 * w - 1 if p in h else 2 * w for p, w in enumerate(inp["weights"], start=1)]
    tree = yield from mst_phases(node, w2, c)
    return not (yield from global_vote(node, tree != h, "decide"))


def _connected_spanning(node, inp, c):
    yield from _setup(node)
    if (yield from global_vote(node, not inp["h"], "check")):
        return False
    return (yield from _connected(node, inp["h"], c, True))


def _e_cycle_task(node, inp, c):
    yield from _setup(node)
    return (yield from _e_cycle(node, inp["h"], inp["marked"], c))


def _st_connectivity(node, inp, c):
    yield from _setup(node)
    return (yield from _st_connected(node, inp["h"], inp["s"] or inp["t"], c))


def _connectivity(node, inp, c):
    yield from _setup(node)
    return (yield from _connected(node, inp["h"], c, bool(inp["h"])))


def _cut(node, inp, c):
    yield from _setup(node)
    rest = frozenset(node.ports) - inp["h"]
    return not (yield from _connected(node, rest, c, True))


def _edge_on_all(node, inp, c):
    yield from _setup(node)
    return not (yield from _e_cycle(node, inp["h"], inp["marked"], c))


def _st_cut(node, inp, c):
    yield from _setup(node)
    rest = frozenset(node.ports) - inp["h"]
    return not (yield from _st_connected(node, rest, inp["s"] or inp["t"], c))


def _hamiltonian(node, inp, c):
    yield from _setup(node)
    if (yield from global_vote(node, len(inp["h"]) != 2, "check")):
        return False
    return (yield from _connected(node, inp["h"], c, True))


def _simple_path(node, inp, c):
    yield from _setup(node)
    if (yield from global_vote(node, len(inp["h"]) > 2, "check")):
        return False
    if not (yield from global_vote(node, len(inp["h"]) == 1, "ends")):
        return False
    return (yield from _connected(node, inp["h"], c, bool(inp["h"])))


_PROGRAMS = {
    "mst": _mst,
    "connected-spanning": _connected_spanning,
    "e-cycle": _e_cycle_task,
    "st-connectivity": _st_connectivity,
    "connectivity": _connectivity,
    "cut": _cut,
    "edge-on-all-st-paths": _edge_on_all,
    "st-cut": _st_cut,
    "hamiltonian-cycle": _hamiltonian,
    "simple-path": _simple_path,
}


class VerifyProgram:
    """Node program deciding one predicate; the output is the node's boolean answer."""

    k = 3

    def __init__(self, task: str, c: int = 3):
        if task not in _PROGRAMS:
            raise ValueError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
        self.task = task
        self.c = c

    def __call__(self, view):
        return _PROGRAMS[self.task](Node(view, self.k), view.local_input, self.c)


def local_inputs(graph: Graph) -> list[dict]:
    """Per-node view of the instance: H ports, s/t marks, the marked edge's port, weights."""
    h = graph.subgraph or frozenset()
    out = []
    for v in range(graph.n):
        ports = graph.ports[v]
        out.append({
            "h": frozenset(p for p, e in enumerate(ports, start=1) if e in h),
            "s": graph.s == v,
            "t": graph.t == v,
            "marked": next((p for p, e in enumerate(ports, start=1) if e == graph.marked_edge), None),
            "weights": [graph.weights[e] for e in ports] if graph.weights else None,
        })
    return out


@dataclass
class VerifyResult:
    task: str
    decision: bool | None
    unanimous: bool
    rounds: int
    timed_out: bool
    outputs: list


def verify(task: str, graph: Graph, c: int = 3, seed: int = 0, max_rounds: int = 200_000, **kwargs) -> VerifyResult:
    if task == "mst" and graph.weights is None:
        raise ValueError("mst verification needs edge weights")
    if task in ("e-cycle", "edge-on-all-st-paths") and graph.marked_edge is None:
        raise ValueError(f"{task} needs a marked edge")
    if task in ("st-connectivity", "st-cut") and (graph.s is None or graph.t is None):
        raise ValueError(f"{task} needs s and t")
    res = run_until_halt(graph, VerifyProgram(task, c), seed, max_rounds, inputs=local_inputs(graph), **kwargs)
    answers = set(res.outputs)
    unanimous = len(answers) == 1 and not res.timed_out
    return VerifyResult(task, res.outputs[0] if unanimous else None, unanimous, res.rounds,
                        res.timed_out, res.outputs)


# -- oracles ----------------------------------------------------------------------

def _h_edges(graph: Graph):
    return sorted(graph.subgraph or ())


def _degrees(graph: Graph, edges):
    deg = [0] * graph.n
    for e in edges:
        u, v = graph.edges[e]
        deg[u] += 1
        deg[v] += 1
    return deg


def _connected_on_support(graph: Graph, edges) -> bool:
    """H connected over V_H (nodes with at least one H edge); empty H counts as connected."""
    label = components(graph.n, [graph.edges[e] for e in edges])
    support = {label[x] for e in edges for x in graph.edges[e]}
    return len(support) <= 1


def _on_cycle(graph: Graph, edges, e) -> bool:
    rest = [graph.edges[i] for i in edges if i != e]
    label = components(graph.n, rest)
    u, v = graph.edges[e]
    return label[u] == label[v]


def oracle_predicate(task: str, graph: Graph) -> bool:
    h = _h_edges(graph)
    hset = set(h)
    n = graph.n
    if task == "mst":
        deg = _degrees(graph, h)
        if len(h) != n - 1 or not is_connected(n, [graph.edges[e] for e in h]) or (n > 1 and 0 in deg):
            return False
        return sum(graph.weights[e] for e in h) == oracle_mst(graph)[0]
    if task == "connected-spanning":
        return (n == 1 or 0 not in _degrees(graph, h)) and is_connected(n, [graph.edges[e] for e in h])
    if task == "e-cycle":
        return graph.marked_edge in hset and _on_cycle(graph, h, graph.marked_edge)
    if task == "edge-on-all-st-paths":
        return graph.marked_edge in hset and not _on_cycle(graph, h, graph.marked_edge)
    if task == "st-connectivity":
        label = components(n, [graph.edges[e] for e in h])
        return label[graph.s] == label[graph.t]
    if task == "st-cut":
        label = components(n, [ed for i, ed in enumerate(graph.edges) if i not in hset])
        return label[graph.s] != label[graph.t]
    if task == "connectivity":
        return _connected_on_support(graph, h)
    if task == "cut":
        return not is_connected(n, [ed for i, ed in enumerate(graph.edges) if i not in hset])
    if task == "hamiltonian-cycle":
        deg = _degrees(graph, h)
        return all(d == 2 for d in deg) and is_connected(n, [graph.edges[e] for e in h])
    if task == "simple-path":
        deg = _degrees(graph, h)
        support = sum(1 for d in deg if d)
        return (bool(h) and max(deg) <= 2 and _connected_on_support(graph, h)
                and len(h) == support - 1)
    raise ValueError(f"unknown task {task!r}")


# -- instance generation ----------------------------------------------------------

def _spanning_tree(graph: Graph, rng: random.Random) -> set[int]:
    order = list(range(graph.m))
    rng.shuffle(order)
    dsu = _DSU(graph.n)
    return {e for e in order if dsu.union(*graph.edges[e])}


def _ball(graph: Graph, root: int, size: int) -> set[int]:
    seen = [root]
    members = {root}
    for v in seen:
        for u in graph.neighbors(v):
            if u not in members and len(members) < size:
                members.add(u)
                seen.append(u)
    return members


def _crossing(graph: Graph, side: set[int]) -> set[int]:
    return {i for i, (u, v) in enumerate(graph.edges) if (u in side) != (v in side)}


def _cycle_graph(n: int, rng: random.Random):
    """A graph holding a Hamiltonian cycle, a two-cycle cover and a few chords."""
    perm = list(range(n))
    rng.shuffle(perm)
    ham = [(perm[i], perm[(i + 1) % n]) for i in range(n)]
    a = rng.randrange(3, n - 2)
    cover = ([(perm[i], perm[i + 1]) for i in range(a - 1)] + [(perm[a - 1], perm[0])]
             + [(perm[i], perm[i + 1]) for i in range(a, n - 1)] + [(perm[n - 1], perm[a])])
    edges = []
    seen = set()
    for u, v in ham + cover + [tuple(rng.sample(range(n), 2)) for _ in range(n // 4)]:
        key = (min(u, v), max(u, v))
        if key not in seen:
            seen.add(key)
            edges.append(key)
    g = Graph(n, edges)
    index = {ed: i for i, ed in enumerate(g.edges)}

    def ids(pairs):
        return [index[(min(u, v), max(u, v))] for u, v in pairs]

    return g, ids(ham), ids(cover)


def _propose(task: str, n: int, rng: random.Random, want: bool) -> Graph:
    if task in ("hamiltonian-cycle", "simple-path"):
        g, ham, cover = _cycle_graph(n, rng)
        chords = [i for i in range(g.m) if i not in set(ham)]
        if task == "hamiltonian-cycle":
            if want:
                return g.replace(subgraph=frozenset(ham))
            pick = rng.random()
            if pick < 0.6:
                return g.replace(subgraph=frozenset(cover))
            return g.replace(subgraph=frozenset(ham + rng.sample(chords, 1)))
        cut = rng.randrange(n)
        path = ham[cut + 1:] + ham[:cut]
        if want:
            start = rng.randrange(0, n // 3)
            end = rng.randrange(2 * n // 3, n)
            return g.replace(subgraph=frozenset(path[start:end]))
        pick = rng.random()
        if pick < 0.5:
            mid = rng.randrange(1, len(path) - 1)
            return g.replace(subgraph=frozenset(path[:mid] + path[mid + 1:]))
        if pick < 0.75:
            return g.replace(subgraph=frozenset(ham))
        return g.replace(subgraph=frozenset(path + rng.sample(chords, 1)))

    weights = "uniform" if task == "mst" else "none"
    g = generate("gnp-connected", n, seed=rng.randrange(2**31), weights=weights, W=16)
    tree = _spanning_tree(g, rng)
    others = [i for i in range(g.m) if i not in tree]

    if task == "mst":
        best = oracle_mst(g)[1]
        if want:
            return g.replace(subgraph=frozenset(best))
        if rng.random() < 0.2 or not others:
            return g.replace(subgraph=frozenset(set(best) - {rng.choice(sorted(best))}))
        f = rng.choice([i for i in range(g.m) if i not in best])
        u, v = g.edges[f]
        path = _tree_path(g, best, u, v)
        heavier = [e for e in path if g.weights[e] < g.weights[f]]
        drop = rng.choice(heavier or path)
        return g.replace(subgraph=frozenset((set(best) - {drop}) | {f}))
    if task == "connected-spanning":
        extra = set(rng.sample(others, min(len(others), rng.randrange(0, 4))))
        if want:
            return g.replace(subgraph=frozenset(tree | extra))
        return g.replace(subgraph=frozenset((tree - {rng.choice(sorted(tree))}) | extra))
    if task in ("e-cycle", "edge-on-all-st-paths"):
        chords = set(rng.sample(others, min(len(others), rng.randrange(1, 3))))
        h = tree | chords
        e = rng.choice(sorted(h))
        if task == "e-cycle" and not want and rng.random() < 0.25 and others:
            e = rng.choice(sorted(set(others) - chords) or others)
        u, v = g.edges[e]
        return g.replace(subgraph=frozenset(h), marked_edge=e, s=u, t=v)
    if task in ("st-connectivity", "st-cut"):
        s, t = rng.sample(range(n), 2)
        if task == "st-connectivity":
            drop = set(rng.sample(sorted(tree), rng.randrange(0, 3)))
            return g.replace(subgraph=frozenset(tree - drop), s=s, t=t)
        if want:
            side = _ball(g, s, rng.randrange(1, n))
            if t in side:
                side = {s}
            return g.replace(subgraph=frozenset(_crossing(g, side)), s=s, t=t)
        return g.replace(subgraph=frozenset(rng.sample(others, len(others) // 2)), s=s, t=t)
    if task == "connectivity":
        drop = set(rng.sample(sorted(tree), rng.randrange(0, 3)))
        return g.replace(subgraph=frozenset(tree - drop))
    if task == "cut":
        if want:
            side = _ball(g, rng.randrange(n), rng.randrange(1, n))
            return g.replace(subgraph=frozenset(_crossing(g, side)))
        return g.replace(subgraph=frozenset(rng.sample(others, len(others) // 2)))
    raise ValueError(f"unknown task {task!r}")


def _tree_path(g: Graph, tree, u: int, v: int) -> list[int]:
    adj = {x: [] for x in range(g.n)}
    for e in tree:
        a, b = g.edges[e]
        adj[a].append((b, e))
        adj[b].append((a, e))
    back = {u: None}
    stack = [u]
    while stack:
        x = stack.pop()
        for y, e in adj[x]:
            if y not in back:
                back[y] = (x, e)
                stack.append(y)
    path = []
    while v != u:
        v, e = back[v]
        path.append(e)
    return path


def make_instance(task: str, n: int, seed: int, want: bool, tries: int = 200) -> Graph:
    """A random instance whose oracle answer is ``want`` (rejection sampling over proposals)."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    rng = random.Random(f"{task}:{n}:{seed}:{want}")
    for _ in range(tries):
        g = _propose(task, n, rng, want)
        if oracle_predicate(task, g) == want:
            return g
    raise GraphError(f"could not build a {'yes' if want else 'no'} instance for {task} at n={n}")


def balanced_instances(task: str, sizes, count: int, seed: int = 0):
    """``count`` instances cycling through ``sizes``, alternating yes and no; yields (n, want, graph)."""
    for i in range(count):
        n = sizes[i % len(sizes)]
        want = i % 2 == 0
        yield n, want, make_instance(task, n, seed * 100_003 + i, want)
