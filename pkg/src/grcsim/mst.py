"""Boruvka-style minimum spanning tree on reconfigurable circuits.

Each phase detects outgoing edges, stops if there are none, then lets every
cluster keep only its lightest outgoing candidates and finally breaks ties
with shared random bits so each cluster adds one edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import run_until_halt
from .graph import Graph, _DSU, oracle_mst, weight_length
from .primitives import Counting, Node, detect_outgoing, frame, global_vote, orient_edges

BEFORE, AFTER, EQUAL = -1, 1, 0


def prec_compare(a: tuple[int, int], b: tuple[int, int]) -> int:
    """Order of tagged candidates ``(weight, B)``: lighter first, then larger B first."""
    wa, ba = a
    wb, bb = b
    if wa != wb:
        return BEFORE if wa < wb else AFTER
    if ba != bb:
        return BEFORE if ba > bb else AFTER
    return EQUAL


def lightest_edge(node: Node, weight: int | None, state="lightest"):
    """Keep the candidate only if its weight is minimal among the cluster's candidates.

    Length comparison: a holder waits ``length - 1`` rounds and beeps on the
    cluster circuit in round ``length``.  Then the bits are compared MSB first,
    zero bits beeping.  A silent holder that hears a beep drops out.  Holders
    beep on the global circuit while the stage is still running for them.
    """
    marked = weight is not None
    length = weight_length(weight) if marked else 0
    g = node.gpin
    r = 0
    while True:
        r += 1
        busy = marked and r <= 2 * length
        beep = False
        if busy:
            if r == length:
                beep = True
            elif r > length:
                beep = not (weight >> (2 * length - r)) & 1
        beeps = []
        if beep and node.cpin is not None:
            beeps.append(node.cpin)
        if busy and g is not None:
            beeps.append(g)
        fb = yield node.step(beeps, state)
        if busy and not beep and node.heard_cluster(fb, beep):
            marked = False
        if not node.heard_global(fb, busy):
            return marked


def single_edge(node: Node, candidates, c: int, state="select"):
    """Reduce each cluster's candidates to one edge.

    ``candidates`` are the node's ports still marked after the lightest edge
    stage.  Returns ``(new tree ports, {port: B}, surviving ports)``.

    Holders inform the other endpoint, then both endpoints of every shared edge
    exchange a fresh random bit per frame.  A holder beeps on the cluster
    circuit when some marked candidate's XOR bit is 1; when the circuit
    carries a beep, candidates whose bit is 0 are dropped.  Survivors inform
    their neighbour once more and both sides add the edge.
    """
    candidates = set(candidates)
    inbox, _ = yield from frame(node, dict.fromkeys(candidates, 1), (), state)
    shared = {p for p, b in inbox.items() if b == 1} | candidates
    marked = set(candidates)
    tags = dict.fromkeys(candidates, 0)
    prev = {}
    pacer = Counting(node, c)
    g = node.gpin
    coin = node.coin

    def eliminate(fb, beep):
        if marked and prev and node.heard_cluster(fb, beep):
            marked.difference_update([p for p in marked if not prev[p]])

    while True:
        gb = pacer.beep()
        extra = [g] if gb and g is not None else []
        beep = any(prev.get(p) for p in marked)
        if beep and node.cpin is not None:
            extra.append(node.cpin)
        bits = {p: coin() for p in shared}
        inbox, fb = yield from frame(node, bits, extra, state)
        eliminate(fb, beep)
        for p in candidates:
            prev[p] = bits[p] ^ inbox.get(p, 0)
            tags[p] = (tags[p] << 1) | prev[p]
        if pacer.observe(node.heard_global(fb, gb)):
            break
    beep = any(prev.get(p) for p in marked)
    fb = yield node.step((node.cpin,) if beep and node.cpin is not None else (), state)
    eliminate(fb, beep)
    inbox, _ = yield from frame(node, dict.fromkeys(marked, 1), (), state)
    chosen = {p for p, b in inbox.items() if b == 1} | marked
    return chosen, tags, marked


def mst_phases(node: Node, weights, c: int, log=None):
    """The MST algorithm as a sub-procedure; returns the set of tree ports.

    ``weights[p - 1]`` is the weight of the edge behind port p.  When ``log``
    is a list, one ``(surviving candidate ports, {port: B})`` entry per phase
    is appended.
    """
    yield from orient_edges(node)
    tree = set()
    while True:
        node.layout(tree)
        out = yield from detect_outgoing(node, c)
        if not (yield from global_vote(node, bool(out), "check")):
            return tree
        # every lightest outgoing edge competes, so ties are broken by the shared tags alone
        light = min((weights[p - 1] for p in out), default=None)
        kept = yield from lightest_edge(node, light)
        held = {p for p in out if weights[p - 1] == light} if kept else set()
        chosen, tags, survived = yield from single_edge(node, held, c)
        if log is not None:
            log.append((sorted(survived), tags))
        tree |= chosen


class MSTProgram:
    """Node program: ``local_input`` is the list of incident weights by port.

    Output: ``{"tree": sorted tree ports, "phases": int, "tags": [...]}``.
    """

    k = 3

    def __init__(self, c: int = 3):
        self.c = c

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        log = []
        tree = yield from mst_phases(node, view.local_input, self.c, log)
        return {"tree": sorted(tree), "phases": len(log) + 1, "tags": log}


def port_weights(graph: Graph, weights=None) -> list[list[int]]:
    weights = weights if weights is not None else graph.weights
    if weights is None:
        raise ValueError("MST needs edge weights")
    return [[weights[e] for e in graph.ports[v]] for v in range(graph.n)]


def ports_to_edges(graph: Graph, outputs, key="tree"):
    """Union of the per-node port sets as edge indices, plus the edges only one endpoint claims."""
    claims = {}
    for v, out in enumerate(outputs):
        if out is None:
            continue
        ports = out[key] if key else out
        for p in ports:
            e = graph.ports[v][p - 1]
            claims[e] = claims.get(e, 0) + 1
    return set(claims), {e for e, cnt in claims.items() if cnt != 2}


@dataclass
class MSTResult:
    edges: set
    weight: int
    rounds: int
    phases: int
    timed_out: bool
    one_sided: set = field(default_factory=set)
    cycle: bool = False
    spanning: bool = False
    tag_collision: bool = False


def selection_collision(graph: Graph, outputs) -> bool:
    """True if in some phase a cluster kept more than one edge (equal tie-break tags)."""
    logs = [o["tags"] if o else [] for o in outputs]
    dsu = _DSU(graph.n)
    for i in range(max((len(x) for x in logs), default=0)):
        kept = {}
        added = []
        for v, log in enumerate(logs):
            if i >= len(log):
                continue
            root = dsu.find(v)
            for port in log[i][0]:
                e = graph.ports[v][port - 1]
                if kept.setdefault(root, e) != e:
                    return True
                added.append(e)
        for e in added:
            dsu.union(*graph.edges[e])
    return False


def _has_cycle(n, edges, graph):
    dsu = _DSU(n)
    for e in sorted(edges):
        u, v = graph.edges[e]
        if not dsu.union(u, v):
            return True
    return False


def mst_construct(graph: Graph, c: int = 3, seed: int = 0, max_rounds: int = 200_000,
                  weights=None, **kwargs) -> MSTResult:
    """Run the MST program; the result carries the tree plus whp-failure flags."""
    w = weights if weights is not None else graph.weights
    res = run_until_halt(graph, MSTProgram(c), seed, max_rounds, inputs=port_weights(graph, w), **kwargs)
    done = [o for o in res.outputs if o is not None]
    edges, one_sided = ports_to_edges(graph, res.outputs)
    phases = max((o["phases"] for o in done), default=0)
    collision = selection_collision(graph, res.outputs)
    cycle = _has_cycle(graph.n, edges, graph)
    return MSTResult(
        edges=edges,
        weight=sum(w[e] for e in edges),
        rounds=res.rounds,
        phases=phases,
        timed_out=res.timed_out,
        one_sided=one_sided,
        cycle=cycle,
        spanning=len(edges) == graph.n - 1 and not cycle,
        tag_collision=collision,
    )


def mst_is_optimal(graph: Graph, result: MSTResult, weights=None) -> bool:
    if not result.spanning or result.one_sided or result.timed_out:
        return False
    best, _ = oracle_mst(graph, weights)
    return result.weight == best
