"""(2κ−1)-spanners via random shifts, without knowing n.

Each node samples a shift ``delta`` with a procedure that approximates
GeomCap(1 − n^(−1/κ), κ − 1) using CountingToLogn executions as a clock, the
shifts drive a delayed BFS that partitions the graph into clusters, and
random cluster IDs decide which inter-cluster edges are kept.
"""

from __future__ import annotations

import functools
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .engine import run_until_halt
from .graph import Graph, components, oracle_distances
from .mst import ports_to_edges
from .primitives import Counting, Node, counting_duration, frame, orient_edges


def geomcap_pmf(p: float, r: int, i: int) -> float:
    """Pr[X = i] for X ~ GeomCap(p, r): first success among r Bernoulli(p) trials, r if none."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if r < 0:
        raise ValueError("r must be >= 0")
    if i < 0 or i > r:
        return 0.0
    if i < r:
        return p * (1 - p) ** i
    return (1 - p) ** r


def sample_geomcap(p: float, r: int, rng: random.Random) -> int:
    for i in range(r):
        if rng.random() < p:
            return i
    return r


@dataclass(frozen=True)
class SamplerConfig:
    """Parameters of the shift sampler.

    ``eps_prime`` is ε/(2+ε) exactly; each experiment round draws
    ``1/(1 − eps_prime)`` bits on average, spread as floor(r·q) − floor((r−1)·q).
    """

    kappa: int
    eps: float
    c: int = 3

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.c < 1:
            raise ValueError("c must be >= 1")

    @property
    def eps_prime(self) -> Fraction:
        e = Fraction(str(self.eps))
        return e / (2 + e)

    @property
    def bits_per_round(self) -> Fraction:
        return 1 / (1 - self.eps_prime)

    @property
    def target(self) -> int:
        """Completed executions after which sampling stops (the median one)."""
        return math.ceil(self.c / self.eps_prime)

    @property
    def executions(self) -> int:
        return 2 * self.target - 1

    def bits_in_round(self, r: int) -> int:
        """Bits drawn in the r-th drawing round (1-based) of one experiment."""
        return _bits_in_round(self.bits_per_round, r)

    @functools.cached_property
    def schedule(self) -> list[int]:
        """``bits_in_round`` for r < 64, indexed by r."""
        return [0] + [self.bits_in_round(r) for r in range(1, 64)]

    def experiment_bits(self, duration: int) -> list[int]:
        """Bits drawn per experiment during an execution of ``duration`` rounds."""
        k = self.kappa
        out = []
        for x in range(k - 1):
            rounds = 0 if duration <= x else (duration - 1 - x) // k + 1
            out.append(math.floor(rounds * self.bits_per_round))
        return out


@functools.lru_cache(maxsize=None)
def _bits_in_round(q: Fraction, r: int) -> int:
    return math.floor(r * q) - math.floor((r - 1) * q)


def first_success(vector, kappa: int) -> int:
    for x, hit in enumerate(vector):
        if hit:
            return x
    return kappa - 1


def sample_experiments(node: Node, cfg: SamplerConfig, only: int | None = None, state="sample"):
    """Interleaved basic-scheme executions; returns the experiment vector of the median one.

    Execution ``g mod executions`` owns global round g.  Each execution rides
    its own CountingToLogn on the global circuit; in its j-th round with
    j mod κ ≠ 0 a node draws bits for experiment (j − 1) mod κ.  With ``only``
    set, only that experiment draws.
    """
    kappa = cfg.kappa
    count = cfg.executions
    target = cfg.target
    pacers = [Counting(node, 1) for _ in range(count)]
    steps = [0] * count
    done = [False] * count
    vectors = [[False] * (kappa - 1) for _ in range(count)]
    finished = 0
    g = node.gpin
    randbits = node.view.randbits
    schedule = cfg.schedule
    i = -1
    while True:
        i = (i + 1) % count
        if done[i]:
            yield node.step((), state)
            continue
        steps[i] += 1
        j = steps[i]
        x = (j - 1) % kappa
        vec = vectors[i]
        if x != kappa - 1 and (only is None or only == x) and not vec[x]:
            r = (j - 1) // kappa + 1
            if randbits(schedule[r] if r < len(schedule) else cfg.bits_in_round(r)):
                vec[x] = True
        beep = pacers[i].beep()
        fb = yield node.step((g,) if beep and g is not None else (), state)
        if pacers[i].observe(node.heard_global(fb, beep)):
            done[i] = True
            finished += 1
            if finished == target:
                return vec


def sample_delta(node: Node, cfg: SamplerConfig, low_memory: bool = False):
    kappa = cfg.kappa
    if kappa == 1:
        return 0
    if not low_memory:
        vec = yield from sample_experiments(node, cfg)
        return first_success(vec, kappa)
    delta = kappa - 1
    for x in range(kappa - 1):
        # one sampler run per experiment; only the running minimum is kept
        vec = yield from sample_experiments(node, cfg, only=x, state=f"sample{x}")
        if vec[x] and delta == kappa - 1:
            delta = x
    return delta


def build_clusters(node: Node, delta: int, kappa: int, state="cluster"):
    """Delayed BFS from a virtual root with edge weights ``kappa - delta``.

    Runs ``kappa`` frames.  A node unreached before frame ``w`` becomes a
    center there; a node first reached in frame r ≤ w − 1 joins the lowest
    sending port, relays in frame r + 1 to non-senders and sends its parent a 0
    so the parent learns the tree edge.  Returns ``(center, parent, tree ports, distance)``.
    """
    w = kappa - delta
    settled = center = False
    parent = dist = None
    tree = set()
    senders = None
    for r in range(1, kappa + 1):
        msgs = {}
        if senders is not None:
            msgs = {p: (0 if p == parent else 1) for p in node.ports if p == parent or p not in senders}
            senders = None
        elif not settled and r == w:
            settled = center = True
            dist = w
            msgs = 1
        inbox, _ = yield from frame(node, msgs, (), state)
        tree.update(p for p, b in inbox.items() if b == 0)
        if not settled and r <= w - 1:
            heard = {p for p, b in inbox.items() if b == 1}
            if heard:
                parent = min(heard)
                tree.add(parent)
                settled = True
                dist = r + 1
                senders = heard
    return center, parent, tree, dist


def bridge_edges(node: Node, center: bool, c: int, state="bridge"):
    """Random cluster IDs, one bit per frame, paced by 4c + 7 CountingToLogn runs.

    Keeps the neighbours whose ID prefix equals ours and groups those with a
    smaller ID by their full prefix; one edge per group is added.  A closing
    frame tells the other endpoint.  Returns the bridging ports.
    """
    same = set(node.ports)
    groups = []

    def update(inbox, own):
        nonlocal same, groups
        split = []
        for grp in groups:
            zero = {p for p in grp if inbox[p] == 0}
            if zero:
                split.append(zero)
            if len(zero) < len(grp):
                split.append(grp - zero)
        smaller = {p for p in same if inbox[p] < own}
        same = {p for p in same if inbox[p] == own}
        if smaller:
            split.append(smaller)
        groups = split

    pacer = Counting(node, 4 * c + 7)
    g = node.gpin
    prev = None
    while True:
        gb = pacer.beep()
        extra = [g] if gb and g is not None else []
        bit = bool(center and node.coin())
        if bit and node.cpin is not None:
            extra.append(node.cpin)
        inbox, fb = yield from frame(node, prev, extra, state)
        if prev is not None:
            update(inbox, prev)
        prev = int(node.heard_cluster(fb, bit))
        if pacer.observe(node.heard_global(fb, gb)):
            break
    inbox, _ = yield from frame(node, prev, (), state)
    update(inbox, prev)
    chosen = {min(grp) for grp in groups}
    inbox, _ = yield from frame(node, dict.fromkeys(chosen, 1), (), state)
    return chosen | {p for p, b in inbox.items() if b == 1}


class SpannerProgram:
    """Node program for the spanner; output is a dict with the kept ports and cluster data."""

    k = 3

    def __init__(self, kappa: int, eps: float = 0.5, c: int = 3, low_memory: bool = False):
        self.cfg = SamplerConfig(kappa, eps, c)
        self.low_memory = low_memory

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        cfg = self.cfg
        node = Node(view, self.k)
        yield from orient_edges(node)
        delta = yield from sample_delta(node, cfg, self.low_memory)
        center, parent, tree, dist = yield from build_clusters(node, delta, cfg.kappa)
        node.layout(tree)
        bridges = yield from bridge_edges(node, center, cfg.c)
        return {
            "H": sorted(tree | bridges),
            "tree": sorted(tree),
            "delta": delta,
            "center": center,
            "parent": parent,
            "dist": dist,
        }


@dataclass
class SpannerResult:
    edges: set
    tree_edges: set
    deltas: list
    centers: list
    cluster_of: list
    dist: list
    rounds: int
    timed_out: bool
    one_sided: set = field(default_factory=set)


def spanner_construct(graph: Graph, kappa: int, eps: float = 0.5, c: int = 3, seed: int = 0,
                      max_rounds: int = 200_000, low_memory: bool = False, **kwargs) -> SpannerResult:
    prog = SpannerProgram(kappa, eps, c, low_memory)
    res = run_until_halt(graph, prog, seed, max_rounds, **kwargs)
    outs = res.outputs
    edges, one_sided = ports_to_edges(graph, outs, "H")
    tree, _ = ports_to_edges(graph, outs, "tree")
    done = all(o is not None for o in outs)
    return SpannerResult(
        edges=edges,
        tree_edges=tree,
        deltas=[o["delta"] if o else None for o in outs],
        centers=[v for v, o in enumerate(outs) if o and o["center"]],
        cluster_of=components(graph.n, [graph.edges[e] for e in tree]) if done else [],
        dist=[o["dist"] if o else None for o in outs],
        rounds=res.rounds,
        timed_out=res.timed_out,
        one_sided=one_sided,
    )


def spanner_construct_low_memory(graph: Graph, kappa: int, eps: float = 0.5, c: int = 3,
                                 seed: int = 0, **kwargs) -> SpannerResult:
    return spanner_construct(graph, kappa, eps, c, seed, low_memory=True, **kwargs)


# -- abstract sampler and post-hoc checks -------------------------------------

def median_execution_length(n: int, cfg: SamplerConfig, rng: random.Random) -> int:
    """Length of the execution at which the interleaved counter hits its target."""
    count = cfg.executions
    ends = []
    for i in range(count):
        d = counting_duration(n, rng)
        ends.append(((d - 1) * count + i, d))
    ends.sort()
    return ends[cfg.target - 1][1]


def sample_deltas_fast(n: int, cfg: SamplerConfig, rng: random.Random, low_memory: bool = False) -> list[int]:
    """Distributional stand-in for the in-network sampler (no engine, global circuit only)."""
    kappa = cfg.kappa
    if kappa == 1:
        return [0] * n
    if low_memory:
        per_exp = [cfg.experiment_bits(median_execution_length(n, cfg, rng))[x] for x in range(kappa - 1)]
    else:
        per_exp = cfg.experiment_bits(median_execution_length(n, cfg, rng))
    deltas = []
    for _ in range(n):
        d = kappa - 1
        for x, bits in enumerate(per_exp):
            if bits and rng.getrandbits(bits):
                d = x
                break
        deltas.append(d)
    return deltas


def virtual_distances(graph: Graph, deltas, kappa: int) -> list[int]:
    """Shortest-path distance from the virtual root with edges of weight kappa − delta."""
    dist = [kappa - d for d in deltas]
    buckets = {}
    for v, d in enumerate(dist):
        buckets.setdefault(d, []).append(v)
    # unit edge weights: a bucketed Dijkstra
    for level in range(1, max(dist, default=0) + 1):
        queue = deque(v for v in buckets.get(level, []) if dist[v] == level)
        for v in queue:
            for u in graph.neighbors(v):
                if dist[u] > level + 1:
                    dist[u] = level + 1
                    buckets.setdefault(level + 1, []).append(u)
    return dist


def max_stretch(graph: Graph, edges) -> float:
    """max over graph edges (u, v) of d_H(u, v); inf if H disconnects some edge."""
    dist = oracle_distances(graph, edges)
    return max((dist[u][v] for u, v in graph.edges), default=0)


def size_bound(n: int, kappa: int, eps: float) -> float:
    return 2 * n ** (1 + (1 + eps) / kappa) + n ** (1 + 1 / kappa) + 1


def event_b_holds(graph: Graph, cluster_of, edges) -> bool:
    """Every inter-cluster edge (u, v) has exactly one H-edge from u into v's cluster or vice versa."""
    into = {}
    for e in edges:
        a, b = graph.edges[e]
        for x, y in ((a, b), (b, a)):
            key = (x, cluster_of[y])
            into[key] = into.get(key, 0) + 1
    for u, v in graph.edges:
        cu, cv = cluster_of[u], cluster_of[v]
        if cu == cv:
            continue
        if into.get((u, cv), 0) != 1 and into.get((v, cu), 0) != 1:
            return False
    return True


def r_membership_holds(graph: Graph, deltas, cluster_of, centers, edges, tree_edges) -> bool:
    """For every bridging H-edge (u, v) with centers u', v': u' ∈ R(v) or v' ∈ R(u)."""
    center_of = {}
    for c in centers:
        center_of[cluster_of[c]] = c
    dist = oracle_distances(graph)

    def d(a, b):
        return dist[a][b]

    def in_r(x, v):
        m = max(deltas[u] - d(u, v) for u in range(graph.n))
        return m - 1 <= deltas[x] - d(x, v) <= m

    for e in edges - tree_edges:
        u, v = graph.edges[e]
        if cluster_of[u] == cluster_of[v]:
            continue
        if not (in_r(center_of[cluster_of[u]], v) or in_r(center_of[cluster_of[v]], u)):
            return False
    return True
