"""Port-numbered simple graphs, task inputs, generators and reference oracles."""

from __future__ import annotations

import csv
import io
import math
import random
from collections import deque
from dataclasses import dataclass, field


class GraphError(ValueError):
    pass


class GraphParseError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


@dataclass
class Graph:
    """Undirected simple graph with ``k`` pins per edge.

    Edges are indexed by their position in ``edges``.  Ports of a node are
    assigned in order of edge appearance, so ``ports[v][p - 1]`` is the index
    of the edge behind port ``p`` of node ``v``.
    """

    n: int
    edges: list[tuple[int, int]]
    k: int = 1
    weights: list[int] | None = None
    subgraph: frozenset[int] | None = None
    s: int | None = None
    t: int | None = None
    marked_edge: int | None = None
    ports: list[list[int]] = field(init=False, repr=False, compare=False)
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.edges = [(int(u), int(v)) for u, v in self.edges]
        if self.n < 0:
            raise GraphError("negative node count")
        if self.k < 1:
            raise GraphError("k must be positive")
        seen = {}
        self.ports = [[] for _ in range(self.n)]
        for i, (u, v) in enumerate(self.edges):
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {i} has an endpoint outside [0, {self.n})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen[key] = i
            self.ports[u].append(i)
            self.ports[v].append(i)
        self._lookup = seen
        if self.weights is not None:
            self.weights = [int(w) for w in self.weights]
            if len(self.weights) != len(self.edges):
                raise GraphError("one weight per edge required")
            if any(w < 1 for w in self.weights):
                raise GraphError("weights must be integers >= 1")
        if self.subgraph is not None:
            self.subgraph = frozenset(int(i) for i in self.subgraph)
            if any(not 0 <= i < self.m for i in self.subgraph):
                raise GraphError("subgraph edge index out of range")
        for name in ("s", "t"):
            x = getattr(self, name)
            if x is not None and not 0 <= x < self.n:
                raise GraphError(f"{name} out of range")
        if self.s is not None and self.s == self.t:
            raise GraphError("s and t must differ")
        if self.marked_edge is not None and not 0 <= self.marked_edge < self.m:
            raise GraphError("marked edge out of range")

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    def edge_index(self, u: int, v: int) -> int:
        return self._lookup[(min(u, v), max(u, v))]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._lookup

    def port_of(self, v: int, edge: int) -> int:
        return self.ports[v].index(edge) + 1

    def other(self, edge: int, v: int) -> int:
        a, b = self.edges[edge]
        return b if a == v else a

    def neighbors(self, v: int) -> list[int]:
        return [self.other(e, v) for e in self.ports[v]]

    def replace(self, **changes) -> "Graph":
        fields = dict(n=self.n, edges=list(self.edges), k=self.k, weights=self.weights,
                      subgraph=self.subgraph, s=self.s, t=self.t,
                      marked_edge=self.marked_edge)
        fields.update(changes)
        return Graph(**fields)


def weight_length(w: int) -> int:
    """Number of bits of ``w`` written without leading zeros."""
    return int(w).bit_length()


# -- text format -------------------------------------------------------------

def load_graph(text: str) -> Graph:
    lines = text.splitlines()
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    rows = [(no, ln) for no, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise GraphParseError("empty graph file")
    no, header = rows[0]
    try:
        n, m, k = (int(x) for x in header.split())
    except ValueError:
        raise GraphParseError("header must be 'n m k'", no) from None
    if len(rows) < 1 + m:
        raise GraphParseError(f"expected {m} edge lines, found {len(rows) - 1}", rows[-1][0])
    edges, weights = [], []
    seen = set()
    for no, ln in rows[1:1 + m]:
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise GraphParseError("edge line must be 'u v [w]'", no)
        try:
            u, v = int(parts[0]), int(parts[1])
            w = int(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise GraphParseError("non-integer field", no) from None
        if u == v:
            raise GraphParseError("self-loop", no)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError("dangling node index", no)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError("duplicate edge", no)
        seen.add(key)
        if w is not None and w < 1:
            raise GraphParseError("weight < 1", no)
        edges.append((u, v))
        weights.append(w)
    if any(w is None for w in weights) and any(w is not None for w in weights):
        raise GraphParseError("either all or no edges carry weights", rows[1][0])
    weights = None if not weights or weights[0] is None else weights

    subgraph = s = t = marked = None
    for no, ln in rows[1 + m:]:
        tag, _, rest = ln.partition(":")
        vals = rest.split()
        try:
            nums = [int(x) for x in vals]
        except ValueError:
            raise GraphParseError("non-integer field", no) from None
        if any(x < 0 for x in nums):
            raise GraphParseError("negative index", no)
        if tag == "H":
            if any(x >= m for x in nums):
                raise GraphParseError("dangling edge index", no)
            subgraph = frozenset(nums)
        elif tag == "ST":
            if len(nums) != 2 or any(x >= n for x in nums):
                raise GraphParseError("ST needs two node indices", no)
            if nums[0] == nums[1]:
                raise GraphParseError("s and t must differ", no)
            s, t = nums
        elif tag == "E*":
            if len(nums) != 1 or nums[0] >= m:
                raise GraphParseError("E* needs one edge index", no)
            marked = nums[0]
        else:
            raise GraphParseError(f"unknown section {tag!r}", no)
    return Graph(n, edges, k=k, weights=weights, subgraph=subgraph, s=s, t=t,
                 marked_edge=marked)


def save_graph(g: Graph) -> str:
    out = [f"{g.n} {g.m} {g.k}"]
    for i, (u, v) in enumerate(g.edges):
        out.append(f"{u} {v} {g.weights[i]}" if g.weights is not None else f"{u} {v}")
    if g.subgraph is not None:
        out.append("H: " + " ".join(str(i) for i in sorted(g.subgraph)))
    if g.s is not None:
        out.append(f"ST: {g.s} {g.t}")
    if g.marked_edge is not None:
        out.append(f"E*: {g.marked_edge}")
    return "\n".join(out) + "\n"


# -- generators --------------------------------------------------------------

GENERATOR_KINDS = ("gnp-connected", "path", "cycle", "grid", "complete", "tree-plus-chords", "star")
WEIGHT_MODES = ("none", "uniform", "all-equal", "distinct-random")


def generate(kind: str, n: int, seed: int = 0, *, p: float | None = None,
             chords: int | None = None, rows: int | None = None,
             weights: str = "none", W: int = 16, k: int = 1,
             max_tries: int = 1000) -> Graph:
    """Build a connected graph of the given kind, deterministically from ``seed``."""
    rng = random.Random(seed)
    if n < 1:
        raise GraphError("n must be positive")
    if kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, n)]
    elif kind == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "grid":
        r = rows or max(1, int(n ** 0.5))
        if n % r:
            raise GraphError(f"grid with {r} rows needs n divisible by {r}")
        cols = n // r
        edges = []
        for i in range(r):
            for j in range(cols):
                v = i * cols + j
                if j + 1 < cols:
                    edges.append((v, v + 1))
                if i + 1 < r:
                    edges.append((v, v + cols))
    elif kind == "tree-plus-chords":
        edges = [(rng.randrange(i), i) for i in range(1, n)]
        present = {(min(e), max(e)) for e in edges}
        extra = chords if chords is not None else n // 2
        possible = n * (n - 1) // 2 - len(present)
        if extra > possible:
            raise GraphError("too many chords requested")
        while extra > 0:
            u, v = rng.sample(range(n), 2)
            key = (min(u, v), max(u, v))
            if key not in present:
                present.add(key)
                edges.append(key)
                extra -= 1
    elif kind == "gnp-connected":
        if p is None:
            p = default_density(n)
        if not 0 < p <= 1:
            raise GraphError("gnp-connected needs 0 < p <= 1")
        for _ in range(max_tries):
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
            if is_connected(n, edges):
                break
        else:
            raise GraphError(f"no connected G({n}, {p}) sample in {max_tries} tries")
    else:
        raise GraphError(f"unknown generator kind {kind!r}")

    w = assign_weights(len(edges), weights, W, rng)
    return Graph(n, edges, k=k, weights=w)


def default_density(n: int) -> float:
    """Edge probability 2 ln n / n: sparse, yet connected after few resamples."""
    return 1.0 if n <= 3 else min(1.0, 2 * math.log(n) / n)


def assign_weights(m: int, mode: str, W: int, rng: random.Random) -> list[int] | None:
    if mode == "none":
        return None
    if W < 1:
        raise GraphError("W must be >= 1")
    if mode == "uniform":
        return [rng.randint(1, W) for _ in range(m)]
    if mode == "all-equal":
        return [W] * m
    if mode == "distinct-random":
        if W < m:
            raise GraphError("distinct weights need W >= m")
        return rng.sample(range(1, W + 1), m)
    raise GraphError(f"unknown weight mode {mode!r}")


# -- oracles -----------------------------------------------------------------

class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def components(n: int, edges) -> list[int]:
    """Cluster label per node: the smallest node of its component in (V, edges)."""
    dsu = _DSU(n)
    for u, v in edges:
        dsu.union(u, v)
    return [dsu.find(v) for v in range(n)]


def is_connected(n: int, edges) -> bool:
    return n <= 1 or len(set(components(n, edges))) == 1


def outgoing_edges(g: Graph, subset) -> set[int]:
    """Edge indices whose endpoints lie in different components of (V, subset)."""
    label = components(g.n, [g.edges[i] for i in subset])
    return {i for i, (u, v) in enumerate(g.edges) if label[u] != label[v]}


def oracle_mst(g: Graph, weights: list[int] | None = None) -> tuple[int, set[int]]:
    """Kruskal: (MST weight, one MST edge set)."""
    w = weights if weights is not None else g.weights
    if w is None:
        raise GraphError("oracle_mst needs edge weights")
    if not is_connected(g.n, g.edges):
        raise GraphError("graph is not connected")
    dsu = _DSU(g.n)
    total, chosen = 0, set()
    for i in sorted(range(g.m), key=lambda i: (w[i], i)):
        if dsu.union(*g.edges[i]):
            total += w[i]
            chosen.add(i)
    return total, chosen


def bfs_distances(n: int, edges, source: int) -> list[float]:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [float("inf")] * n
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if dist[y] == float("inf"):
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def oracle_distances(g: Graph, subset=None) -> list[list[float]]:
    """All-pairs hop distances in (V, subset) (all of E when ``subset`` is None)."""
    edges = g.edges if subset is None else [g.edges[i] for i in subset]
    return [bfs_distances(g.n, edges, s) for s in range(g.n)]


def oracle_connectivity(g: Graph, subset, s: int | None = None, t: int | None = None) -> bool:
    edges = [g.edges[i] for i in subset]
    if s is not None:
        label = components(g.n, edges)
        return label[s] == label[t]
    return is_connected(g.n, edges)


def oracle_csv(g: Graph) -> str:
    """All-pairs distances plus the MST weight (when weighted) as CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["u", "v", "distance"])
    for u, row in enumerate(oracle_distances(g)):
        for v in range(u + 1, g.n):
            writer.writerow([u, v, row[v]])
    if g.weights is not None:
        writer.writerow(["mst_weight", "", oracle_mst(g)[0]])
    return buf.getvalue()
