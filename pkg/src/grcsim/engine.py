"""Round semantics of the reconfigurable circuits model on arbitrary graphs.

A node program is a callable ``program(view)`` returning a generator.  Each
``yield Step(beeps, partition)`` is one round: the partition is the node's
local pin partition for that round and ``beeps`` the local pins it beeps on.
The value sent back into the generator is the round's :class:`Feedback`.
When the generator returns, the node halts and its return value becomes the
node's output.

Pins are addressed locally by an integer *pin code*
``(port - 1) * k + (index - 1)``; see :func:`pin`.  A node never learns any
global identifier.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from .graph import Graph


class ModelError(RuntimeError):
    pass


class MalformedPartition(ModelError):
    def __init__(self, node: int, reason: str):
        self.node = node
        super().__init__(f"node {node}: malformed local pin partition ({reason})")


class ContractViolation(ModelError):
    pass


def pin(port: int, index: int, k: int) -> int:
    """Local pin code of pin ``index`` (1-based) on edge behind ``port`` (1-based)."""
    return (port - 1) * k + (index - 1)


def pin_of(code: int, k: int) -> tuple[int, int]:
    """Inverse of :func:`pin`: ``(port, index)``."""
    return code // k + 1, code % k + 1


def singleton_partition(degree: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple((c,) for c in range(degree * k))


def make_partition(degree: int, k: int, groups: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    """Canonical local partition: the given groups plus singletons for the rest."""
    parts = []
    used = set()
    for grp in groups:
        grp = tuple(sorted(set(grp)))
        if not grp:
            continue
        if used.intersection(grp):
            raise ValueError("groups overlap")
        used.update(grp)
        parts.append(grp)
    parts.extend((c,) for c in range(degree * k) if c not in used)
    parts.sort()
    return tuple(parts)


class Step(NamedTuple):
    beeps: tuple = ()
    partition: tuple | None = None
    state: str | None = None


class Feedback:
    """Per-pin beep bits of one round, as observed by one node."""

    __slots__ = ("_pins", "_class_of", "_beeped")

    def __init__(self, pins, class_of, beeped):
        self._pins = pins
        self._class_of = class_of
        self._beeped = beeped

    def __getitem__(self, code: int) -> bool:
        return self._class_of[self._pins[code]] in self._beeped

    def many(self, codes) -> list[bool]:
        """Feedback of several pins at once (hot path of message frames)."""
        pins, class_of, beeped = self._pins, self._class_of, self._beeped
        return [class_of[pins[c]] in beeped for c in codes]

    def bits(self) -> str:
        return "".join("1" if self[c] else "0" for c in range(len(self._pins)))


class NodeView:
    """Everything a node program may observe: degree, pins per edge, local input, coins.

    There is deliberately no access to node identities, ``n``, ``m`` or any
    non-incident structure.
    """

    __slots__ = ("degree", "k", "local_input", "_rng")

    def __init__(self, degree: int, k: int, local_input, rng):
        self.degree = degree
        self.k = k
        self.local_input = local_input
        self._rng = rng

    def coin(self) -> int:
        return self._rng.getrandbits(1)

    def randbits(self, count: int) -> int:
        return self._rng.getrandbits(count) if count > 0 else 0


def node_seed(seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"grc:{seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def default_rng_factory(seed: int) -> Callable[[int], random.Random]:
    return lambda index: random.Random(node_seed(seed, index))


# -- circuits ----------------------------------------------------------------

@dataclass
class CircuitPartition:
    round: int
    class_of: list[int]

    @property
    def classes(self) -> list[frozenset[int]]:
        groups: dict[int, set[int]] = {}
        for p, c in enumerate(self.class_of):
            groups.setdefault(c, set()).add(p)
        return [frozenset(groups[c]) for c in sorted(groups)]

    def same_circuit(self, p: int, q: int) -> bool:
        return self.class_of[p] == self.class_of[q]


def global_pin_table(graph: Graph, k: int) -> list[list[int]]:
    """For every node, local pin code -> global pin id ``edge * k + index - 1``."""
    return [[e * k + i for e in graph.ports[v] for i in range(k)] for v in range(graph.n)]


def check_partition(node: int, partition, degree: int, k: int) -> None:
    seen = [False] * (degree * k)
    for part in partition:
        if not part:
            raise MalformedPartition(node, "empty part")
        for c in part:
            if not (isinstance(c, int) and 0 <= c < degree * k):
                raise MalformedPartition(node, f"pin code {c!r} is not incident")
            if seen[c]:
                raise MalformedPartition(node, f"pin code {c} appears twice")
            seen[c] = True
    if not all(seen):
        missing = seen.index(False)
        raise MalformedPartition(node, f"pin code {missing} omitted")


def form_circuits(graph: Graph, k: int, partitions, round: int = 0, tables=None) -> CircuitPartition:
    """Circuits as classes of the reflexive-transitive closure of local bindings.

    ``partitions[v]`` is node ``v``'s local pin partition over its pin codes.
    Each class is labelled by its smallest global pin id.
    """
    tables = tables or global_pin_table(graph, k)
    parent = list(range(graph.m * k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v, partition in enumerate(partitions):
        table = tables[v]
        check_partition(v, partition, len(table) // k if k else 0, k)
        for part in partition:
            if len(part) < 2:
                continue
            root = find(table[part[0]])
            for c in part[1:]:
                other = find(table[c])
                if other != root:
                    if other < root:
                        root, other = other, root
                    parent[other] = root
    return CircuitPartition(round, [find(p) for p in range(len(parent))])


# -- execution ---------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    partitions: list
    beeps: list
    circuits: CircuitPartition
    feedback: list[str]
    states: list


@dataclass
class RunResult:
    outputs: list
    rounds: int
    timed_out: bool
    halted_at: list
    state_log: list = field(default_factory=list)
    trace: list[RoundRecord] | None = None


class Simulation:
    """One GRC execution of ``program`` over ``graph``; single-threaded, replayable from the seed."""

    def __init__(self, graph: Graph, program, seed: int = 0, *, inputs=None,
                 rng_factory=None, trace: bool = False):
        self.graph = graph
        self.k = getattr(program, "k", None) or graph.k
        k = self.k
        n = graph.n
        self.tables = global_pin_table(graph, k)
        factory = rng_factory or default_rng_factory(seed)
        inputs = inputs if inputs is not None else [None] * n
        self.views = [NodeView(graph.degree(v), k, inputs[v], factory(v)) for v in range(n)]
        self.gens = [program(view) for view in self.views]
        self.partitions = [singleton_partition(graph.degree(v), k) for v in range(n)]
        self.circuits = CircuitPartition(0, list(range(graph.m * k)))
        self.round = 0
        self.active = list(range(n))
        self.outputs = [None] * n
        self.halted_at = [None] * n
        self.feedback = [None] * n
        self.labels = [None] * n
        self.state_log = [[] for _ in range(n)]
        self.trace = [] if trace else None

    def _advance(self, v):
        gen = self.gens[v]
        try:
            if self.feedback[v] is None:
                return next(gen)
            return gen.send(self.feedback[v])
        except StopIteration as stop:
            self.outputs[v] = stop.value
            self.halted_at[v] = self.round
            return None

    def step_round(self) -> bool:
        """Run one round; returns False when every node has halted before it."""
        t = self.round
        steps = {}
        still = []
        for v in self.active:
            step = self._advance(v)
            if step is None:
                continue
            steps[v] = step
            still.append(v)
        self.active = still
        if not still:
            return False

        k = self.k
        dirty = False
        for v, step in steps.items():
            if step.state is not None and step.state != self.labels[v]:
                self.labels[v] = step.state
                self.state_log[v].append((t, step.state))
            part = step.partition
            if part is None or part is self.partitions[v]:
                continue
            if part != self.partitions[v]:
                check_partition(v, part, self.graph.degree(v), k)
                if t == 0 and len(part) != len(self.partitions[v]):
                    raise MalformedPartition(v, "round-0 partition must be all singletons")
                dirty = True
            self.partitions[v] = part
        if dirty:
            self.circuits = form_circuits(self.graph, k, self.partitions, t, self.tables)
        else:
            self.circuits = CircuitPartition(t, self.circuits.class_of)
        class_of = self.circuits.class_of

        beeped = set()
        for v, step in steps.items():
            beeps = step.beeps
            if not beeps:
                continue
            table = self.tables[v]
            try:
                if min(beeps) < 0:
                    raise IndexError
                beeped.update([class_of[table[c]] for c in beeps])
            except (IndexError, TypeError):
                raise ContractViolation(f"node {v} beeped on a non-incident pin {beeps!r}") from None

        for v in still:
            self.feedback[v] = Feedback(self.tables[v], class_of, beeped)

        if self.trace is not None:
            self.trace.append(RoundRecord(
                round=t,
                partitions=list(self.partitions),
                beeps=[tuple(sorted(steps[v].beeps)) if v in steps else () for v in range(self.graph.n)],
                circuits=self.circuits,
                feedback=[self.feedback[v].bits() if v in steps else "" for v in range(self.graph.n)],
                states=list(self.labels),
            ))
        self.round += 1
        return True

    def run(self, max_rounds: int) -> RunResult:
        if max_rounds <= 0:
            raise ValueError("max_rounds must be positive")
        while self.round < max_rounds:
            if not self.step_round():
                break
        else:
            # one more resumption lets nodes that finish on the last feedback halt
            for v in list(self.active):
                if self._advance(v) is None:
                    self.active.remove(v)
        return RunResult(
            outputs=self.outputs,
            rounds=self.round,
            timed_out=bool(self.active),
            halted_at=self.halted_at,
            state_log=self.state_log,
            trace=self.trace,
        )


def run_until_halt(graph: Graph, program, seed: int = 0, max_rounds: int = 100_000, **kwargs) -> RunResult:
    return Simulation(graph, program, seed, **kwargs).run(max_rounds)


def run_round(sim: Simulation) -> RoundRecord | None:
    """Advance ``sim`` by one round and return its record (tracing forced on)."""
    if sim.trace is None:
        sim.trace = []
    return sim.trace[-1] if sim.step_round() else None


# -- trace dump --------------------------------------------------------------

def _fmt_partition(partition, k):
    return "|".join("+".join("%d.%d" % pin_of(c, k) for c in part) for part in partition)


def dump_trace(trace: list[RoundRecord], k: int) -> str:
    """Line-oriented text: one record per (round, node)."""
    lines = []
    for rec in trace:
        for v, part in enumerate(rec.partitions):
            beeps = ",".join("%d.%d" % pin_of(c, k) for c in rec.beeps[v])
            lines.append(f"t={rec.round} v={v} part={_fmt_partition(part, k)} "
                         f"beeps={beeps} fb={rec.feedback[v]} state={rec.states[v]}")
    return "\n".join(lines) + ("\n" if lines else "")
