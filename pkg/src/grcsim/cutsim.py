"""Two-party simulation of circuit rounds across a node bipartition (A, B).

Each party runs the programs of its own nodes, knows only their local pin
partitions and beeps, and learns the rest from one message per round: for
every cut pin, the name of its side-local class and whether that class
carried a beep.  Chaining equal names across both messages recovers how cut
pins join into circuits.  :func:`verify_round_equivalence` replays a program
this way next to the engine and compares every feedback bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .engine import (Feedback, ModelError, NodeView, Simulation, check_partition,
                     default_rng_factory, global_pin_table, singleton_partition)
from .graph import Graph


class TraceCorruption(ModelError):
    pass


def cut_pins(graph: Graph, side_a, k: int) -> list[int]:
    """Global ids ``edge * k + index - 1`` of pins on edges crossing the cut, in (edge, index) order."""
    a = set(side_a)
    return [e * k + i for e, (u, v) in enumerate(graph.edges) if (u in a) != (v in a) for i in range(k)]


def name_width(q: int) -> int:
    return math.ceil(math.log2(q)) if q > 1 else 0


def project_classes(tables, k: int, partitions, nodes) -> dict[int, int]:
    """Closure of the bindings made by ``nodes`` only, over all pins they hold.

    Returns pin id -> class label (smallest pin id of the class).
    """
    parent = {}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for v in nodes:
        for p in tables[v]:
            parent.setdefault(p, p)
    for v in nodes:
        table = tables[v]
        for part in partitions[v]:
            if len(part) < 2:
                continue
            root = find(table[part[0]])
            for c in part[1:]:
                other = find(table[c])
                if other != root:
                    if other < root:
                        root, other = other, root
                    parent[other] = root
    return {p: find(p) for p in parent}


@dataclass
class SideMessage:
    names: list[int]
    beeps: list[bool]
    width: int

    def encode(self) -> str:
        fmt = f"0{self.width}b" if self.width else ""
        return "".join((format(nm, fmt) if self.width else "") + ("1" if b else "0")
                       for nm, b in zip(self.names, self.beeps))

    @classmethod
    def decode(cls, text: str, q: int) -> "SideMessage":
        width = name_width(q)
        if len(text) != q * (width + 1):
            raise ValueError("message length does not match the cut")
        names, beeps = [], []
        for i in range(q):
            chunk = text[i * (width + 1):(i + 1) * (width + 1)]
            names.append(int(chunk[:width], 2) if width else 0)
            beeps.append(chunk[width] == "1")
        return cls(names, beeps, width)


def side_message(q_pins, classes, beeped_classes) -> SideMessage:
    """Name classes by first appearance along the cut and attach the side's beep bit."""
    names = {}
    out = []
    for p in q_pins:
        out.append(names.setdefault(classes[p], len(names)))
    return SideMessage(out, [classes[p] in beeped_classes for p in q_pins], name_width(len(q_pins)))


def merge_cut(own: SideMessage, other: SideMessage) -> list[bool]:
    """Per cut pin: does its circuit carry a beep (from either side)?"""
    q = len(own.names)
    parent = list(range(q))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for msg in (own, other):
        first = {}
        for i, nm in enumerate(msg.names):
            j = first.setdefault(nm, i)
            if j != i:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    hot = set()
    for i in range(q):
        if own.beeps[i] or other.beeps[i]:
            hot.add(find(i))
    return [find(i) in hot for i in range(q)]


class Party:
    """One side of the cut: runs its nodes' programs and computes their feedback."""

    def __init__(self, graph: Graph, program, nodes, k: int, inputs, factory, tables, q_pins):
        self.nodes = sorted(nodes)
        self.k = k
        self.tables = tables
        self.q_pins = q_pins
        self.partitions = {v: singleton_partition(graph.degree(v), k) for v in self.nodes}
        self.gens = {v: program(NodeView(graph.degree(v), k, inputs[v], factory(v))) for v in self.nodes}
        self.active = list(self.nodes)
        self.feedback = {}
        self.outputs = {}
        self.steps = {}
        self.round = 0

    def advance(self):
        """Let every active node choose its partition and beeps for this round."""
        self.steps = {}
        still = []
        for v in self.active:
            gen = self.gens[v]
            try:
                step = gen.send(self.feedback[v]) if v in self.feedback else next(gen)
            except StopIteration as stop:
                self.outputs[v] = stop.value
                continue
            still.append(v)
            self.steps[v] = step
            if step.partition is not None and step.partition is not self.partitions[v]:
                check_partition(v, step.partition, len(self.tables[v]) // self.k, self.k)
                self.partitions[v] = step.partition
        self.active = still
        return bool(still)

    def message(self) -> SideMessage:
        self.classes = project_classes(self.tables, self.k, self.partitions, self.nodes)
        self.hot = {self.classes[self.tables[v][c]] for v, st in self.steps.items() for c in st.beeps}
        return side_message(self.q_pins, self.classes, self.hot)

    def finish(self, own: SideMessage, other: SideMessage):
        carried = merge_cut(own, other)
        on_cut = {}
        for p, hot in zip(self.q_pins, carried):
            on_cut[self.classes[p]] = hot
        beeped = {cls for cls in set(self.classes.values()) if on_cut.get(cls, cls in self.hot)}
        labels = list(range(max(self.classes, default=-1) + 1))
        for p, cls in self.classes.items():
            labels[p] = cls
        for v in self.active:
            self.feedback[v] = Feedback(self.tables[v], labels, beeped)
        self.round += 1


def simulate_round_two_party(alice: Party, bob: Party):
    """Advance both parties by one round; returns ``(still running, bits exchanged)``."""
    running_a = alice.advance()
    running_b = bob.advance()
    if not (running_a or running_b):
        return False, 0
    msg_a, msg_b = alice.message(), bob.message()
    alice.finish(msg_a, msg_b)
    bob.finish(msg_b, msg_a)
    return True, len(msg_a.encode()) + len(msg_b.encode())


@dataclass
class EquivalenceReport:
    rounds: int
    q: int
    bound: int
    bits: list[int] = field(default_factory=list)
    mismatches: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and all(b <= self.bound for b in self.bits)


def random_cut(n: int, rng: random.Random) -> set[int]:
    """A balanced random bipartition side (both sides nonempty when n >= 2)."""
    return set(rng.sample(range(n), max(1, n // 2)))


def verify_round_equivalence(graph: Graph, program, seed: int, side_a, rounds: int,
                             inputs=None) -> EquivalenceReport:
    """Run the engine and the two-party protocol side by side for ``rounds`` rounds.

    Both parties draw from the same per-node seeded streams as the engine
    (the shared random string).  A party whose nodes choose a different
    partition or beep set than the engine recorded raises
    :class:`TraceCorruption`; feedback differences are reported per pin as
    ``(round, node, pin code)``.
    """
    side_a = set(side_a)
    side_b = set(range(graph.n)) - side_a
    if not side_a or not side_b:
        raise ValueError("both sides of the cut must be nonempty")
    k = getattr(program, "k", None) or graph.k
    inputs = inputs if inputs is not None else [None] * graph.n
    sim = Simulation(graph, program, seed, inputs=inputs, trace=True)
    tables = global_pin_table(graph, k)
    q_pins = cut_pins(graph, side_a, k)
    q = len(q_pins)
    alice = Party(graph, program, side_a, k, inputs, default_rng_factory(seed), tables, q_pins)
    bob = Party(graph, program, side_b, k, inputs, default_rng_factory(seed), tables, q_pins)
    report = EquivalenceReport(0, q, 2 * q * (name_width(q) + 1))
    for t in range(rounds):
        if not sim.step_round():
            break
        rec = sim.trace[-1]
        running, bits = simulate_round_two_party(alice, bob)
        if not running:
            raise TraceCorruption(f"round {t}: parties halted while the engine ran")
        report.bits.append(bits)
        report.rounds += 1
        for party in (alice, bob):
            for v in party.nodes:
                stepped = v in party.steps
                if stepped != (rec.feedback[v] != ""):
                    raise TraceCorruption(f"round {t}: node {v} halting differs from the trace")
                if not stepped:
                    continue
                if party.partitions[v] != rec.partitions[v]:
                    raise TraceCorruption(f"round {t}: node {v} partition differs from the trace")
                if tuple(sorted(party.steps[v].beeps)) != rec.beeps[v]:
                    raise TraceCorruption(f"round {t}: node {v} beeps differ from the trace")
                mine = party.feedback[v].bits()
                for code, (x, y) in enumerate(zip(mine, rec.feedback[v])):
                    if x != y:
                        report.mismatches.append((t, v, code))
    return report
