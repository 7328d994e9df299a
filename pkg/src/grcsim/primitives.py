"""Building blocks shared by the composed algorithms.

Pin indices used by composed programs (k = 3):

* ``MSG`` (1): per-edge singleton circuits carrying neighbour messages,
* ``GLOBAL`` (2): the global circuit,
* ``CLUSTER`` (3): one circuit per cluster, bound along the cluster's edges.

All helpers here are generator functions meant to be driven with
``yield from`` inside a node program.  Every decision that changes the round
schedule depends only on what the whole graph hears on a global circuit, so
all nodes stay in lockstep without knowing ``n``.
"""

from __future__ import annotations

from .engine import Step, make_partition, pin, singleton_partition

MSG, GLOBAL, CLUSTER = 1, 2, 3


class ProtocolViolation(RuntimeError):
    pass


class Node:
    """Program-side bookkeeping for one node: pin layout, orientation, coins."""

    def __init__(self, view, k: int = 3):
        self.view = view
        self.degree = view.degree
        self.k = k
        self.coin = view.coin
        self.ports = range(1, self.degree + 1)
        self.partition = singleton_partition(self.degree, k)
        self._layouts = {}
        self.cluster_ports = frozenset()
        self.cpin = None
        self.gpin = pin(1, GLOBAL, k) if self.degree else None
        self.outward = None
        self.own = self.other = ()
        self.own_codes = self.other_codes = self.own_ports = self.other_ports = ()

    def code(self, port: int, index: int) -> int:
        return (port - 1) * self.k + (index - 1)

    def layout(self, cluster=frozenset(), global_indices=(GLOBAL,), cluster_index=CLUSTER):
        """Switch to a partition with global circuits and a cluster circuit along ``cluster`` ports."""
        cluster = frozenset(cluster)
        key = (cluster, tuple(global_indices), cluster_index)
        part = self._layouts.get(key)
        if part is None:
            groups = [[self.code(p, i) for p in self.ports] for i in global_indices]
            if cluster:
                groups.append([self.code(p, cluster_index) for p in cluster])
            part = make_partition(self.degree, self.k, groups)
            self._layouts[key] = part
        self.partition = part
        self.cluster_ports = cluster
        self.cpin = self.code(min(cluster), cluster_index) if cluster else None

    def step(self, beeps=(), state=None):
        return Step(beeps, self.partition, state)

    def heard_global(self, fb, own: bool, code=None) -> bool:
        code = self.gpin if code is None else code
        return fb[code] if code is not None else own

    def heard_cluster(self, fb, own: bool) -> bool:
        # a node without cluster edges is alone on its cluster and hears only itself
        return fb[self.cpin] if self.cpin is not None else own

    def set_orientation(self, outward):
        """``outward[p]`` is True when this node owns the first two rounds of each frame on port p."""
        self.outward = outward
        self.own = tuple((p, self.code(p, MSG)) for p in self.ports if outward[p])
        self.other = tuple((p, self.code(p, MSG)) for p in self.ports if not outward[p])
        self.own_ports, self.own_codes = (tuple(x) for x in zip(*self.own)) if self.own else ((), ())
        self.other_ports, self.other_codes = (tuple(x) for x in zip(*self.other)) if self.other else ((), ())


# -- CountingToLogn ----------------------------------------------------------

class Counting:
    """Back-to-back executions of CountingToLogn on a global circuit.

    Call :meth:`beep` at the start of each step and :meth:`observe` with what
    the global circuit carried; ``observe`` returns True once ``repetitions``
    executions have ended.
    """

    def __init__(self, node: Node, repetitions: int):
        self.node = node
        self.left = repetitions
        self.competitor = True
        self.steps = 0
        self.durations = []

    def beep(self) -> bool:
        if not self.competitor:
            return False
        if self.node.coin():
            return True
        self.competitor = False
        return False

    def observe(self, heard: bool) -> bool:
        self.steps += 1
        if heard:
            return False
        self.durations.append(self.steps)
        self.steps = 0
        self.left -= 1
        self.competitor = True
        return self.left <= 0


def counting_rounds(node: Node, repetitions: int = 1, state="counting"):
    """Run CountingToLogn ``repetitions`` times on the global circuit; returns the durations."""
    pacer = Counting(node, repetitions)
    g = node.gpin
    while True:
        b = pacer.beep()
        fb = yield node.step((g,) if b and g is not None else (), state)
        if pacer.observe(node.heard_global(fb, b)):
            return pacer.durations


def median_duration(durations, r: int) -> int:
    """The r-th fastest of 2r - 1 durations."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if len(durations) != 2 * r - 1:
        raise ValueError(f"need {2 * r - 1} durations, got {len(durations)}")
    return sorted(durations)[r - 1]


def counting_duration(n: int, rng) -> int:
    """One CountingToLogn execution among n competitors, without a network.

    On a global circuit every competitor hears the same OR, so only the
    number of survivors matters; returns the index of the first silent round.
    """
    alive = n
    t = 0
    while True:
        t += 1
        alive = bin(rng.getrandbits(alive)).count("1") if alive else 0
        if alive == 0:
            return t


# -- edge orientation and neighbour messages ---------------------------------

def orient_edges(node: Node, state="orient"):
    """Coin-flip symmetry breaking until every edge is oriented; returns the phase count.

    Phase round 1: heads nodes beep on every unoriented edge; from the second
    phase on, nodes that still have unoriented edges also beep on the global
    circuit, and a silent global circuit ends the procedure.  Phase round 2:
    a tails node that heard its neighbour orients the edge away from itself
    and acknowledges; the heads node hearing the acknowledgement orients it
    towards itself.
    """
    outward = [None] * (node.degree + 1)
    unoriented = list(node.ports)
    first = True
    phases = 0
    while True:
        heads = node.coin()
        beeps = [node.code(p, MSG) for p in unoriented] if heads else []
        if not first and unoriented:
            beeps.append(node.gpin)
        fb = yield node.step(beeps, state)
        if first:
            first = False
            node.layout(node.cluster_ports)
        elif not node.heard_global(fb, bool(unoriented)):
            break
        phases += 1
        acks = []
        if not heads:
            for p in unoriented:
                c = node.code(p, MSG)
                if fb[c]:
                    outward[p] = True
                    acks.append(c)
        fb = yield node.step(acks, state)
        if heads:
            for p in unoriented:
                if fb[node.code(p, MSG)]:
                    outward[p] = False
        unoriented = [p for p in unoriented if outward[p] is None]
    node.set_orientation(outward)
    return phases


def _decode_into(inbox, ports, first, second):
    # (1,1) -> 1, (0,0) -> 0, (0,1) -> no message, (1,0) is not a codeword
    for p, a, b in zip(ports, first, second):
        if a == b:
            inbox[p] = 1 if a else 0
        elif a:
            raise ProtocolViolation("beep followed by silence is not a codeword")


def frame(node: Node, msgs, extra=(), state=None):
    """One four-round message frame.

    ``msgs`` maps port -> bit (absent ports send nothing) or is a single bit
    sent on every port, None meaning silence everywhere.  The owner of an
    edge uses the first two rounds, the other endpoint the last two: two beeps
    encode 1, two silences 0, silence then beep "no message".  ``extra`` are
    additional pins beeped in the first round (global/cluster activity).
    Returns ``(inbox, fb)`` with ``inbox`` port -> bit for delivered messages
    and ``fb`` the first round's feedback.
    """
    own, other = node.own, node.other
    if isinstance(msgs, dict):
        get = msgs.get
        own1 = [c for p, c in own if get(p) == 1]
        own2 = [c for p, c in own if get(p) != 0]
        other1 = [c for p, c in other if get(p) == 1]
        other2 = [c for p, c in other if get(p) != 0]
    else:
        # the same bit (or nothing, for None) on every port
        own1 = list(node.own_codes) if msgs == 1 else []
        own2 = list(node.own_codes) if msgs != 0 else []
        other1 = node.other_codes if msgs == 1 else ()
        other2 = node.other_codes if msgs != 0 else ()
    fb1 = yield node.step(own1 + list(extra) if extra else own1, state)
    r1 = fb1.many(node.other_codes)
    fb = yield node.step(own2, state)
    r2 = fb.many(node.other_codes)
    fb = yield node.step(other1, state)
    r3 = fb.many(node.own_codes)
    fb = yield node.step(other2, state)
    inbox = {}
    _decode_into(inbox, node.other_ports, r1, r2)
    _decode_into(inbox, node.own_ports, r3, fb.many(node.own_codes))
    return inbox, fb1


# -- leader election ---------------------------------------------------------

def leader_election(node: Node, candidate: bool, c: int, state="leader"):
    """Beep tournament on the node's cluster circuit, paced by c CountingToLogn runs.

    Active candidates toss a coin each round and beep on heads; a silent
    candidate that hears a beep withdraws.  A withdrawal always follows some
    active candidate's beep, so a circuit with candidates keeps at least one.
    """
    active = candidate
    pacer = Counting(node, c)
    g = node.gpin
    while True:
        gb = pacer.beep()
        beeps = [g] if gb and g is not None else []
        heads = False
        if active:
            heads = bool(node.coin())
            if heads and node.cpin is not None:
                beeps.append(node.cpin)
        fb = yield node.step(beeps, state)
        if active and not heads and node.heard_cluster(fb, heads):
            active = False
        if pacer.observe(node.heard_global(fb, gb)):
            return active


# -- outgoing edge detection -------------------------------------------------

def detect_outgoing(node: Node, c: int, participate: bool = True, state="detect"):
    """Classify incident edges as outgoing w.r.t. the clusters of the current cluster circuit.

    Each cluster elects a leader, the leader beeps random bits on the cluster
    circuit while c CountingToLogn executions run on the global circuit, and
    every node forwards each bit to all neighbours (one frame per bit,
    pipelined one frame behind).  An edge whose two endpoints ever exchange
    differing bits is outgoing.  Non-participating nodes stay silent and are
    ignored by their neighbours.
    """
    leader = yield from leader_election(node, participate, c, state)
    pacer = Counting(node, c)
    g = node.gpin
    outgoing = set()
    prev = None
    ports = node.ports
    while True:
        gb = pacer.beep()
        extra = [g] if gb and g is not None else []
        bit = bool(leader and node.coin())
        if bit and node.cpin is not None:
            extra.append(node.cpin)
        inbox, fb = yield from frame(node, prev, extra, state)
        if prev is not None:
            outgoing.update(p for p, b in inbox.items() if b != prev)
        prev = int(node.heard_cluster(fb, bit)) if participate else None
        if pacer.observe(node.heard_global(fb, gb)):
            break
    inbox, _ = yield from frame(node, prev, (), state)
    if prev is not None:
        outgoing.update(p for p, b in inbox.items() if b != prev)
    return outgoing


def global_vote(node: Node, vote: bool, state=None, code=None):
    """One round: nodes with ``vote`` beep on a global circuit; returns whether anyone did."""
    code = node.gpin if code is None else code
    fb = yield node.step((code,) if vote and code is not None else (), state)
    return node.heard_global(fb, vote, code)


# -- standalone programs -----------------------------------------------------

class CountingProgram:
    """CountingToLogn executed ``repetitions`` times in a row; outputs the durations."""

    k = 3

    def __init__(self, repetitions: int = 1):
        self.repetitions = repetitions

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        yield node.step((), "setup")
        node.layout()
        durations = yield from counting_rounds(node, self.repetitions)
        return durations


class OrientProgram:
    """Orientation preprocessing only; outputs ``(outward per port, phases)``."""

    k = 3

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        phases = yield from orient_edges(node)
        return node.outward[1:], phases


class ExchangeProgram:
    """Orientation, then one frame carrying ``local_input['send']`` (port -> bit)."""

    k = 3

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        yield from orient_edges(node)
        inbox, _ = yield from frame(node, dict(view.local_input.get("send", {})), (), "exchange")
        return inbox


class LeaderElectionProgram:
    """Leader election among ``local_input['candidate']`` nodes on the global circuit.

    A final round in which leaders beep reveals an empty candidate set; the
    output is ``(is_leader, some_leader_exists)``.
    """

    k = 3

    def __init__(self, c: int = 3):
        self.c = c

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        yield node.step((), "setup")
        # candidates share pin index 3 bound everywhere, i.e. a second global circuit
        node.layout(node.ports)
        leader = yield from leader_election(node, bool(view.local_input and view.local_input.get("candidate")), self.c)
        fb = yield node.step((node.cpin,) if leader and node.cpin is not None else (), "announce")
        return leader, node.heard_cluster(fb, leader)


class OutgoingProgram:
    """Outgoing edge detection for the edge set ``local_input['in_h']`` (bool per port)."""

    k = 3

    def __init__(self, c: int = 3):
        self.c = c

    def __call__(self, view):
        return self._run(view)

    def _run(self, view):
        node = Node(view, self.k)
        in_h = view.local_input["in_h"]
        yield from orient_edges(node)
        node.layout({p for p in node.ports if in_h[p - 1]})
        out = yield from detect_outgoing(node, self.c)
        return out
