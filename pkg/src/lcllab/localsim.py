"""Synchronous LOCAL runtime with private randomness and locality accounting."""

import pickle
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graph import Edge, LabeledGraph, bfs, view


class RoundLimit(RuntimeError):
    """Some node had not decided when the round limit was reached."""


class MemoryBudgetExceeded(RuntimeError):
    """The messages of one round outgrew the configured byte budget."""


DEFAULT_MEMORY_BUDGET = 1 << 28


def node_rng(seed, node, rnd=0):
    """Keyed counter-based stream for one node and round."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(node, rnd)))


def node_bits(seed, node, rnd, k):
    return node_rng(seed, node, rnd).integers(0, 2, size=k).tolist()


@dataclass(frozen=True)
class NodeInfo:
    """What a node knows before any communication."""

    node: int
    ident: int
    label: object
    inputs: dict
    ports: tuple  # own half-edge label per port
    n: int
    seed: int

    def rng(self, rnd):
        return node_rng(self.seed, self.node, rnd)


class NodeProgram:
    """Override init and step. Outboxes are lists aligned with ports (None = silent)."""

    name = "program"

    def init(self, info):
        """Return (state, outbox, output or None)."""
        raise NotImplementedError

    def step(self, info, state, inbox, rnd):
        """inbox[p] is the message received on port p, or None."""
        raise NotImplementedError


def broadcast(info, msg):
    return [msg] * len(info.ports)


@dataclass
class RunTrace:
    rounds: int
    outputs: list
    decided_at: list
    radius: list
    extra: dict = field(default_factory=dict)

    def histogram(self):
        return dict(sorted(Counter(self.radius).items()))

    def to_dict(self):
        return {
            "rounds": self.rounds,
            "outputs": self.outputs,
            "decided_at": self.decided_at,
            "radius": self.radius,
            "radius_histogram": {str(k): v for k, v in self.histogram().items()},
        }


def _infos(g, seed):
    infos = []
    for v in range(g.n):
        ports = tuple(lab for _, _, lab, _ in g.incident(v))
        infos.append(NodeInfo(v, g.ident(v), g.labels[v], dict(g.inputs[v]), ports, g.n, seed))
    return infos


def _taint_radius(g, v, taint):
    dist = bfs(g, [v])
    return max(dist[u] for u in taint)


def run_sync(g, program, seed=0, max_rounds=1000, memory_budget=None):
    """Run `program` until every node has decided.

    Decided nodes keep taking part in communication; only their output is
    frozen. Each node carries the set of nodes its state has heard from,
    which bounds how far information actually travelled.
    """
    if max_rounds < 0:
        raise ValueError("max_rounds must be >= 0")
    budget = DEFAULT_MEMORY_BUDGET if memory_budget is None else memory_budget
    infos = _infos(g, seed)
    ports = [list(g.incident(v)) for v in range(g.n)]
    # where a message sent by v on port p arrives: (neighbour, neighbour's port)
    dest = []
    for v in range(g.n):
        row = []
        for i, u, _, _ in ports[v]:
            back = [p for p, (j, _, _, _) in enumerate(ports[u]) if j == i]
            row.append((u, back[0]))
        dest.append(row)
    state, outbox = [None] * g.n, [None] * g.n
    outputs, decided = [None] * g.n, [None] * g.n
    taint = [{v} for v in range(g.n)]
    radius = [None] * g.n

    def settle(v, out, rnd):
        if out is not None and decided[v] is None:
            outputs[v] = out
            decided[v] = rnd
            radius[v] = _taint_radius(g, v, taint[v])

    for v in range(g.n):
        state[v], outbox[v], out = program.init(infos[v])
        settle(v, out, 0)
    rnd = 0
    while any(d is None for d in decided):
        if rnd >= max_rounds:
            raise RoundLimit(f"{program.name}: undecided nodes after {max_rounds} rounds")
        rnd += 1
        inbox = [[None] * len(ports[v]) for v in range(g.n)]
        heard = [set() for _ in range(g.n)]
        size = 0
        for v in range(g.n):
            box = outbox[v] or []
            for p, msg in enumerate(box):
                if msg is None:
                    continue
                u, q = dest[v][p]
                inbox[u][q] = msg
                heard[u] |= taint[v]
                size += len(pickle.dumps(msg, protocol=4))
        if size > budget:
            raise MemoryBudgetExceeded(f"round {rnd}: {size} message bytes > {budget}")
        for v in range(g.n):
            taint[v] |= heard[v]
        for v in range(g.n):
            state[v], outbox[v], out = program.step(infos[v], state[v], inbox[v], rnd)
            settle(v, out, rnd)
    return RunTrace(rnd, outputs, decided, radius)


def run_as_view_function(g, radius_fn, output_fn, seed=0):
    """Each node's output as a function of its radius-T view.

    `radius_fn(v)` (or an int) gives T; `output_fn(view, bits)` sees the
    view and `bits(u)`, a random stream for view node u.
    """
    outputs, radius = [], []
    for v in range(g.n):
        t = radius_fn(v) if callable(radius_fn) else radius_fn
        vw = view(g, [v], t)
        outputs.append(output_fn(vw, lambda u: node_rng(seed, u, 0)))
        radius.append(t)
    return RunTrace(max(radius, default=0), outputs, list(radius), radius)


# programs


class ConstantProgram(NodeProgram):
    name = "constant"

    def __init__(self, value=0):
        self.value = value

    def init(self, info):
        return None, None, self.value


class FloodProgram(NodeProgram):
    """Learn every identifier, then output the largest one.

    Decides as soon as n identifiers are known, so on a connected graph the
    last node decides at round diameter.
    """

    name = "flood"

    def init(self, info):
        known = frozenset([info.ident])
        return known, broadcast(info, known), max(known) if info.n == 1 else None

    def step(self, info, known, inbox, rnd):
        for msg in inbox:
            if msg is not None:
                known = known | msg
        out = max(known) if len(known) == info.n else None
        return known, broadcast(info, known), out


class RandomBitProgram(NodeProgram):
    """0-round program: output one private random bit."""

    name = "randbit"

    def init(self, info):
        return None, None, int(info.rng(0).integers(0, 2))


def _record(info):
    return {"label": info.label, "inputs": info.inputs, "ports": info.ports}


def graph_from_knowledge(records, edges):
    """Rebuild a LabeledGraph from gathered node records and edge tuples.

    Records are keyed by identifier; edges are (id_a, port_a, id_b, port_b).
    Returns (graph, ident -> local index).
    """
    ids = sorted(records)
    local = {x: i for i, x in enumerate(ids)}
    es = []
    for a, pa, b, pb in sorted(edges):
        es.append(Edge(local[a], local[b], records[a]["ports"][pa], records[b]["ports"][pb]))
    inputs = [dict(records[x]["inputs"], id=x) for x in ids]
    g = LabeledGraph(len(ids), es, [records[x]["label"] for x in ids], inputs,
                     id_bound=max(ids, default=1))
    return g, local


def view_complete(records, edges):
    seen = Counter()
    for a, _, b, _ in edges:
        seen[a] += 1
        seen[b] += 1
    return all(seen[x] == len(r["ports"]) for x, r in records.items())


class GatherProgram(NodeProgram):
    """Flood everything known; ask `decide(graph, me, t, complete)` each round.

    After round t a node knows the records of all nodes within distance t
    and every edge with an endpoint closer than t, which is exactly the
    open radius-t view.
    """

    name = "gather"

    def __init__(self, decide):
        self.decide = decide

    def _msg(self, info, st):
        return [(st["records"], st["edges"], info.ident, p) for p in range(len(info.ports))]

    def _ask(self, info, st, rnd):
        g, local = graph_from_knowledge(st["records"], st["edges"])
        return self.decide(g, local[info.ident], rnd, view_complete(st["records"], st["edges"]))

    def init(self, info):
        st = {"records": {info.ident: _record(info)}, "edges": frozenset()}
        return st, self._msg(info, st), self._ask(info, st, 0)

    def step(self, info, st, inbox, rnd):
        records = dict(st["records"])
        edges = set(st["edges"])
        for p, msg in enumerate(inbox):
            if msg is None:
                continue
            recs, es, sender, sp = msg
            records.update(recs)
            edges |= es
            a, b = (info.ident, p), (sender, sp)
            edges.add(min(a, b) + max(a, b))
        st = {"records": records, "edges": frozenset(edges)}
        return st, self._msg(info, st), self._ask(info, st, rnd)


def badtree_gather_program():
    """The layered tree-detector solver recomputed on gathered views.

    A node decides once its layer plus the constraint radius plus one fits
    inside its view, or once it has seen its whole component.
    """
    from .detectors import BADTREE_RADIUS, solve_badtree

    def decide(g, me, t, complete):
        out, layer, _ = solve_badtree(g, g.marks())
        if complete:
            return out[me]
        if layer[me] is not None and layer[me] + BADTREE_RADIUS + 1 <= t:
            return out[me]
        return None

    prog = GatherProgram(decide)
    prog.name = "badtree"
    return prog


PROGRAMS = {
    "constant": ConstantProgram,
    "flood": FloodProgram,
    "randbit": RandomBitProgram,
    "badtree": badtree_gather_program,
}
