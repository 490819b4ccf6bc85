"""LCL problems, labelings, local checking and brute-force completion."""

import os
import random
from dataclasses import dataclass, field

from .graph import BOT, bfs


class _Unassigned:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNASSIGNED"

    def __reduce__(self):
        return (_Unassigned, ())


UNASSIGNED = _Unassigned()

DEFAULT_CONFIG = {"bruteforce.max_assignments": 2_000_000}


class BudgetExceeded(RuntimeError):
    """Search gave up because it ran out of assignments, not because no solution exists."""


def config_value(key):
    if key == "bruteforce.max_assignments" and os.environ.get("LCLLAB_BUDGET"):
        return int(os.environ["LCLLAB_BUDGET"])
    return DEFAULT_CONFIG[key]


@dataclass(frozen=True)
class Violation:
    node: int
    constraint: str
    detail: str = ""

    def to_dict(self):
        return {"node": self.node, "constraint": self.constraint, "detail": self.detail}


class Labeling:
    """Node outputs plus half-edge outputs keyed by (node, edge index).

    Slots not yet decided hold UNASSIGNED. BOT is an ordinary label.
    """

    __slots__ = ("nodes", "half")

    def __init__(self, nodes, half=None):
        self.nodes = list(nodes)
        self.half = dict(half or {})

    @classmethod
    def empty(cls, g, halves=False):
        half = {}
        if halves:
            for e_idx, e in enumerate(g.edges):
                half[(e.u, e_idx)] = UNASSIGNED
                half[(e.v, e_idx)] = UNASSIGNED
        return cls([UNASSIGNED] * g.n, half)

    def copy(self):
        return Labeling(self.nodes, self.half)

    def __getitem__(self, v):
        return self.nodes[v]

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        return isinstance(other, Labeling) and self.nodes == other.nodes and self.half == other.half

    def __repr__(self):
        return f"Labeling({self.nodes!r})"

    def is_total(self):
        return all(x is not UNASSIGNED for x in self.nodes) and all(
            x is not UNASSIGNED for x in self.half.values()
        )

    def restrict(self, keep):
        keep = set(keep)
        nodes = [x if v in keep else UNASSIGNED for v, x in enumerate(self.nodes)]
        half = {k: (x if k[0] in keep else UNASSIGNED) for k, x in self.half.items()}
        return Labeling(nodes, half)


class Context:
    """Read access to (graph, labeling) for constraint predicates.

    Problems may subclass this to memoize quantities derived from the whole
    labeling; a fresh context is made whenever the labeling changes.
    """

    def __init__(self, g, out, shared=None):
        self.g = g
        self.out = out
        self.memo = {}
        # facts about g alone; a search passes one dict to all its contexts
        self.shared = {} if shared is None else shared

    def cached(self, key, fn):
        try:
            return self.memo[key]
        except KeyError:
            val = self.memo[key] = fn()
            return val

    def static(self, key, fn):
        """Like cached, for values that do not depend on the labeling."""
        try:
            return self.shared[key]
        except KeyError:
            val = self.shared[key] = fn()
            return val


@dataclass
class LclProblem:
    """A locally checkable labeling problem given as a predicate.

    `constraint(ctx, v)` yields (constraint id, detail) pairs for every
    violation at v. It may read inputs and outputs within distance `radius`
    of v only, and outputs within `out_radius`. It must treat UNASSIGNED
    outputs as unknown and report only violations that no completion could
    repair; the search relies on this to prune.
    """

    name: str
    radius: int
    node_outputs: object
    constraint: object
    half_outputs: object = None
    node_inputs: tuple = ()
    half_inputs: tuple = ()
    max_degree: int = None
    out_radius: int = None
    context: type = Context
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.out_radius is None:
            self.out_radius = self.radius

    def node_candidates(self, g, v):
        c = self.node_outputs
        return list(c(g, v)) if callable(c) else list(c)

    def half_candidates(self, g, v, e):
        c = self.half_outputs
        return list(c(g, v, e)) if callable(c) else list(c)

    def has_half_outputs(self):
        return self.half_outputs is not None


def _violations(p, ctx, v):
    return [Violation(v, str(cid), str(detail)) for cid, detail in p.constraint(ctx, v)]


def check_node(p, g, out, v, isolate=False):
    """Violations at v. With isolate=True the predicate only sees G[N_r[v]]."""
    if not isolate:
        return _violations(p, p.context(g, out), v)
    dist = bfs(g, [v], p.radius)
    sub, fwd, old = g.induced(dist)
    edge_map = {}
    k = 0
    for i, e in enumerate(g.edges):
        if e.u in fwd and e.v in fwd:
            edge_map[i] = k
            k += 1
    half = {
        (fwd[w], edge_map[i]): x for (w, i), x in out.half.items() if w in fwd and i in edge_map
    }
    sub_out = Labeling([out.nodes[w] for w in old], half)
    found = _violations(p, p.context(sub, sub_out), fwd[v])
    return [Violation(v, x.constraint, x.detail) for x in found]


def check_all(p, g, out):
    ctx = p.context(g, out)
    res = []
    for v in range(g.n):
        res.extend(_violations(p, ctx, v))
    return res


# brute force search


class _Search:
    def __init__(self, p, g, partial, seed, budget, scope=None):
        self.p = p
        self.g = g
        self.scope = range(g.n) if scope is None else sorted(set(scope))
        in_scope = set(self.scope)
        self.out = partial.copy() if partial is not None else Labeling.empty(g, p.has_half_outputs())
        if p.has_half_outputs():
            for e_idx, e in enumerate(g.edges):
                for w in (e.u, e.v):
                    self.out.half.setdefault((w, e_idx), UNASSIGNED)
        self.budget = config_value("bruteforce.max_assignments") if budget is None else budget
        self.spent = 0
        self.shared = {}
        self.rng = random.Random(seed) if seed is not None else None
        self.near = [sorted(u for u in bfs(g, [v], p.out_radius) if u in in_scope)
                     for v in range(g.n)]
        self.slots = []
        for v in range(g.n):
            if self.out.nodes[v] is UNASSIGNED:
                self.slots.append(("n", v))
        for key in sorted(self.out.half):
            if self.out.half[key] is UNASSIGNED:
                self.slots.append(("h",) + key)
        self.slot_node = {s: s[1] for s in self.slots}
        self.by_node = {}
        for s in self.slots:
            self.by_node.setdefault(s[1], []).append(s)

    def _tick(self):
        self.spent += 1
        if self.spent > self.budget:
            raise BudgetExceeded(f"{self.p.name}: more than {self.budget} assignments")

    def get(self, s):
        return self.out.nodes[s[1]] if s[0] == "n" else self.out.half[(s[1], s[2])]

    def put(self, s, x):
        if s[0] == "n":
            self.out.nodes[s[1]] = x
        else:
            self.out.half[(s[1], s[2])] = x

    def ok_around(self, v):
        ctx = self.p.context(self.g, self.out, self.shared)
        for w in self.near[v]:
            for _ in self.p.constraint(ctx, w):
                return False
        return True

    def candidates(self, s):
        if s[0] == "n":
            c = self.p.node_candidates(self.g, s[1])
        else:
            c = self.p.half_candidates(self.g, s[1], s[2])
        if self.rng is not None:
            self.rng.shuffle(c)
        return c

    def filtered(self, s, cands):
        keep = []
        for x in cands:
            self._tick()
            self.put(s, x)
            if self.ok_around(self.slot_node[s]):
                keep.append(x)
        self.put(s, UNASSIGNED)
        return keep

    def initial_domains(self):
        if not self.ok_around_all():
            return None
        doms = {}
        for s in self.slots:
            doms[s] = self.filtered(s, self.candidates(s))
            if not doms[s]:
                return None
        return doms

    def ok_around_all(self):
        ctx = self.p.context(self.g, self.out, self.shared)
        return all(not any(True for _ in self.p.constraint(ctx, v)) for v in self.scope)

    def neighbours_of(self, s):
        """Unassigned slots whose checks can see slot s."""
        v = self.slot_node[s]
        seen = []
        for w in self.near[v]:
            for t in self.by_node.get(w, ()):
                if t != s and self.get(t) is UNASSIGNED:
                    seen.append(t)
        return seen

    def solutions(self, doms, limit=None):
        found = 0
        order = {s: i for i, s in enumerate(self.slots)}

        def rec(doms):
            nonlocal found
            free = [s for s in self.slots if self.get(s) is UNASSIGNED]
            if not free:
                if self.ok_around_all():
                    found += 1
                    yield self.out.copy()
                return
            s = min(free, key=lambda t: (len(doms[t]), order[t]))
            for x in doms[s]:
                self._tick()
                self.put(s, x)
                if self.ok_around(self.slot_node[s]):
                    new = dict(doms)
                    dead = False
                    for t in self.neighbours_of(s):
                        new[t] = self.filtered(t, doms[t])
                        if not new[t]:
                            dead = True
                            break
                    if not dead:
                        yield from rec(new)
                        if limit is not None and found >= limit:
                            self.put(s, UNASSIGNED)
                            return
                self.put(s, UNASSIGNED)

        yield from rec(doms)


def brute_force_solve(p, g, partial=None, seed=None, budget=None, scope=None):
    """A total extension of `partial` that passes check_all, or None.

    With `scope`, only the constraints of those nodes are enforced; this is
    how a cluster is completed inside a view whose rim is already fixed.
    Raises BudgetExceeded when the assignment budget runs out first.
    """
    search = _Search(p, g, partial, seed, budget, scope)
    doms = search.initial_domains()
    if doms is None:
        return None
    for sol in search.solutions(doms, limit=1):
        return sol
    return None


def enumerate_solutions(p, g, partial=None, seed=None, budget=None, scope=None):
    search = _Search(p, g, partial, seed, budget, scope)
    doms = search.initial_domains()
    if doms is None:
        return
    yield from search.solutions(doms)


# explicit centered-ball form of a constraint, for conformance testing


def centered_ball(g, out, v, r):
    """G[N_r[v]] as a networkx graph with each edge subdivided.

    Subdividing turns half-edge labels into ordinary edge attributes so that
    plain labeled isomorphism respects which endpoint carries which label.
    Identifiers are dropped; everything else in the input record is kept.
    """
    import networkx as nx

    dist = bfs(g, [v], r)
    h = nx.Graph()
    for w in dist:
        rec = tuple(sorted((k, repr(x)) for k, x in g.inputs[w].items() if k != "id"))
        h.add_node(("n", w), kind="node", label=repr(g.labels[w]), rec=rec,
                   out=repr(out.nodes[w]), center=(w == v))
    for i, e in enumerate(g.edges):
        if e.u in dist and e.v in dist:
            mid = ("e", i)
            h.add_node(mid, kind="edge", label="", rec=(), out="", center=False)
            h.add_edge(("n", e.u), mid, label=repr(e.lu), out=repr(out.half.get((e.u, i))))
            h.add_edge(("n", e.v), mid, label=repr(e.lv), out=repr(out.half.get((e.v, i))))
    return h


class BallCatalogue:
    """A finite set of allowed centered balls, matched up to isomorphism."""

    def __init__(self, radius):
        self.radius = radius
        self.balls = {}

    @staticmethod
    def _key(h):
        import networkx as nx

        return nx.weisfeiler_lehman_graph_hash(h, node_attr="sig", edge_attr="sig")

    @staticmethod
    def _sign(h):
        for n, d in h.nodes(data=True):
            d["sig"] = repr((d["kind"], d["label"], d["rec"], d["out"], d["center"]))
        for a, b, d in h.edges(data=True):
            d["sig"] = repr((d["label"], d["out"]))
        return h

    def add(self, g, out, v):
        h = self._sign(centered_ball(g, out, v, self.radius))
        bucket = self.balls.setdefault(self._key(h), [])
        if not any(self._iso(h, k) for k in bucket):
            bucket.append(h)

    def __contains__(self, item):
        g, out, v = item
        h = self._sign(centered_ball(g, out, v, self.radius))
        return any(self._iso(h, k) for k in self.balls.get(self._key(h), []))

    def __len__(self):
        return sum(len(b) for b in self.balls.values())

    @staticmethod
    def _iso(a, b):
        import networkx as nx

        same = lambda x, y: x["sig"] == y["sig"]  # noqa: E731
        return nx.is_isomorphic(a, b, node_match=same, edge_match=same)


def materialize(p, instances):
    """Collect every centered ball that the predicate accepts on the instances."""
    cat = BallCatalogue(p.radius)
    for g, out in instances:
        for v in range(g.n):
            if not check_node(p, g, out, v):
                cat.add(g, out, v)
    return cat


def bot_labeling(g):
    return Labeling([BOT] * g.n)
