"""Labeled graphs with half-edge labels, distances, views and path following."""

import json
import math
from collections import deque
from dataclasses import dataclass

BOT = "⊥"
INF = math.inf


class GraphError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    lu: object = None
    lv: object = None

    def other(self, w):
        return self.v if w == self.u else self.u

    def label_at(self, w):
        return self.lu if w == self.u else self.lv


class LabeledGraph:
    """Immutable multigraph on nodes 0..n-1.

    Each node carries a label and an input record; each edge carries one
    label per endpoint. Edges are addressed by their index so that parallel
    edges keep distinct half-edge labels.
    """

    def __init__(self, n, edges=(), labels=None, inputs=None, id_exponent=2, id_bound=None):
        self.n = n
        self.id_exponent = id_exponent
        # subgraphs keep the identifier space of the graph they came from
        self.id_bound = max(n, 2) ** id_exponent if id_bound is None else id_bound
        self.edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in edges)
        self.labels = tuple(labels) if labels is not None else (None,) * n
        if inputs is None:
            inputs = [{} for _ in range(n)]
        recs = []
        for v, rec in enumerate(inputs):
            rec = dict(rec)
            rec.setdefault("id", v + 1)
            recs.append(rec)
        self.inputs = tuple(recs)
        if len(self.labels) != n or len(self.inputs) != n:
            raise GraphError("label/input arrays must have length n")
        adj = [[] for _ in range(n)]
        for i, e in enumerate(self.edges):
            if not (0 <= e.u < n and 0 <= e.v < n):
                raise GraphError(f"edge {i} has an endpoint outside 0..{n - 1}")
            if e.u == e.v:
                raise GraphError(f"edge {i} is a self-loop")
            adj[e.u].append(i)
            adj[e.v].append(i)
        self._adj = tuple(tuple(a) for a in adj)
        ids = [rec["id"] for rec in self.inputs]
        if len(set(ids)) != n:
            raise GraphError("identifiers must be unique")
        if any(not (1 <= i <= self.id_bound) for i in ids):
            raise GraphError(f"identifiers must lie in [1, {self.id_bound}]")

    def __repr__(self):
        return f"LabeledGraph(n={self.n}, m={len(self.edges)})"

    def __eq__(self, other):
        return (
            isinstance(other, LabeledGraph)
            and self.n == other.n
            and self.edges == other.edges
            and self.labels == other.labels
            and self.inputs == other.inputs
        )

    def __hash__(self):
        return hash((self.n, self.edges, self.labels))

    @property
    def m(self):
        return len(self.edges)

    def ident(self, v):
        return self.inputs[v]["id"]

    def incident(self, v):
        """Yield (edge index, neighbor, own half label, neighbor half label)."""
        for i in self._adj[v]:
            e = self.edges[i]
            if e.u == v:
                yield i, e.v, e.lu, e.lv
            else:
                yield i, e.u, e.lv, e.lu

    def edge_ids(self, v):
        return self._adj[v]

    def neighbors(self, v):
        return [self.edges[i].other(v) for i in self._adj[v]]

    def degree(self, v):
        return len(self._adj[v])

    def half_labels(self, v):
        return [lab for _, _, lab, _ in self.incident(v)]

    def has_parallel_edges(self):
        seen = set()
        for e in self.edges:
            key = (min(e.u, e.v), max(e.u, e.v))
            if key in seen:
                return True
            seen.add(key)
        return False

    # derived graphs

    def replace(self, edges=None, labels=None, inputs=None):
        return LabeledGraph(
            self.n,
            self.edges if edges is None else edges,
            self.labels if labels is None else labels,
            self.inputs if inputs is None else inputs,
            self.id_exponent,
            self.id_bound,
        )

    def edge_subgraph(self, keep):
        """Same node set, keeping edges whose index satisfies keep(i, edge).

        Returns the graph and the list mapping new edge index to old index.
        """
        idx = [i for i, e in enumerate(self.edges) if keep(i, e)]
        return self.replace(edges=[self.edges[i] for i in idx]), idx

    def induced(self, nodes):
        """Induced subgraph on `nodes`, renumbered densely in sorted order.

        Returns (graph, old->new dict, new->old list).
        """
        old = sorted(set(nodes))
        fwd = {v: i for i, v in enumerate(old)}
        edges = [
            Edge(fwd[e.u], fwd[e.v], e.lu, e.lv)
            for e in self.edges
            if e.u in fwd and e.v in fwd
        ]
        g = LabeledGraph(
            len(old),
            edges,
            [self.labels[v] for v in old],
            [self.inputs[v] for v in old],
            self.id_exponent,
            self.id_bound,
        )
        return g, fwd, old

    def with_marks(self, marks):
        inputs = [dict(rec, mark=int(bool(m))) for rec, m in zip(self.inputs, marks)]
        return self.replace(inputs=inputs)

    def marks(self):
        return [int(rec.get("mark", 0)) for rec in self.inputs]


def disjoint_union(*graphs):
    n = 0
    edges, labels, inputs = [], [], []
    for g in graphs:
        edges += [Edge(e.u + n, e.v + n, e.lu, e.lv) for e in g.edges]
        labels += list(g.labels)
        inputs += [dict(rec) for rec in g.inputs]
        n += g.n
    for v, rec in enumerate(inputs):
        rec["id"] = v + 1
    return LabeledGraph(n, edges, labels, inputs)


# distances


def bfs(g, sources, limit=INF, keep_edge=None):
    """Distances from the source set, truncated at `limit`."""
    dist = {}
    q = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            q.append(s)
    while q:
        v = q.popleft()
        d = dist[v]
        if d >= limit:
            continue
        for i, u, _, _ in g.incident(v):
            if u not in dist and (keep_edge is None or keep_edge(i)):
                dist[u] = d + 1
                q.append(u)
    return dist


def distance(g, a, b):
    a, b = set(a), set(b)
    if not a or not b:
        raise ContractViolation("distance needs two nonempty node sets")
    for v in a | b:
        if not 0 <= v < g.n:
            raise ContractViolation(f"node {v} not in graph")
    if a & b:
        return 0
    dist = {}
    q = deque()
    for s in a:
        dist[s] = 0
        q.append(s)
    while q:
        v = q.popleft()
        for u in g.neighbors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                if u in b:
                    return dist[u]
                q.append(u)
    return INF


def ball(g, v, t):
    return set(bfs(g, [v], t))


def components(g, keep_edge=None):
    comp = [-1] * g.n
    out = []
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        members = sorted(bfs(g, [s], keep_edge=keep_edge))
        for v in members:
            comp[v] = len(out)
        out.append(members)
    return out


def eccentricity(g, v, keep_edge=None):
    return max(bfs(g, [v], keep_edge=keep_edge).values())


def diameter(g):
    if g.n == 0:
        return 0
    best = 0
    for v in range(g.n):
        d = bfs(g, [v])
        if len(d) < g.n:
            return INF
        best = max(best, max(d.values()))
    return best


# views


@dataclass(frozen=True)
class View:
    """Open induced subgraph around a center set.

    `graph` is renumbered; `nodes[i]` is the original id of view node i and
    `dist[i]` its distance to the center set. Edges between two nodes at
    distance exactly `radius` are absent.
    """

    centers: tuple
    radius: int
    graph: LabeledGraph
    nodes: tuple
    dist: tuple

    def local(self, v):
        return self.nodes.index(v)


def view(g, s, t):
    if t < 0:
        raise ContractViolation("view radius must be nonnegative")
    s = sorted(set(s))
    dist = bfs(g, s, t)
    old = sorted(dist)
    fwd = {v: i for i, v in enumerate(old)}
    edges = []
    for e in g.edges:
        if e.u in fwd and e.v in fwd and not (dist[e.u] == t and dist[e.v] == t):
            edges.append(Edge(fwd[e.u], fwd[e.v], e.lu, e.lv))
    sub = LabeledGraph(
        len(old),
        edges,
        [g.labels[v] for v in old],
        [g.inputs[v] for v in old],
        g.id_exponent,
        g.id_bound,
    )
    return View(tuple(s), t, sub, tuple(old), tuple(dist[v] for v in old))


# labeled path following


def step(g, v, label, keep_edge=None):
    """The unique neighbor reached through a half-edge labeled `label`, or BOT."""
    hit = BOT
    for i, u, lab, _ in g.incident(v):
        if lab == label and (keep_edge is None or keep_edge(i)):
            if hit != BOT:
                return BOT
            hit = u
    return hit


def follow_path(g, v, labels, keep_edge=None):
    """Endpoint of the labeled walk from v, or BOT if missing or ambiguous.

    Counts complete walks (parallel edges count separately), capped at 2;
    a branch that dies out later does not make the walk ambiguous.
    """
    walks = {v: 1}
    for lab in labels:
        nxt = {}
        for w, c in walks.items():
            for i, u, own, _ in g.incident(w):
                if own == lab and (keep_edge is None or keep_edge(i)):
                    nxt[u] = min(2, nxt.get(u, 0) + c)
        walks = nxt
        if not walks:
            return BOT
    if len(walks) == 1 and sum(walks.values()) == 1:
        return next(iter(walks))
    return BOT


def power_graph(g, k):
    if k < 1:
        raise ContractViolation("power graph needs k >= 1")
    edges = []
    for v in range(g.n):
        for u, d in sorted(bfs(g, [v], k).items()):
            if u > v and d >= 1:
                edges.append(Edge(v, u, "", ""))
    return LabeledGraph(g.n, edges, g.labels, g.inputs, g.id_exponent, g.id_bound)


# serialization


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    if isinstance(x, list):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {k: _jsonable(y) for k, y in x.items()}
    return x


def untuple(x):
    """Inverse of the JSON encoding: lists back to tuples, recursively."""
    if isinstance(x, list):
        return tuple(untuple(y) for y in x)
    return x


def to_dict(g):
    return {
        "n": g.n,
        "nodes": [
            {"id": v, "label": _jsonable(g.labels[v]), "input": _jsonable(g.inputs[v])}
            for v in range(g.n)
        ],
        "edges": [
            {"u": e.u, "v": e.v, "lu": _jsonable(e.lu), "lv": _jsonable(e.lv)}
            for e in g.edges
        ],
    }


def from_dict(d, id_exponent=2):
    try:
        n = d["n"]
        nodes = sorted(d.get("nodes", []), key=lambda r: r["id"])
        if [r["id"] for r in nodes] != list(range(n)):
            if nodes:
                raise GraphError("node ids must be exactly 0..n-1")
            nodes = [{"id": v} for v in range(n)]
        labels = [untuple(r.get("label")) for r in nodes]
        inputs = [r.get("input", {}) for r in nodes]
        edges = [
            Edge(e["u"], e["v"], untuple(e.get("lu")), untuple(e.get("lv")))
            for e in d.get("edges", [])
        ]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph JSON: {exc}") from exc
    return LabeledGraph(n, edges, labels, inputs, id_exponent)


def dumps(g):
    return json.dumps(to_dict(g), sort_keys=True, ensure_ascii=False)


def loads(s):
    return from_dict(json.loads(s))


def to_dot(g, name="G"):
    def q(x):
        return '"' + str("" if x is None else x).replace('"', '\\"') + '"'

    lines = [f"graph {name} {{"]
    for v in range(g.n):
        lab = g.labels[v]
        text = f"{v}" if lab is None else f"{v}:{lab}"
        lines.append(f"  {v} [label={q(text)}];")
    for e in g.edges:
        lines.append(f"  {e.u} -- {e.v} [taillabel={q(e.lu)}, headlabel={q(e.lv)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
