"""Tree-like gadgets, octopus gadgets, proper instances, lifts and compression."""

import random
from collections import deque
from dataclasses import dataclass, field

from .graph import BOT, Edge, GraphError, LabeledGraph, components, follow_path, step
from .lcl import LclProblem, Violation

L, R, P, CHL, CHR = "L", "R", "P", "ChL", "ChR"
E_TREE = (L, R, P, CHL, CHR)

HEAD, PORT, INTER = "head", "port", "inter"
HP1, HP2, PH = "hp_link_1", "hp_link_2", "ph_link"
PI, IP = "pi_link", "ip_link"
LINKS = (HP1, HP2, PH)
V_OCTOPUS = (HEAD, PORT)
E_OCTOPUS = E_TREE + LINKS
V_PROPER = (HEAD, PORT, INTER)
E_PROPER = E_OCTOPUS + (PI, IP)

# f-walks in C^tree reach at most four hops from the checked node
TREE_RADIUS = 4


class InvalidInstance(ValueError):
    pass


# tree-like gadgets


def tree_index(l, k):
    """Dense index of coordinate (l, k) in heap order."""
    return (1 << l) - 1 + k


def tree_coord(i):
    l = (i + 1).bit_length() - 1
    return l, i - ((1 << l) - 1)


def tree_edges(height, offset=0):
    edges = []
    for l in range(height):
        for k in range(1 << l):
            u = offset + tree_index(l, k)
            if k + 1 < (1 << l):
                edges.append(Edge(u, u + 1, R, L))
            if l + 1 < height:
                edges.append(Edge(u, offset + tree_index(l + 1, 2 * k), CHL, P))
                edges.append(Edge(u, offset + tree_index(l + 1, 2 * k + 1), CHR, P))
    return edges


def build_tree_gadget(height, node_label=None):
    if height < 1:
        raise InvalidInstance("tree gadget height must be >= 1")
    n = (1 << height) - 1
    return LabeledGraph(n, tree_edges(height), [node_label] * n)


def _keep(keep):
    return (lambda i: True) if keep is None else keep


def tree_violations(g, v, keep=None):
    """Yield (constraint, detail) for C^tree at v inside the kept-edge subgraph."""
    keep = _keep(keep)
    inc = [(i, u, a, b) for i, u, a, b in g.incident(v) if keep(i)]
    labs = [a for _, _, a, _ in inc]
    have = set(labs)

    def labels_of(w):
        return {a for i, _, a, _ in g.incident(w) if keep(i)}

    for a in labs:
        if a not in E_TREE:
            yield "alphabet", f"half-edge label {a!r} not in E^tree"
    if len(have) != len(labs):
        yield "1", "two incident half-edges share a label"
    for i, u, a, b in inc:
        if (a == L and b != R) or (a == R and b != L):
            yield "2", f"edge {i}: {a}/{b} should pair L with R"
        if (a == P and b not in (CHL, CHR)) or (a in (CHL, CHR) and b != P):
            yield "3", f"edge {i}: {a}/{b} should pair P with a child label"
        if a == P and b == CHL and follow_path(g, v, (P, CHR, L), keep) != v:
            yield "4", "left child is not the L-neighbour of its sibling"
        if a == P and b == CHR and R in have and follow_path(g, v, (P, R, CHL, L), keep) != v:
            yield "5", "right child is not the L-neighbour of its right cousin"
        if a == P and b in (CHR, CHL):
            side = R if b == CHR else L
            parent = step(g, v, P, keep)
            if parent != BOT and (side in have) != (side in labels_of(parent)):
                yield "9", f"{side} present at child but not at parent, or vice versa"
    if (CHL in have) != (CHR in have):
        yield "6", "exactly one of ChL/ChR present"
    if (P not in have) != (L not in have and R not in have):
        yield "7", "P present iff L or R present"
    if CHL not in have and CHR not in have:
        for side in (L, R):
            w = step(g, v, side, keep)
            if w != BOT and labels_of(w) & {CHL, CHR}:
                yield "8", f"leaf has a non-leaf {side}-neighbour"


def internal_edge(e):
    return e.lu not in LINKS and e.lv not in LINKS


def intra_edge(e):
    return e.lu not in (PI, IP) and e.lv not in (PI, IP)


def _bad_pairing(a, b):
    return (a in (HP1, HP2) and b != PH) or (a == PH and b not in (HP1, HP2))


def octopus_violations(g, v, keep=None):
    keep = _keep(keep)
    inc = [(i, u, a, b) for i, u, a, b in g.incident(v) if keep(i)]
    labs = [a for _, _, a, _ in inc]
    have = set(labs)
    gv = g.labels[v]

    def internal(i):
        return keep(i) and internal_edge(g.edges[i])

    for cid, detail in tree_violations(g, v, internal):
        if cid != "alphabet":
            yield "0." + cid, detail
    for a in labs:
        if a not in E_OCTOPUS:
            yield "alphabet", f"half-edge label {a!r} not in E^octopus"
    for i, u, a, b in inc:
        is_internal = a not in LINKS and b not in LINKS
        if is_internal != (gv == g.labels[u]):
            yield "1", f"edge {i}: same node labels iff internal"
        # checked from both endpoints so that each side of a bad link sees it
        if _bad_pairing(a, b) or _bad_pairing(b, a):
            yield "2", f"edge {i}: {a}/{b} should pair hp_link with ph_link"
    if gv == HEAD and PH in have:
        yield "3", "head node with a ph_link"
    if gv == PORT and have & {HP1, HP2}:
        yield "4", "port node with an hp_link"
    if bool(have & {HP1, HP2}) != (gv == HEAD and not have & {CHL, CHR}):
        yield "5", "hp_link present iff head leaf"
    if (PH in have) != (gv == PORT and P not in have):
        yield "6", "ph_link present iff port root"
    for lab in LINKS:
        if labs.count(lab) > 1:
            yield "7", f"more than one {lab}"
    if HP2 in have and HP1 not in have:
        yield "8", "hp_link_2 without hp_link_1"


def proper_violations(g, v):
    inc = list(g.incident(v))
    labs = [a for _, _, a, _ in inc]
    have = set(labs)
    gv = g.labels[v]

    def intra(i):
        return intra_edge(g.edges[i])

    for cid, detail in octopus_violations(g, v, intra):
        if cid != "alphabet":
            yield "0." + cid, detail
    if gv not in V_PROPER:
        yield "alphabet", f"node label {gv!r} not in V^proper"
    for a in labs:
        if a not in E_PROPER:
            yield "alphabet", f"half-edge label {a!r} not in E^proper"
    for i, u, a, b in inc:
        if (a == PI) != (b == IP) or (a == IP) != (b == PI):
            yield "1", f"edge {i}: {a}/{b} should pair pi_link with ip_link"
    leftmost_leaf = gv == PORT and not have & {CHL, CHR, L}
    if (PI in have) != leftmost_leaf:
        yield "2", "pi_link present iff left-most port leaf"
    if gv == INTER:
        if not inc:
            yield "3", "inter-octopus node of degree 0"
        elif any(a != IP for a in labs):
            yield "3", "inter-octopus node with a non-ip_link half-edge"
    elif IP in have:
        yield "3", "ip_link on a node that is not inter-octopus"


def _collect(fn, g, nodes=None):
    out = []
    for v in range(g.n) if nodes is None else nodes:
        out.extend(Violation(v, cid, detail) for cid, detail in fn(g, v))
    return out


def relabel(g, labeling):
    """Copy of g whose half-edge labels come from labeling.half."""
    edges = [
        Edge(e.u, e.v, labeling.half.get((e.u, i), e.lu), labeling.half.get((e.v, i), e.lv))
        for i, e in enumerate(g.edges)
    ]
    return g.replace(edges=edges)


def check_tree(g, labels=None):
    g = relabel(g, labels) if labels is not None else g
    return _collect(tree_violations, g)


def check_octopus(g, labels=None):
    g = relabel(g, labels) if labels is not None else g
    return _collect(octopus_violations, g)


def check_proper(g, labels=None):
    g = relabel(g, labels) if labels is not None else g
    return _collect(proper_violations, g)


def _input_problem(name, fn):
    def constraint(ctx, v):
        return fn(ctx.g, v)

    return LclProblem(name, TREE_RADIUS, (None,), constraint, out_radius=0)


def tree_problem():
    """C^tree as an LCL on the input labels, with a trivial output alphabet."""
    return _input_problem("tree", tree_violations)


def octopus_problem():
    return _input_problem("octopus", octopus_violations)


def proper_problem():
    return _input_problem("proper", proper_violations)


# octopus gadgets


@dataclass(frozen=True)
class OctopusSpec:
    x: int
    eta: tuple
    heights: dict = field(default_factory=dict)

    @classmethod
    def uniform(cls, x, eta, w):
        eta = tuple(eta)
        return cls(x, eta, {(i, j): w for i, e in enumerate(eta) for j in range(1, e + 1)})

    def __post_init__(self):
        if self.x < 1:
            raise InvalidInstance("head height must be >= 1")
        if len(self.eta) != 1 << (self.x - 1):
            raise InvalidInstance(f"eta needs {1 << (self.x - 1)} entries")
        if any(e not in (1, 2) for e in self.eta):
            raise InvalidInstance("eta entries must be 1 or 2")
        if set(self.heights) != set(self.index_set()):
            raise InvalidInstance("port heights must be given exactly for the pairs (i, j), j <= eta_i")
        if any(w < 1 for w in self.heights.values()):
            raise InvalidInstance("port heights must be >= 1")

    def index_set(self):
        return [(i, j) for i, e in enumerate(self.eta) for j in range(1, e + 1)]

    def size(self):
        return (1 << self.x) - 1 + sum((1 << w) - 1 for w in self.heights.values())


def octopus_parts(spec, offset=0):
    """Edges, node labels, and the node ids of the head and each port."""
    edges = tree_edges(spec.x, offset)
    labels = [HEAD] * ((1 << spec.x) - 1)
    head_leaf = lambda i: offset + tree_index(spec.x - 1, i)  # noqa: E731
    cursor = offset + len(labels)
    ports = {}
    for i, j in spec.index_set():
        w = spec.heights[(i, j)]
        ports[(i, j)] = cursor
        edges += tree_edges(w, cursor)
        edges.append(Edge(head_leaf(i), cursor, HP1 if j == 1 else HP2, PH))
        labels += [PORT] * ((1 << w) - 1)
        cursor += (1 << w) - 1
    return edges, labels, ports


def build_octopus(spec):
    edges, labels, _ = octopus_parts(spec)
    return LabeledGraph(len(labels), edges, labels)


def port_order(eta):
    """Pairs (i, j) in edge order: leaf ascending, hp_link_1 before hp_link_2."""
    return [(i, j) for i, e in enumerate(eta) for j in range(1, e + 1)]


# bipartite instances, lifts and compression


@dataclass(frozen=True)
class BipartiteInstance:
    """White/black bipartite multigraph with a per-white edge order.

    `order[w]` lists w's edge indices by position, so position(e) = index + 1.
    """

    whites: int
    blacks: int
    edges: tuple
    order: tuple

    def __post_init__(self):
        for e in self.edges:
            if not (0 <= e[0] < self.whites and 0 <= e[1] < self.blacks):
                raise InvalidInstance(f"edge {e} out of range")
        if len(self.order) != self.whites:
            raise InvalidInstance("need one edge order per white node")
        for w, seq in enumerate(self.order):
            mine = sorted(i for i, e in enumerate(self.edges) if e[0] == w)
            if sorted(seq) != mine:
                raise InvalidInstance(f"order of white {w} is not a bijection onto its edges")

    def position(self, e):
        w = self.edges[e][0]
        return self.order[w].index(e) + 1

    def white_degree(self, w):
        return len(self.order[w])

    def black_edges(self, b):
        return [i for i, e in enumerate(self.edges) if e[1] == b]

    def to_dict(self):
        return {
            "whites": self.whites,
            "blacks": self.blacks,
            "edges": [list(e) for e in self.edges],
            "order": [list(s) for s in self.order],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                d["whites"],
                d["blacks"],
                tuple(tuple(e) for e in d["edges"]),
                tuple(tuple(s) for s in d["order"]),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInstance(f"malformed bipartite JSON: {exc}") from exc


def random_bipartite(whites, max_degree, seed, black_degree=3, parallel=True):
    """White degrees uniform in 1..max_degree, blacks of exactly black_degree.

    Stubs are paired at random. The total white degree is rounded to a
    multiple of black_degree by raising the lowest degrees, or lowering the
    highest ones when there is no room left.
    """
    rng = random.Random(seed)
    degs = [rng.randint(1, max_degree) for _ in range(whites)]
    short = -sum(degs) % black_degree
    room = sum(max_degree - d for d in degs)
    for _ in range(short if short <= room else 0):
        w = min(range(whites), key=lambda i: (degs[i], i))
        degs[w] += 1
    while sum(degs) % black_degree:
        w = max(range(whites), key=lambda i: (degs[i], -i))
        if degs[w] <= 1:
            raise InvalidInstance("cannot make total degree a multiple of the black degree")
        degs[w] -= 1
    for _ in range(1000):
        stubs = [w for w in range(whites) for _ in range(degs[w])]
        rng.shuffle(stubs)
        edges = [(w, k // black_degree) for k, w in enumerate(stubs)]
        if parallel or len(set(edges)) == len(edges):
            break
    else:
        raise InvalidInstance("could not avoid parallel edges")
    order = []
    for w in range(whites):
        mine = [i for i, e in enumerate(edges) if e[0] == w]
        rng.shuffle(mine)
        order.append(tuple(mine))
    return BipartiteInstance(whites, len(stubs) // black_degree, tuple(edges), tuple(order))


def head_height(deg):
    return deg.bit_length()  # floor(log2 deg) + 1


def canonical_eta(deg):
    x = head_height(deg)
    leaves = 1 << (x - 1)
    twos = deg - leaves
    return tuple([2] * twos + [1] * (leaves - twos))


@dataclass
class LiftResult:
    graph: LabeledGraph
    comp: list
    head_root: list
    port_root: dict
    port_leftmost: dict
    inter: list
    height: int


def lift(b, h):
    if h < 1:
        raise InvalidInstance("port height must be >= 1")
    for w in range(b.whites):
        if b.white_degree(w) == 0:
            raise InvalidInstance(f"white node {w} has degree 0")
    for k in range(b.blacks):
        if not b.black_edges(k):
            raise InvalidInstance(f"black node {k} has degree 0")
    edges, labels, comp = [], [], []
    head_root, port_root, port_leftmost = [], {}, {}
    offset = 0
    for w in range(b.whites):
        deg = b.white_degree(w)
        eta = canonical_eta(deg)
        spec = OctopusSpec.uniform(head_height(deg), eta, h)
        es, ls, ports = octopus_parts(spec, offset)
        edges += es
        labels += ls
        head_size = (1 << spec.x) - 1
        comp += [("white", w)] * head_size
        head_root.append(offset)
        for pos, pair in enumerate(port_order(eta)):
            e = b.order[w][pos]
            port_root[e] = ports[pair]
            port_leftmost[e] = ports[pair] + tree_index(h - 1, 0)
            comp += [("edge", e)] * ((1 << h) - 1)
        offset += len(ls)
    inter = []
    for k in range(b.blacks):
        inter.append(offset)
        labels.append(INTER)
        comp.append(("black", k))
        for e in b.black_edges(k):
            edges.append(Edge(port_leftmost[e], offset, PI, IP))
        offset += 1
    g = LabeledGraph(offset, edges, labels)
    return LiftResult(g, comp, head_root, port_root, port_leftmost, inter, h)


def tree_coordinates(g, nodes, keep):
    """(l, k) for every node of one clean tree-like gadget."""
    nodes = set(nodes)
    roots = [v for v in nodes if step(g, v, P, keep) == BOT]
    if len(roots) != 1:
        raise GraphError("gadget must have exactly one root")
    coord = {roots[0]: (0, 0)}
    q = deque(roots)
    while q:
        v = q.popleft()
        l, k = coord[v]
        for lab, off in ((CHL, 0), (CHR, 1)):
            c = step(g, v, lab, keep)
            if c != BOT:
                coord[c] = (l + 1, 2 * k + off)
                q.append(c)
    return coord


def gadget_structure(g):
    """Head gadgets, port gadgets and inter nodes of a clean proper instance."""
    internal = lambda i: internal_edge(g.edges[i]) and intra_edge(g.edges[i])  # noqa: E731
    heads, ports = [], []
    gadget_of = {}
    for comp in components(g, keep_edge=internal):
        lab = g.labels[comp[0]]
        if lab == INTER:
            continue
        coord = tree_coordinates(g, comp, internal)
        item = {"nodes": comp, "coord": coord, "root": min(comp, key=lambda v: coord[v])}
        (heads if lab == HEAD else ports).append(item)
        for v in comp:
            gadget_of[v] = item
    inters = [v for v in range(g.n) if g.labels[v] == INTER]
    return heads, ports, inters, gadget_of, internal


def compress(g):
    """Contract a proper instance back to its bipartite graph.

    Returns (BipartiteInstance, comp) with comp[v] in the same form as lift.
    """
    bad = check_proper(g)
    if bad:
        raise InvalidInstance(f"not a proper instance: {bad[0]}")
    heads, ports, inters, gadget_of, internal = gadget_structure(g)
    black_of = {v: k for k, v in enumerate(inters)}
    comp = [None] * g.n
    for k, v in enumerate(inters):
        comp[v] = ("black", k)
    edges, order = [], []
    for w, head in enumerate(heads):
        for v in head["nodes"]:
            comp[v] = ("white", w)
        coord = head["coord"]
        depth = max(l for l, _ in coord.values())
        leaves = sorted((k, v) for v, (l, k) in coord.items() if l == depth)
        seq = []
        for _, leaf in leaves:
            for lab in (HP1, HP2):
                root = step(g, leaf, lab)
                if root == BOT:
                    continue
                port = gadget_of[root]
                leftmost = [u for u in port["nodes"] if step(g, u, PI) != BOT]
                if len(leftmost) != 1:
                    raise InvalidInstance("port gadget needs exactly one pi_link")
                pis = [u for _, u, a, _ in g.incident(leftmost[0]) if a == PI]
                if len(pis) != 1:
                    raise InvalidInstance("left-most port leaf needs exactly one pi_link")
                e = len(edges)
                edges.append((w, black_of[pis[0]]))
                seq.append(e)
                for u in port["nodes"]:
                    comp[u] = ("edge", e)
        order.append(tuple(seq))
    return BipartiteInstance(len(heads), len(inters), tuple(edges), tuple(order)), comp


# mutations for soundness testing


def mutate(g, rng, half_alphabet, node_alphabet=()):
    """One random single-site perturbation of g: (kind, detail, new graph)."""
    kinds = ["delete_edge", "flip_half"] if g.m else []
    if node_alphabet and len(node_alphabet) > 1:
        kinds.append("flip_node")
    kind = rng.choice(kinds)
    if kind == "delete_edge":
        i = rng.randrange(g.m)
        edges = [e for k, e in enumerate(g.edges) if k != i]
        return kind, i, g.replace(edges=edges)
    if kind == "flip_half":
        i = rng.randrange(g.m)
        e = g.edges[i]
        side = rng.randrange(2)
        old = e.lu if side == 0 else e.lv
        new = rng.choice([a for a in half_alphabet if a != old])
        e2 = Edge(e.u, e.v, new, e.lv) if side == 0 else Edge(e.u, e.v, e.lu, new)
        edges = list(g.edges)
        edges[i] = e2
        return kind, (i, side, new), g.replace(edges=edges)
    v = rng.randrange(g.n)
    new = rng.choice([a for a in node_alphabet if a != g.labels[v]])
    labels = list(g.labels)
    labels[v] = new
    return kind, (v, new), g.replace(labels=labels)
