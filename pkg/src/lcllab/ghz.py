"""Linearizable problems, iterated GHZ, the promise problem and the full problem.

The quantum part is an exact state-vector simulation: every game only ever
entangles three qubits, so each game carries its own 8-amplitude state.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .detectors import (
    BADTREE_RADIUS,
    ERROR_INTER1,
    ERROR_INTER2,
    ERROR_INTRA,
    V_BADOCTOPUS,
    check_badgraph,
    solve_badgraph,
)
from .gadgets import (
    CHL,
    CHR,
    HEAD,
    HP1,
    HP2,
    INTER,
    PORT,
    TREE_RADIUS,
    InvalidInstance,
    R,
    L,
    compress,
    proper_violations,
)
from .graph import BOT, ContractViolation, Edge, LabeledGraph, bfs, step
from .lcl import UNASSIGNED, BudgetExceeded, Context, LclProblem, Violation, config_value

FIRST, OTHER = "first", "other"
BAD_GRAPH, PROMISE = "badGraph", "promise"

# item 7 of the promise constraints looks two hops away
PROMISE_RADIUS = 2
# a C^proper verdict needs the tree checks plus one hop of labels
PROPER_RADIUS = TREE_RADIUS + 1
PI_RADIUS = max(BADTREE_RADIUS + 1, PROMISE_RADIUS + PROPER_RADIUS + 1)


def multiset(labels):
    return tuple(sorted(labels, key=repr))


@dataclass(frozen=True)
class LinearizableProblem:
    """Edge labels Sigma, white chain rules (first, last, pairs) and black configurations.

    Black nodes whose degree differs from `rank` are unconstrained.
    """

    sigma: frozenset
    first: frozenset
    last: frozenset
    pairs: frozenset
    black: frozenset
    rank: int = 3

    def black_ok(self, labels):
        return len(labels) != self.rank or multiset(labels) in self.black

    def white_violations(self, seq):
        if not seq:
            return
        for x in seq:
            if x not in self.sigma:
                yield f"label {x!r} not in Sigma"
                return
        if seq[0] not in self.first:
            yield f"first label {seq[0]!r} not allowed"
        if seq[-1] not in self.last:
            yield f"last label {seq[-1]!r} not allowed"
        for a, b in zip(seq, seq[1:]):
            if (a, b) not in self.pairs:
                yield f"pair ({a!r}, {b!r}) not allowed"


def check_linearizable(lp, b, sol):
    """Violations of a per-edge labeling of a bipartite instance."""
    out = []
    for w in range(b.whites):
        seq = [sol[e] for e in b.order[w]]
        out += [Violation(w, "white", d) for d in lp.white_violations(seq)]
    for k in range(b.blacks):
        labs = [sol[e] for e in b.black_edges(k)]
        if not lp.black_ok(labs):
            out.append(Violation(k, "black", f"multiset {multiset(labs)!r} not in B"))
    return out


# iterated GHZ


def _decode(lab):
    if lab[0] == FIRST:
        return FIRST, 0, lab[1]
    return OTHER, lab[1], lab[2]


def _ghz_rule(xs, ys):
    """True when the black rule holds for a game that is not all-first."""
    if sum(xs) % 2:
        return True
    return (ys[0] ^ ys[1] ^ ys[2]) == (xs[0] | xs[1] | xs[2])


def iterghz_as_linearizable():
    bits = (0, 1)
    first = frozenset((FIRST, y) for y in bits)
    other = frozenset((OTHER, x, y) for x in bits for y in bits)
    sigma = first | other
    pairs = frozenset((a, b) for a in sigma for b in other if a[-1] == b[1])
    black = set()
    labs = sorted(sigma, key=repr)
    for i, a in enumerate(labs):
        for j in range(i, len(labs)):
            for c in labs[j:]:
                ms = (a, labs[j], c)
                kinds, xs, ys = zip(*map(_decode, ms))
                if OTHER not in kinds:
                    ok = sorted(ys) == [0, 0, 1]
                else:
                    ok = _ghz_rule(xs, ys)
                if ok:
                    black.add(multiset(ms))
    return LinearizableProblem(sigma, first, sigma, pairs, frozenset(black))


ITERGHZ = iterghz_as_linearizable()


def incidence_graph(b):
    """b as a LabeledGraph: whites 0..W-1, then blacks; the white half of
    each edge carries the edge's position in the white's order."""
    edges = [Edge(w, b.whites + k, b.position(e), "") for e, (w, k) in enumerate(b.edges)]
    labels = ["white"] * b.whites + ["black"] * b.blacks
    return LabeledGraph(b.whites + b.blacks, edges, labels)


def linearizable_problem(lp=ITERGHZ):
    """The linearizable problem as an LCL with half-edge outputs on white sides.

    Black half-edges output "" and carry no information.
    """

    def half(g, v, e):
        return sorted(lp.sigma, key=repr) if g.labels[v] == "white" else [""]

    def constraint(ctx, v):
        g, out = ctx.g, ctx.out
        if g.labels[v] == "white":
            seq = sorted((lab, out.half[(v, i)]) for i, _, lab, _ in g.incident(v))
            labs = [x for _, x in seq]
            for x in labs:
                if x is not UNASSIGNED and x not in lp.sigma:
                    yield "alphabet", f"{x!r} not in Sigma"
            if labs and labs[0] is not UNASSIGNED and labs[0] not in lp.first:
                yield "first", f"first label {labs[0]!r} not allowed"
            if labs and labs[-1] is not UNASSIGNED and labs[-1] not in lp.last:
                yield "last", f"last label {labs[-1]!r} not allowed"
            for a, c in zip(labs, labs[1:]):
                if a is not UNASSIGNED and c is not UNASSIGNED and (a, c) not in lp.pairs:
                    yield "pair", f"pair ({a!r}, {c!r}) not allowed"
        else:
            labs = [out.half[(u, i)] for i, u, _, _ in g.incident(v)]
            if UNASSIGNED not in labs and not lp.black_ok(labs):
                yield "black", f"multiset {multiset(labs)!r} not in B"

    return LclProblem("linearizable", 1, [""], constraint, half_outputs=half)


def edge_solution(b, labeling):
    """Per-edge labels read off a solution of linearizable_problem."""
    return [labeling.half[(w, e)] for e, (w, _) in enumerate(b.edges)]


def check_iterghz(b, out):
    """Violations of per-edge (x, y) bits; black nodes of degree other than 3 are free."""
    res = []
    for w in range(b.whites):
        seq = b.order[w]
        if seq and out[seq[0]][0] != 0:
            res.append(Violation(w, "white", "x on the first edge must be 0"))
        for e, f in zip(seq, seq[1:]):
            if out[e][1] != out[f][0]:
                res.append(Violation(w, "white", f"y of edge {e} differs from x of edge {f}"))
    for k in range(b.blacks):
        es = b.black_edges(k)
        if len(es) != 3:
            continue
        xs = [out[e][0] for e in es]
        ys = [out[e][1] for e in es]
        if all(b.position(e) == 1 for e in es):
            if sorted(ys) != [0, 0, 1]:
                res.append(Violation(k, "black", f"all-first game needs y multiset {{0,0,1}}, got {ys}"))
        elif not _ghz_rule(xs, ys):
            res.append(Violation(k, "black", f"x={xs} y={ys}: XOR of y must equal OR of x"))
    return res


def bits_to_labels(b, out):
    sol = [None] * len(b.edges)
    for e, (x, y) in enumerate(out):
        if b.position(e) == 1:
            if x != 0:
                raise ContractViolation(f"edge {e} is first but has x=1")
            sol[e] = (FIRST, y)
        else:
            sol[e] = (OTHER, x, y)
    return sol


def labels_to_bits(sol):
    return [_decode(lab)[1:] for lab in sol]


# GHZ games

_SQ = 1 / math.sqrt(2)
# measurement bases: input 0 measures X, input 1 measures Y; bit 0 is the +1 outcome
_BASIS = {
    0: (np.array([_SQ, _SQ]), np.array([_SQ, -_SQ])),
    1: (np.array([_SQ, 1j * _SQ]), np.array([_SQ, -1j * _SQ])),
}


class GhzTriple:
    """Three qubits prepared in (|000> + |111>)/sqrt(2)."""

    def __init__(self):
        self.psi = np.zeros(8, dtype=complex)
        self.psi[0] = self.psi[7] = _SQ
        self.measured = [False, False, False]

    def norm(self):
        return float(np.vdot(self.psi, self.psi).real)

    def outcome_probabilities(self, k, x):
        """(p0, p1) for measuring qubit k with input bit x."""
        t = self.psi.reshape(2, 2, 2)
        ps = []
        for vec in _BASIS[x]:
            amp = np.tensordot(vec.conj(), t, axes=([0], [k]))
            ps.append(float(np.vdot(amp, amp).real))
        return ps

    def measure(self, k, x, u):
        """Measure qubit k with input bit x; `u` is a uniform draw in [0, 1)."""
        if self.measured[k]:
            raise ContractViolation(f"qubit {k} of this triple was already measured")
        p0, p1 = self.outcome_probabilities(k, x)
        if abs(p0 + p1 - 1) > 1e-12:
            raise ContractViolation(f"probabilities sum to {p0 + p1}")
        bit = 0 if u < p0 else 1
        vec = _BASIS[x][bit]
        proj = np.outer(vec, vec.conj())
        t = np.moveaxis(np.tensordot(proj, self.psi.reshape(2, 2, 2), axes=([1], [k])), 0, k)
        self.psi = t.reshape(8) / math.sqrt(p0 if bit == 0 else p1)
        self.measured[k] = True
        return bit


def game_rng(seed, game):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(game,)))


def ghz_measure(triple, inputs, rng):
    if any(triple.measured):
        raise ContractViolation("GHZ triple is not fresh")
    return tuple(triple.measure(k, x, rng.random()) for k, x in enumerate(inputs))


@dataclass
class GhzRun:
    bits: list
    lucky: list
    max_norm_drift: float = 0.0
    rounds: int = 2
    triples: dict = field(default_factory=dict)


def quantum_solve_iterghz(b, seed):
    """Two communication rounds, then each white node measures its qubits in order.

    Round 1: every white node tells each black neighbour its port number.
    Round 2: each degree-3 black node hands out one qubit of a fresh triple;
    if all three port numbers are 1 it also hands out the bits 0, 0, 1.
    Games of other degrees get no triple and their players answer y = 0.
    """
    triples = {}
    slot = {}
    given = {}
    for k in range(b.blacks):
        es = b.black_edges(k)
        if len(es) != 3:
            continue
        triples[k] = GhzTriple()
        for q, e in enumerate(es):
            slot[e] = (k, q)
        if all(b.position(e) == 1 for e in es):
            for q, e in enumerate(es):
                given[e] = 1 if q == 2 else 0
    rngs = {k: game_rng(seed, k) for k in triples}
    bits = [None] * len(b.edges)
    lucky = [False] * b.whites
    drift = 0.0
    for w in range(b.whites):
        x = 0
        for e in b.order[w]:
            if e in given:
                y = given[e]
                lucky[w] = True
            elif e in slot:
                k, q = slot[e]
                y = triples[k].measure(q, x, rngs[k].random())
                drift = max(drift, abs(triples[k].norm() - 1))
            else:
                y = 0
            bits[e] = (x, y)
            x = y
    return GhzRun(bits, lucky, drift, triples=triples)


# the promise problem


def head_leaf(g, v):
    return g.labels[v] == HEAD and not set(g.half_labels(v)) & {CHL, CHR}


def eta(g, v):
    return sum(1 for a in g.half_labels(v) if a in (HP1, HP2))


def promise_site(g, out, v, lp=ITERGHZ, value=None):
    """Violations of items 1-8 at v on a graph assumed proper near v.

    `value(u)` gives u's output; it may return None for "not known yet",
    in which case rules depending on it are skipped.
    """
    value = value or out.__getitem__
    x = value(v)
    if x is None:
        return
    gv = g.labels[v]
    if gv == PORT and x not in lp.sigma:
        yield "1", f"port node outputs {x!r}, not a Sigma label"
    if gv != PORT and x != BOT:
        yield "2", f"non-port node outputs {x!r} instead of BOT"
    if gv == PORT:
        for u in g.neighbors(v):
            y = value(u)
            if g.labels[u] == PORT and y is not None and y != x:
                yield "3", f"neighbour {u} of the same port outputs {y!r} != {x!r}"
    if gv == INTER:
        ys = [value(u) for u in g.neighbors(v)]
        if None not in ys and not lp.black_ok(ys):
            yield "8", f"neighbour multiset {multiset(ys)!r} not in B"
    if not head_leaf(g, v):
        return
    j = eta(g, v)
    links = {lab: step(g, v, lab) for lab in (HP1, HP2)}

    def port_value(lab, node=v):
        t = links[lab] if node == v else step(g, node, lab)
        return None if t == BOT else value(t)

    halves = set(g.half_labels(v))
    if L not in halves:
        a = port_value(HP1)
        if a is not None and a not in lp.first:
            yield "4", f"first port label {a!r} not in F"
    if R not in halves and j in (1, 2):
        a = port_value(HP1 if j == 1 else HP2)
        if a is not None and a not in lp.last:
            yield "5", f"last port label {a!r} not in L"
    if j == 2:
        a, c = port_value(HP1), port_value(HP2)
        if a is not None and c is not None and (a, c) not in lp.pairs:
            yield "6", f"pair ({a!r}, {c!r}) not in P"
    u = step(g, v, R)
    if j in (1, 2) and u != BOT:
        a = port_value(HP1 if j == 1 else HP2)
        c = port_value(HP1, u)
        if a is not None and c is not None and (a, c) not in lp.pairs:
            yield "7", f"pair ({a!r}, {c!r}) across leaves not in P"


def exempt_nodes(g):
    """Nodes with a C^proper violator within PROMISE_RADIUS: they are not checked."""
    bad = [v for v in range(g.n) if any(True for _ in proper_violations(g, v))]
    return set(bfs(g, bad, PROMISE_RADIUS))


def check_promise(g, out, lp=ITERGHZ):
    skip = exempt_nodes(g)
    res = []
    for v in range(g.n):
        if v not in skip:
            res += [Violation(v, cid, d) for cid, d in promise_site(g, out, v, lp)]
    return res


def promise_to_linearizable(g, comp, out, edges):
    """Per-edge labels read off the port gadgets; `edges` is the edge count."""
    sol = [None] * edges
    for v, c in enumerate(comp):
        if c is not None and c[0] == "edge":
            if sol[c[1]] is None:
                sol[c[1]] = out[v]
            elif sol[c[1]] != out[v]:
                raise ContractViolation(f"port of edge {c[1]} is not constant")
    return sol


def linearizable_to_promise(g, comp, sol):
    return [sol[c[1]] if c is not None and c[0] == "edge" else BOT for c in comp]


# the full problem


def project_badgraph(out):
    return [x[1] if x[0] == BAD_GRAPH else BOT for x in out]


def promise_part(g, out):
    """(subgraph, labels, new->old) for the nodes holding promise labels."""
    keep = [v for v in range(g.n) if out[v][0] == PROMISE]
    sub, _, old = g.induced(keep)
    return sub, [out[v][1] for v in old], old


def pi_alphabet_violations(out):
    res = []
    for v, x in enumerate(out):
        if not (isinstance(x, tuple) and len(x) == 2 and x[0] in (BAD_GRAPH, PROMISE)):
            res.append(Violation(v, "alphabet", f"{x!r} is not a label of the full problem"))
        elif x[0] == BAD_GRAPH and x[1] == BOT:
            res.append(Violation(v, "alphabet", "badGraph labels exclude BOT"))
    return res


def check_pi(g, out, lp=ITERGHZ):
    res = pi_alphabet_violations(out)
    if res:
        return res
    res += [Violation(x.node, "badGraph." + x.constraint, x.detail)
            for x in check_badgraph(g, project_badgraph(out))]
    sub, labels, old = promise_part(g, out)
    res += [Violation(old[x.node], "promise." + x.constraint, x.detail)
            for x in check_promise(sub, labels, lp)]
    return res


@dataclass
class PiRun:
    out: list
    radii: list
    badgraph_radius: int
    relay: int
    lucky: int = 0
    norm_drift: float = 0.0
    meta: dict = field(default_factory=dict)


def octopus_diameter(g, comp):
    """Largest diameter over the octopi of a lifted instance (head plus its ports)."""
    groups = {}
    for v, c in enumerate(comp):
        if c[0] == "white":
            groups.setdefault(("w", c[1]), []).append(v)
    members = {}
    for v, c in enumerate(comp):
        members.setdefault(c, []).append(v)
    best = 0
    for key, nodes in groups.items():
        octo = set(nodes)
        for v in nodes:
            for u in g.neighbors(v):
                if comp[u][0] == "edge":
                    octo.update(members[comp[u]])
        keep = lambda i, o=octo: g.edges[i].u in o and g.edges[i].v in o  # noqa: E731
        # heads are trees; two sweeps give the exact diameter
        far = max(bfs(g, [nodes[0]], keep_edge=keep).items(), key=lambda t: t[1])[0]
        best = max(best, max(bfs(g, [far], keep_edge=keep).values()))
    return best


def solve_pi(g, seed, lp=ITERGHZ):
    """badGraph everywhere, then the GHZ protocol on the contracted proper part.

    Locality of a promise node: the badGraph phase, two simulated rounds,
    each relayed across octopi, and a final broadcast inside the octopus.
    """
    if lp is not ITERGHZ:
        raise InvalidInstance("only the iterated GHZ instantiation has a quantum solver")
    if g.n == 0:
        return PiRun([], [], 0, 0)
    bg, bg_radii = solve_badgraph(g)
    t_bg = max(bg_radii)
    out = [(BAD_GRAPH, x) if x != BOT else None for x in bg]
    rest = [v for v in range(g.n) if bg[v] == BOT]
    radii = list(bg_radii)
    run = PiRun(out, radii, t_bg, 0)
    if not rest:
        return run
    sub, _, old = g.induced(rest)
    b, comp = compress(sub)
    diam = octopus_diameter(sub, comp)
    relay = 2 * (diam + 1)
    q = quantum_solve_iterghz(b, seed)
    sol = bits_to_labels(b, q.bits)
    labels = linearizable_to_promise(sub, comp, sol)
    for i, v in enumerate(old):
        out[v] = (PROMISE, labels[i])
        radii[v] = t_bg + q.rounds * relay + diam
    run.relay = relay
    run.lucky = sum(q.lucky)
    run.norm_drift = q.max_norm_drift
    run.meta = {"whites": b.whites, "blacks": b.blacks, "octopus_diameter": diam}
    return run


# the full problem as an LclProblem, with a structured cluster completer


class _PiContext(Context):
    def by_node(self):
        def build():
            found = {}
            for x in check_pi(self.g, self.out.nodes, self.lp):
                found.setdefault(x.node, []).append(x)
            return found
        return self.cached("all", build)


def pi_candidates(lp=ITERGHZ):
    def cand(g, v):
        if g.labels[v] == INTER:
            bad = [ERROR_INTER1, ERROR_INTER2]
        else:
            bad = [(ERROR_INTRA, x) for x in V_BADOCTOPUS[1:]]
        prom = sorted(lp.sigma, key=repr) if g.labels[v] == PORT else [BOT]
        return [(PROMISE, x) for x in prom] + [(BAD_GRAPH, x) for x in bad]
    return cand


def pi_problem(lp=ITERGHZ):
    """The full problem. Its predicate only judges total labelings.

    That keeps it partial-safe (it never reports a repairable violation)
    at the price of no pruning; completion goes through `complete_pi`.
    """

    class Ctx(_PiContext):
        pass

    Ctx.lp = lp

    def constraint(ctx, v):
        if UNASSIGNED in ctx.out.nodes:
            return
        for x in ctx.by_node().get(v, ()):
            yield x.constraint, x.detail

    return LclProblem("pi", PI_RADIUS, pi_candidates(lp), constraint, context=Ctx,
                      meta={"check": lambda g, out: check_pi(g, out, lp),
                            "completer": lambda g, s, labels, cache: complete_pi(g, s, labels, cache, lp)})


class _Classes:
    """Port nodes grouped into maximal runs joined by port-port edges."""

    def __init__(self, g):
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in g.edges:
            if g.labels[e.u] == PORT and g.labels[e.v] == PORT:
                parent[find(e.u)] = find(e.v)
        self.of = [find(v) if g.labels[v] == PORT else None for v in range(g.n)]


def _pi_shared(g, cache):
    if "bg" not in cache:
        bg, _ = solve_badgraph(g)
        keep = [v for v in range(g.n) if bg[v] == BOT]
        sub, fwd, old = g.induced(keep)
        cache.update(bg=bg, sub=sub, fwd=fwd, old=old, exempt=exempt_nodes(sub),
                     classes=_Classes(sub))
    return cache


def complete_pi(g, cluster, labels, cache, lp=ITERGHZ):
    """Labels for `cluster` extending the fixed entries of `labels`, or None.

    The badGraph part is forced (the detector is deterministic), so a
    frontier disagreeing with it yields None. The promise part is a
    backtracking search over port runs, checking every affected site.
    """
    sh = _pi_shared(g, cache)
    bg, sub, fwd, old = sh["bg"], sh["sub"], sh["fwd"], sh["old"]
    cl = set(cluster)
    near = bfs(g, cl, PI_RADIUS)
    for u in near:
        x = labels[u]
        if u in cl or x is UNASSIGNED:
            continue
        if not (isinstance(x, tuple) and len(x) == 2 and x[0] in (BAD_GRAPH, PROMISE)):
            return None
        if (x[1] if x[0] == BAD_GRAPH else BOT) != bg[u]:
            return None
    res = {v: (BAD_GRAPH, bg[v]) for v in cl if bg[v] != BOT}
    of = sh["classes"].of
    fixed, free = {}, set()
    value = {}
    for v in cl:
        if bg[v] != BOT:
            continue
        i = fwd[v]
        if of[i] is None:
            value[i] = BOT
        else:
            free.add(of[i])
    for u in near:
        if u in cl or bg[u] != BOT or labels[u] is UNASSIGNED:
            continue
        i = fwd[u]
        y = labels[u][1]
        if of[i] is None:
            value[i] = y
        elif of[i] in fixed and fixed[of[i]] != y:
            return None
        else:
            fixed[of[i]] = y
            value[i] = y
    free -= set(fixed)
    members = {}
    for i, c in enumerate(of):
        if c in free:
            members.setdefault(c, []).append(i)
    # sites whose verdict can change: non-exempt promise nodes near the cluster
    sites = [fwd[u] for u in sorted(near) if u in fwd and fwd[u] not in sh["exempt"]]
    reads = {}
    for s in sites:
        for i in bfs(sub, [s], 2):
            if of[i] in free:
                reads.setdefault(of[i], set()).add(s)
    assign = {}

    def val(i):
        c = of[i]
        if c in assign:
            return assign[c]
        if c in fixed:
            return fixed[c]
        return value.get(i)

    def site_ok(s):
        return not any(True for _ in promise_site(sub, None, s, lp, val))

    if not all(site_ok(s) for s in sites):
        return None
    order = sorted(free, key=lambda c: min(old[i] for i in members[c]))
    domain = sorted(lp.sigma, key=repr)
    budget = config_value("bruteforce.max_assignments")
    spent = 0
    stack = [0]
    k = 0
    while 0 <= k < len(order):
        c = order[k]
        j = stack[k]
        assign.pop(c, None)
        while j < len(domain):
            spent += 1
            if spent > budget:
                raise BudgetExceeded(f"promise completion over {budget} assignments")
            assign[c] = domain[j]
            j += 1
            if all(site_ok(s) for s in reads.get(c, ())):
                break
            del assign[c]
        else:
            stack.pop()
            k -= 1
            continue
        stack[k] = j
        stack.append(0)
        k += 1
    if k < 0:
        return None
    for v in cl:
        if bg[v] == BOT:
            res[v] = (PROMISE, val(fwd[v]))
    return res
