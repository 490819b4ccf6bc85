"""Error-detection problems on tree gadgets, octopi and proper instances.

Pointer discipline for the tree problem: a node outputs BOT, ERR, or a
pointer naming one of its neighbours by role (parent, right child, left or
right sibling). A pointer's target must be non-BOT and carry a label the
pointer may be followed by:

    UP    -> UP, LEFT, RIGHT, ERR
    DOWN  -> DOWN, LEFT, RIGHT, ERR
    LEFT  -> LEFT, ERR
    RIGHT -> RIGHT, ERR

so every chain reads (UP* | DOWN*)(LEFT* | RIGHT*) ERR. On a clean gadget
such a chain strictly moves in one direction per phase and cannot cycle,
which forces it to end at an ERR. ERR is only allowed on marked nodes and on
nodes within distance ERR_REACH of a node that violates C^tree. The slack
matters when the only violation sits on a left child, which no pointer may
target: its parent is then allowed to report instead.
"""

from collections import deque

from .gadgets import (
    CHR,
    HEAD,
    INTER,
    PORT,
    TREE_RADIUS,
    L,
    P,
    R,
    internal_edge,
    octopus_violations,
    proper_violations,
    tree_violations,
)
from .graph import BOT, bfs, step
from .lcl import UNASSIGNED, Context, LclProblem

ERR, UP, DOWN, LEFT, RIGHT = "Err", "Up", "Down", "Left", "Right"
ERR_REACH = 1
BADTREE_RADIUS = TREE_RADIUS + ERR_REACH
POINTERS = (UP, DOWN, LEFT, RIGHT)
V_BADTREE = (BOT, ERR) + POINTERS
ROLE = {UP: P, DOWN: CHR, LEFT: L, RIGHT: R}
SUCC = {
    UP: {UP, LEFT, RIGHT, ERR},
    DOWN: {DOWN, LEFT, RIGHT, ERR},
    LEFT: {LEFT, ERR},
    RIGHT: {RIGHT, ERR},
}
# when several pointers are possible, sideways ones are preferred: they can
# follow either vertical direction, so they block fewer predecessors
PREFERENCE = {LEFT: 0, RIGHT: 0, UP: 1, DOWN: 1}

ERROR = "Error"
ERROR_INTRA, ERROR_INTER1, ERROR_INTER2 = "ErrorIntra", "ErrorInter1", "ErrorInter2"


def everything(i):
    return True


# tree problem


def badtree_site(g, v, x, broken, mark, value, keep):
    """Violations of the tree problem at v when v outputs x.

    `value(u)` gives the output of u (possibly UNASSIGNED); `mark` may be
    None when it is not yet known.
    """
    if x == BOT or x is UNASSIGNED:
        return
    if x == ERR:
        if not broken and mark is False:
            yield "err", "Err on an unmarked node that satisfies C^tree"
        return
    if x not in ROLE:
        yield "alphabet", f"{x!r} is not a tree-detector label"
        return
    t = step(g, v, ROLE[x], keep)
    if t == BOT:
        yield "target", f"{x} has no unique target"
        return
    y = value(t)
    if y is not UNASSIGNED and y not in SUCC[x]:
        yield "sequence", f"{x} points at a node labelled {y}"


def near_violation(g, v, keep, violates=None):
    """Whether some node within ERR_REACH of v (in the kept subgraph) breaks C^tree."""
    violates = violates or (lambda u: any(True for _ in tree_violations(g, u, keep)))
    return any(violates(u) for u in bfs(g, [v], ERR_REACH, keep_edge=keep))


class _TreeContext(Context):
    def violates(self, v, keep):
        return self.static(("tv", v), lambda: any(True for _ in tree_violations(self.g, v, keep)))

    def broken(self, v, keep):
        return self.static(("broken", v), lambda: near_violation(
            self.g, v, keep, lambda u: self.violates(u, keep)))


def badtree_problem(keep=None):
    keep = keep or everything

    def constraint(ctx, v):
        g = ctx.g
        mark = bool(g.inputs[v].get("mark", 0))
        return badtree_site(g, v, ctx.out[v], ctx.broken(v, keep), mark, ctx.out.nodes.__getitem__, keep)

    return LclProblem("badtree", BADTREE_RADIUS, V_BADTREE, constraint, out_radius=1,
                      context=_TreeContext)


def check_badtree(g, marks, out, keep=None):
    from .lcl import Labeling, check_all

    if not isinstance(out, Labeling):
        out = Labeling(out)
    return check_all(badtree_problem(keep), g.with_marks(marks), out)


def solve_badtree(g, marks, keep=None):
    """Deterministic layered solver.

    Returns (outputs, layers, radii). Layer 0 holds the ERR nodes; a node
    joins layer k when some pointer of it reaches a node of a lower layer
    whose label may follow that pointer. Nodes never reached output BOT.
    The radius of a node is the round at which a LOCAL execution that floods
    its neighbourhood can commit: layer + BADTREE_RADIUS + 1 (the last round
    rules out errors that truncation of the view would fake), or earlier if
    it has already seen its whole component.
    """
    keep = keep or everything
    n = g.n
    out = [UNASSIGNED] * n
    layer = [None] * n
    frontier = []
    violates = [any(True for _ in tree_violations(g, v, keep)) for v in range(n)]
    for v in range(n):
        if marks[v] or near_violation(g, v, keep, violates.__getitem__):
            out[v] = ERR
            layer[v] = 0
            frontier.append(v)
    k = 0
    while frontier:
        k += 1
        cand = set()
        for v in frontier:
            for i, u, _, _ in g.incident(v):
                if keep(i) and out[u] is UNASSIGNED:
                    cand.add(u)
        chosen = {}
        for v in cand:
            best = None
            for d in POINTERS:
                t = step(g, v, ROLE[d], keep)
                if t == BOT or out[t] is UNASSIGNED or out[t] not in SUCC[d]:
                    continue
                key = (PREFERENCE[d], g.ident(t))
                if best is None or key < best[0]:
                    best = (key, d)
            if best is not None:
                chosen[v] = best[1]
        for v, d in chosen.items():
            out[v] = d
            layer[v] = k
        frontier = sorted(chosen)
    for v in range(n):
        if out[v] is UNASSIGNED:
            out[v] = BOT
    adj = [[u for i, u, _, _ in g.incident(v) if keep(i)] for v in range(n)]
    radii = []
    for v in range(n):
        cap = layer[v] + BADTREE_RADIUS + 1 if layer[v] is not None else None
        radii.append(_commit_radius(adj, v, cap))
    return out, layer, radii


def _commit_radius(adj, v, cap):
    """Round at which v can commit: min(cap, round its view covers its component).

    A radius-t view lacks edges between two nodes at distance t, so the
    component is fully known one round after its farthest such edge.
    """
    dist = {v: 0}
    q = deque([v])
    while q:
        w = q.popleft()
        for u in adj[w]:
            if u not in dist:
                dist[u] = dist[w] + 1
                q.append(u)
    full = max(dist.values())
    for w, d in dist.items():
        for u in adj[w]:
            full = max(full, min(d, dist[u]) + 1)
    return full if cap is None else min(cap, full)


# octopus problem


def _stage_value(x, k):
    if x is UNASSIGNED:
        return UNASSIGNED
    if x == BOT or not (isinstance(x, tuple) and len(x) == 2 and x[0] == ERROR):
        return BOT
    return x[1][k]


def _valid_triple(x):
    return (
        isinstance(x, tuple)
        and len(x) == 2
        and x[0] == ERROR
        and isinstance(x[1], tuple)
        and len(x[1]) == 3
        and all(y in V_BADTREE for y in x[1])
    )


def _or3(*xs):
    if any(x is True for x in xs):
        return True
    if any(x is None for x in xs):
        return None
    return False


def _link_flag(g, v, role, value, keep):
    """Whether v has the node label `role` and a link edge to a non-BOT node.

    Any kept edge that is not internal counts as a link, whatever v's own half
    says: a corrupted half next to a broken partner must still pass the news.
    Three-valued: None when an unassigned neighbour could still decide it.
    """
    if g.labels[v] != role:
        return False
    state = False
    for i, u, _, _ in g.incident(v):
        if keep(i) and not internal_edge(g.edges[i]):
            y = value(u)
            if y is UNASSIGNED:
                state = None
            elif y != BOT:
                return True
    return state


def octopus_stage_marks(g, v, i1, stage_value, keep):
    """[i_{v,1}, i_{v,2}, i_{v,3}], None meaning not yet determined.

    i2 adds head nodes linked to a node whose first-stage output is non-BOT;
    i3 adds port nodes linked to a node whose second-stage output is non-BOT.
    """
    i2 = _or3(i1, _link_flag(g, v, HEAD, lambda u: stage_value(u, 0), keep))
    i3 = _or3(i2, _link_flag(g, v, PORT, lambda u: stage_value(u, 1), keep))
    return [bool(i1), i2, i3]


def badoctopus_site(g, v, x, i1, tree_broken, value, keep):
    """Violations of the octopus problem at v; value(u) is u's octopus output."""
    if x == BOT or x is UNASSIGNED:
        return
    if not _valid_triple(x):
        yield "alphabet", f"{x!r} is not an octopus-detector label"
        return
    triple = x[1]
    if all(y == BOT for y in triple):
        yield "1", "Error with an all-BOT triple"

    def internal(i):
        return keep(i) and internal_edge(g.edges[i])

    marks = octopus_stage_marks(g, v, i1, lambda u, k: _stage_value(value(u), k), keep)
    for k in range(3):
        stage = lambda u, k=k: _stage_value(value(u), k)  # noqa: E731
        for cid, detail in badtree_site(g, v, triple[k], tree_broken, marks[k], stage, internal):
            yield str(3 + 2 * k), f"stage {k + 1}: {cid}: {detail}"


class _OctopusContext(Context):
    keep = staticmethod(everything)

    def i1(self, v):
        return self.static(("i1", v), lambda: bool(self.g.inputs[v].get("mark", 0)) or any(
            True for _ in octopus_violations(self.g, v, self.keep)))

    def tree_broken(self, v):
        keep = self.keep
        return self.static(("tb", v), lambda: near_violation(
            self.g, v, lambda i: keep(i) and internal_edge(self.g.edges[i])))


def _octopus_alphabet():
    triples = [(a, b, c) for a in V_BADTREE for b in V_BADTREE for c in V_BADTREE]
    return [BOT] + [(ERROR, t) for t in triples if t != (BOT, BOT, BOT)]


V_BADOCTOPUS = _octopus_alphabet()


def badoctopus_problem():
    def constraint(ctx, v):
        return badoctopus_site(ctx.g, v, ctx.out[v], ctx.i1(v), ctx.tree_broken(v),
                               ctx.out.nodes.__getitem__, everything)

    return LclProblem("badoctopus", BADTREE_RADIUS, V_BADOCTOPUS, constraint, out_radius=1,
                      context=_OctopusContext)


def check_badoctopus(g, marks, out):
    from .lcl import Labeling, check_all

    if not isinstance(out, Labeling):
        out = Labeling(out)
    return check_all(badoctopus_problem(), g.with_marks(marks), out)


def solve_badoctopus(g, marks, keep=None):
    """Three stages of the tree solver, each marking more nodes.

    Returns (outputs, radii, stages) where stages[k] is the k-th stage output.
    Radii assume a phase schedule: stage k starts once every node has
    finished stage k-1, plus one round to read the neighbours' results.
    """
    keep = keep or everything

    def internal(i):
        return keep(i) and internal_edge(g.edges[i])

    i1 = [bool(marks[v]) or any(True for _ in octopus_violations(g, v, keep)) for v in range(g.n)]
    x1, _, r1 = solve_badtree(g, i1, internal)
    i2 = [i1[v] or _link_flag(g, v, HEAD, x1.__getitem__, keep) for v in range(g.n)]
    # on clean inputs the stages coincide, so skip the repeated work
    x2, _, r2 = (x1, None, r1) if i2 == i1 else solve_badtree(g, i2, internal)
    i3 = [i2[v] or _link_flag(g, v, PORT, x2.__getitem__, keep) for v in range(g.n)]
    x3, _, r3 = (x2, None, r2) if i3 == i2 else solve_badtree(g, i3, internal)
    stages = [x1, x2, x3]
    out = []
    for v in range(g.n):
        t = (stages[0][v], stages[1][v], stages[2][v])
        out.append(BOT if t == (BOT, BOT, BOT) else (ERROR, t))
    t1 = max(r1, default=0)
    t2 = max(r2, default=0)
    radii = [t1 + 1 + t2 + 1 + r for r in r3]
    return out, radii, stages


# proper-instance problem


def _intra_keep(g):
    return lambda i: g.labels[g.edges[i].u] != INTER and g.labels[g.edges[i].v] != INTER


class _GraphContext(Context):
    def proper_bad(self, v):
        return self.static(("pb", v), lambda: any(True for _ in proper_violations(self.g, v)))

    def octo_bad(self, v):
        keep = _intra_keep(self.g)
        return self.static(("ob", v), lambda: any(True for _ in octopus_violations(self.g, v, keep)))

    def tree_broken(self, v):
        g = self.g
        keep = _intra_keep(g)
        return self.static(("tb", v), lambda: near_violation(
            g, v, lambda i: keep(i) and internal_edge(g.edges[i])))


def badgraph_mark(g, v, proper_bad, value):
    """m_v: v breaks C^proper or has a neighbour committed to ERROR_INTER1."""
    if proper_bad:
        return True
    state = False
    for u in g.neighbors(v):
        y = value(u)
        if y is UNASSIGNED:
            state = None
        elif y == ERROR_INTER1:
            return True
    return state


def _octo_value(y):
    if y is UNASSIGNED:
        return UNASSIGNED
    if isinstance(y, tuple) and len(y) == 2 and y[0] == ERROR_INTRA:
        return y[1]
    return BOT


def badgraph_site(ctx, v):
    g = ctx.g
    x = ctx.out[v]
    if x == BOT or x is UNASSIGNED:
        return
    value = ctx.out.nodes.__getitem__
    if x == ERROR_INTER1:
        if g.labels[v] != INTER or not ctx.proper_bad(v):
            yield "inter1", "Error_inter1 needs an inter-octopus node violating C^proper"
        return
    if x == ERROR_INTER2:
        if g.labels[v] != INTER:
            yield "inter2", "Error_inter2 on a node that is not inter-octopus"
        elif any(value(u) == BOT for u in g.neighbors(v)):
            yield "inter2", "Error_inter2 next to a BOT neighbour"
        return
    if not (isinstance(x, tuple) and len(x) == 2 and x[0] == ERROR_INTRA and _valid_triple(x[1])):
        yield "alphabet", f"{x!r} is not a graph-detector label"
        return
    if g.labels[v] == INTER:
        yield "intra", "Error_intra on an inter-octopus node"
        return
    mark = badgraph_mark(g, v, ctx.proper_bad(v), value)
    if mark is None:
        return
    i1 = mark or ctx.octo_bad(v)
    for cid, detail in badoctopus_site(g, v, x[1], i1, ctx.tree_broken(v),
                                       lambda u: _octo_value(value(u)), _intra_keep(g)):
        yield "intra." + cid, detail


def _graph_alphabet():
    return [BOT, ERROR_INTER1, ERROR_INTER2] + [(ERROR_INTRA, x) for x in V_BADOCTOPUS[1:]]


V_BADGRAPH = _graph_alphabet()


def badgraph_candidates(g, v):
    if g.labels[v] == INTER:
        return [BOT, ERROR_INTER1, ERROR_INTER2]
    return [BOT] + [(ERROR_INTRA, x) for x in V_BADOCTOPUS[1:]]


def badgraph_problem():
    return LclProblem("badgraph", BADTREE_RADIUS, badgraph_candidates, badgraph_site, out_radius=1,
                      context=_GraphContext)


def check_badgraph(g, out):
    from .lcl import Labeling, check_all

    if not isinstance(out, Labeling):
        out = Labeling(out)
    return check_all(badgraph_problem(), g, out)


def solve_badgraph(g):
    """Returns (outputs, radii)."""
    n = g.n
    proper_bad = [any(True for _ in proper_violations(g, v)) for v in range(n)]
    out = [BOT] * n
    for v in range(n):
        if g.labels[v] == INTER and proper_bad[v]:
            out[v] = ERROR_INTER1
    marks = [
        g.labels[v] != INTER and (proper_bad[v] or any(out[u] == ERROR_INTER1 for u in g.neighbors(v)))
        for v in range(n)
    ]
    octo, octo_radii, _ = solve_badoctopus(g, marks, _intra_keep(g))
    # inter nodes know their violation at round TREE_RADIUS; marks need one more
    start = TREE_RADIUS + 1
    radii = [0] * n
    t_octo = max((octo_radii[v] for v in range(n) if g.labels[v] != INTER), default=0)
    for v in range(n):
        if g.labels[v] == INTER:
            if out[v] == ERROR_INTER1:
                radii[v] = TREE_RADIUS
            else:
                if g.degree(v) and all(out[u] != BOT for u in g.neighbors(v)):
                    out[v] = ERROR_INTER2
                radii[v] = start + t_octo + 1
        else:
            if octo[v] != BOT:
                out[v] = (ERROR_INTRA, octo[v])
            radii[v] = start + octo_radii[v]
    return out, radii


def bot_subgraph(g, out):
    """Induced subgraph on BOT-labelled nodes: (graph, old->new, new->old)."""
    return g.induced([v for v in range(g.n) if out[v] == BOT])
