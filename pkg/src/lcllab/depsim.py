"""Bounded-dependence outcomes and their classical simulation.

The pipeline: carve the graph into well-separated clusters plus a small
leftover set D, split D into far-apart parts, sample each part from the
outcome's marginal, then complete every cluster by search.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import ContractViolation, bfs, view
from .lcl import UNASSIGNED, BudgetExceeded, Labeling, brute_force_solve, check_all
from .localsim import node_bits


class NotEnumerable(NotImplementedError):
    """The outcome cannot produce exact marginals."""


class EnumerationTooLarge(RuntimeError):
    pass


MAX_ENUMERATION_BITS = 20


def _seed_int(seed, *key):
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def _sample_law(law, rng):
    keys = sorted(law, key=repr)
    probs = np.array([float(law[k]) for k in keys])
    return keys[rng.choice(len(keys), p=probs / probs.sum())]


class Outcome:
    """A labeling distribution per graph, with locality and success probability."""

    success = 1.0

    def locality(self, g):
        raise NotImplementedError

    def sample(self, g, seed):
        raise NotImplementedError

    def sample_part(self, g, nodes, seed):
        # by non-signaling, restricting a full sample is a sample of the marginal
        out = self.sample(g, seed)
        return {v: out[v] for v in nodes}

    def marginal(self, g, nodes):
        """Exact law of the outputs on sorted(nodes): {tuple: Fraction}."""
        raise NotEnumerable(type(self).__name__)

    def conditional(self, g, v, fixed):
        """Exact law of v's output given the outputs in `fixed`."""
        nodes = sorted(set(fixed) | {v})
        law = self.marginal(g, nodes)
        pos = nodes.index(v)
        keep = Counter()
        for tup, pr in law.items():
            if all(tup[nodes.index(u)] == x for u, x in fixed.items()):
                keep[tup[pos]] += pr
        total = sum(keep.values())
        if not total:
            raise ContractViolation("conditioning on an event of probability 0")
        return {x: pr / total for x, pr in keep.items()}


class EnumerableOutcome(Outcome):
    """Each node draws `bits` private coins; its output is `rule(view, coins)`.

    `rule` gets the radius-`radius` view around the node and a list of coin
    tuples aligned with view.nodes.
    """

    def __init__(self, radius, bits, rule, success=1.0):
        self.radius = radius
        self.bits = bits
        self.rule = rule
        self.success = success

    def locality(self, g):
        return self.radius

    def _outputs(self, g, nodes, coins):
        res = {}
        for v in nodes:
            vw = view(g, [v], self.radius)
            res[v] = self.rule(vw, [coins[u] for u in vw.nodes])
        return res

    def sample(self, g, seed):
        coins = {u: tuple(node_bits(seed, u, 0, self.bits)) for u in range(g.n)}
        out = self._outputs(g, range(g.n), coins)
        return [out[v] for v in range(g.n)]

    def marginal(self, g, nodes):
        nodes = sorted(nodes)
        support = sorted(bfs(g, nodes, self.radius)) if nodes else []
        total = self.bits * len(support)
        if total > MAX_ENUMERATION_BITS:
            raise EnumerationTooLarge(f"{total} coins to enumerate")
        law = Counter()
        weight = Fraction(1, 2 ** total)
        per_node = list(itertools.product((0, 1), repeat=self.bits))
        for choice in itertools.product(per_node, repeat=len(support)):
            out = self._outputs(g, nodes, dict(zip(support, choice)))
            law[tuple(out[v] for v in nodes)] += weight
        return dict(law)

    def table(self, g):
        return TableOutcome(g, self.marginal(g, range(g.n)), self.radius)


class TableOutcome(Outcome):
    """An explicit distribution over full labelings of one graph."""

    def __init__(self, g, law, radius):
        self.n = g.n
        self.law = {tuple(k): Fraction(p) for k, p in law.items()}
        self.radius = radius
        self._marginals = {}
        if sum(self.law.values()) != 1:
            raise ContractViolation("table probabilities must sum to 1")

    def _check(self, g):
        if g.n != self.n:
            raise ContractViolation(f"table is for {self.n} nodes, graph has {g.n}")

    def locality(self, g):
        return self.radius

    def sample(self, g, seed):
        self._check(g)
        return list(_sample_law(self.law, np.random.default_rng(seed)))

    def marginal(self, g, nodes):
        self._check(g)
        nodes = tuple(sorted(nodes))
        if nodes not in self._marginals:
            law = Counter()
            for tup, pr in self.law.items():
                law[tuple(tup[v] for v in nodes)] += pr
            self._marginals[nodes] = dict(law)
        return dict(self._marginals[nodes])


class QuantumPiOutcome(Outcome):
    """The distribution of the GHZ-based solver for the full problem."""

    def __init__(self):
        self._radius = {}

    def locality(self, g):
        key = id(g)
        if key not in self._radius:
            from .ghz import solve_pi

            self._radius[key] = (g, max(solve_pi(g, 0).radii, default=0))
        return self._radius[key][1]

    def sample(self, g, seed):
        from .ghz import solve_pi

        return solve_pi(g, seed).out


def constant_outcome(value=0):
    return EnumerableOutcome(0, 0, lambda vw, coins: value)


# clustering


@dataclass
class Clustering:
    D: list
    clusters: list
    eps: float
    r: int
    centers: list = field(default_factory=list)
    radii: list = field(default_factory=list)

    def stats(self):
        return {
            "D": len(self.D),
            "clusters": len(self.clusters),
            "eps": self.eps,
            "r": self.r,
            "max_cluster_radius": max(self.radii, default=0),
        }


def cluster(g, r, eps):
    """Ball carving with boundary shells of width 2r.

    From the smallest remaining node, grow a ball until the shell of
    remaining nodes at distance (rho, rho + 2r] holds at most eps times the
    ball. The ball becomes a cluster and the shell goes to D. Remaining
    nodes are then more than 2r away from the cluster, which is carving in
    the 2r-th power graph without building it.
    """
    if not 0 < eps <= 1:
        raise ContractViolation("eps must be in (0, 1]")
    if r < 0:
        raise ContractViolation("checking radius must be >= 0")
    width = 2 * r
    alive = [True] * g.n
    D, clusters, centers, radii = [], [], [], []
    for v in range(g.n):
        if not alive[v]:
            continue
        dist = {u: d for u, d in bfs(g, [v]).items() if alive[u]}
        layers = Counter(dist.values())
        top = max(layers)
        ball, rho = 0, 0
        while True:
            ball += layers.get(rho, 0)
            shell = sum(layers.get(d, 0) for d in range(rho + 1, rho + width + 1))
            if shell <= eps * ball or rho >= top:
                break
            rho += 1
        inside = sorted(u for u, d in dist.items() if d <= rho)
        rim = sorted(u for u, d in dist.items() if rho < d <= rho + width)
        for u in inside + rim:
            alive[u] = False
        clusters.append(inside)
        centers.append(v)
        radii.append(max(dist[u] for u in inside))
        D += rim
    return Clustering(sorted(D), clusters, eps, r, centers, radii)


def check_clustering(g, c):
    """Problems with the clustering contract; empty when it holds."""
    problems = []
    if len(c.D) > c.eps * g.n + 1e-9:
        problems.append(f"|D| = {len(c.D)} > eps*n = {c.eps * g.n:.3f}")
    owner = {}
    for i, s in enumerate(c.clusters):
        for v in s:
            owner[v] = i
    if sorted(list(owner) + list(c.D)) != list(range(g.n)):
        problems.append("clusters and D do not partition the nodes")
    for i, s in enumerate(c.clusters):
        for u in bfs(g, s, 2 * c.r):
            if owner.get(u, i) != i:
                problems.append(f"clusters {i} and {owner[u]} are within {2 * c.r}")
                break
    return problems


@dataclass
class DPartition:
    parts: list
    T: int
    iterations: list

    def locality(self):
        return max(self.iterations, default=0) * 2 * self.T


def partition_D(g, D, T):
    """Grow each part by repeated radius-2T exploration until nothing new is found."""
    inD = set(D)
    seen = set()
    parts, iterations = [], []
    for d in sorted(inD):
        if d in seen:
            continue
        part, frontier, it = {d}, [d], 0
        while frontier:
            it += 1
            found = set(bfs(g, frontier, 2 * T)) & inD
            frontier = sorted(found - part)
            part |= found
        seen |= part
        parts.append(sorted(part))
        iterations.append(it)
    return DPartition(parts, T, iterations)


def check_partition(g, dp):
    owner = {v: i for i, p in enumerate(dp.parts) for v in p}
    problems = []
    for i, p in enumerate(dp.parts):
        for u in bfs(g, p, 2 * dp.T):
            if owner.get(u, i) != i:
                problems.append(f"parts {i} and {owner[u]} are within {2 * dp.T}")
                break
    return problems


def sample_D(outcome, g, dp, seed):
    """Independent per-part samples from the outcome's marginals, as a partial Labeling."""
    out = Labeling.empty(g)
    for i, part in enumerate(dp.parts):
        for v, x in outcome.sample_part(g, part, _seed_int(seed, i)).items():
            out.nodes[v] = x
    return out


def sample_D_law(outcome, g, dp):
    """Exact law of sample_D on the sorted union of the parts."""
    nodes = sorted(v for p in dp.parts for v in p)
    law = {(): Fraction(1)}
    got = []
    for part in dp.parts:
        m = outcome.marginal(g, part)
        law = {a + b: pa * pb for a, pa in law.items() for b, pb in m.items()}
        got += sorted(part)
    pos = [got.index(v) for v in nodes]
    return {tuple(k[i] for i in pos): pr for k, pr in law.items()}


# completion


def complete_clusters(p, g, clustering, partial, cache=None):
    """Extend `partial` on every cluster, or None if some cluster cannot be completed.

    Uses p.meta["completer"] when present; otherwise brute force on the
    cluster plus its 2r-neighbourhood, enforcing only constraints of nodes
    within r of the cluster.
    """
    cache = {} if cache is None else cache
    out = partial.copy()
    completer = p.meta.get("completer")
    for s in clustering.clusters:
        if completer is not None:
            got = completer(g, s, partial.nodes, cache)
        else:
            got = _brute_complete(p, g, s, partial)
        if got is None:
            return None
        for v, x in got.items():
            out.nodes[v] = x
    return out


def _brute_complete(p, g, s, partial):
    vw = view(g, s, 2 * p.radius)
    local = {v: i for i, v in enumerate(vw.nodes)}
    sub_partial = Labeling([partial.nodes[v] if v not in set(s) else UNASSIGNED for v in vw.nodes])
    scope = [local[v] for v in bfs(g, s, p.radius)]
    try:
        sol = brute_force_solve(p, vw.graph, sub_partial, scope=scope)
    except BudgetExceeded:
        return None
    if sol is None:
        return None
    return {v: sol.nodes[local[v]] for v in s}


def problem_violations(p, g, out):
    check = p.meta.get("check")
    if check is not None:
        return check(g, out.nodes if isinstance(out, Labeling) else out)
    return check_all(p, g, out if isinstance(out, Labeling) else Labeling(out))


@dataclass
class SimResult:
    labeling: object
    valid: bool
    stats: dict


def simulate(outcome, p, g, seed, eps=None, verify=True):
    """Classical simulation of `outcome` for problem `p` on g."""
    T = outcome.locality(g)
    if eps is None:
        eps = min(1.0, 1 / math.sqrt(max(1, g.n * max(T, 1))))
    c = cluster(g, p.radius, eps)
    dp = partition_D(g, c.D, T)
    partial = sample_D(outcome, g, dp, seed)
    out = complete_clusters(p, g, c, partial)
    width = 2 * p.radius
    loc = {
        "cluster": max(c.radii, default=0) + width,
        "partition": dp.locality(),
        "sample": dp.locality() + T,
        "complete": 2 * max(c.radii, default=0) + width,
    }
    loc["total"] = sum(loc.values())
    stats = dict(c.stats(), n=g.n, T=T, parts=len(dp.parts), locality=loc)
    if verify:
        stats["clustering_problems"] = check_clustering(g, c)
        stats["partition_problems"] = check_partition(g, dp)
    if out is None:
        stats["violations"] = None
        return SimResult(None, False, stats)
    bad = problem_violations(p, g, out)
    stats["violations"] = len(bad)
    return SimResult(out.nodes, not bad, stats)


# online-LOCAL adapter


def _component_of(g, revealed, v, T):
    """Revealed nodes in v's component of the union of radius-T balls."""
    area = bfs(g, revealed, T)
    sub, fwd, old = g.induced(area)
    comp = bfs(sub, [fwd[v]])
    return {old[i] for i in comp} & set(revealed)


def online_adapter(outcome, g, reveal_order, seed):
    """Per revealed node, sample conditioned on earlier commitments in its component."""
    rng = np.random.default_rng(seed)
    T = outcome.locality(g)
    revealed, out, res = [], {}, []
    for v in reveal_order:
        revealed.append(v)
        comp = _component_of(g, revealed, v, T)
        fixed = {u: out[u] for u in comp if u in out}
        x = _sample_law(outcome.conditional(g, v, fixed), rng)
        out[v] = x
        res.append((v, x))
    return res


def adapter_law(outcome, g, reveal_order):
    """Exact law of online_adapter's outputs, as {tuple in reveal order: Fraction}."""
    T = outcome.locality(g)
    law = {(): Fraction(1)}
    for k, v in enumerate(reveal_order):
        revealed = list(reveal_order[: k + 1])
        comp = _component_of(g, revealed, v, T)
        nxt = Counter()
        for prefix, pr in law.items():
            out = dict(zip(reveal_order, prefix))
            fixed = {u: out[u] for u in comp if u in out}
            for x, q in outcome.conditional(g, v, fixed).items():
                nxt[prefix + (x,)] += pr * q
        law = dict(nxt)
    return law


def total_variation(p, q):
    keys = set(p) | set(q)
    return sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys) / 2


def trivial_problem():
    """Every node outputs 0; nothing to check."""
    from .lcl import LclProblem

    def constraint(ctx, v):
        x = ctx.out[v]
        if x is not UNASSIGNED and x != 0:
            yield "value", f"{x!r} != 0"

    return LclProblem("trivial", 0, [0], constraint)
