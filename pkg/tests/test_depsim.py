import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcllab.depsim import (
    Clustering,
    DPartition,
    EnumerableOutcome,
    EnumerationTooLarge,
    NotEnumerable,
    QuantumPiOutcome,
    TableOutcome,
    adapter_law,
    check_clustering,
    check_partition,
    cluster,
    complete_clusters,
    constant_outcome,
    online_adapter,
    partition_D,
    sample_D,
    sample_D_law,
    simulate,
    total_variation,
    trivial_problem,
)
from lcllab.gadgets import lift, random_bipartite
from lcllab.ghz import check_pi, pi_problem
from lcllab.graph import ContractViolation, Edge, LabeledGraph, view
from lcllab.lcl import UNASSIGNED, Labeling, LclProblem, check_all

from oracles import empirical, full_coin_law, nx_distance


def path(n):
    return LabeledGraph(n, [Edge(i, i + 1, "", "") for i in range(n - 1)])


def cycle(n):
    return LabeledGraph(n, [Edge(i, (i + 1) % n, "", "") for i in range(n)])


def grid(w, h):
    edges = []
    for y in range(h):
        for x in range(w):
            v = y * w + x
            if x + 1 < w:
                edges.append(Edge(v, v + 1, "", ""))
            if y + 1 < h:
                edges.append(Edge(v, v + w, "", ""))
    return LabeledGraph(w * h, edges)


def two_coloring():
    def constraint(ctx, v):
        x = ctx.out[v]
        if x is UNASSIGNED:
            return
        for u in ctx.g.neighbors(v):
            if ctx.out[u] == x:
                yield "proper", f"neighbour {u}"

    return LclProblem("2-col", 1, [0, 1], constraint)


def xor_rule(vw, coins):
    # parity of every coin in the radius-1 view
    return sum(c[0] for c in coins) % 2


def own_coin(vw, coins):
    return coins[vw.nodes.index(vw.centers[0])][0]


# clustering


def test_path_clustering_leftover_is_small():
    g = path(100)
    c = cluster(g, 1, 0.1)
    assert len(c.D) <= 10
    assert check_clustering(g, c) == []


def test_complete_graph_is_one_cluster():
    n = 7
    g = LabeledGraph(n, [Edge(u, v, "", "") for u in range(n) for v in range(u + 1, n)])
    c = cluster(g, 2, 0.3)
    assert c.D == [] and c.clusters == [list(range(n))]


def test_eps_one_is_accepted():
    g = path(30)
    c = cluster(g, 3, 1.0)
    assert check_clustering(g, c) == []


def test_cluster_rejects_bad_parameters():
    with pytest.raises(ContractViolation):
        cluster(path(3), 1, 0)
    with pytest.raises(ContractViolation):
        cluster(path(3), -1, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 3),
       st.sampled_from([0.05, 0.1, 0.3, 1.0]))
def test_clustering_invariants_on_grids(w, h, r, eps):
    g = grid(w, h)
    c = cluster(g, r, eps)
    assert check_clustering(g, c) == []
    # gaps measured independently
    for i, a in enumerate(c.clusters):
        for b in c.clusters[i + 1:]:
            assert nx_distance(g, a, b) > 2 * r


# partitioning


def test_partition_examples():
    g = path(10)
    assert len(partition_D(g, [1, 6], 1).parts) == 2
    assert len(partition_D(g, [1, 3], 1).parts) == 1
    dp = partition_D(g, [0, 2, 4, 9], 1)
    assert dp.parts == [[0, 2, 4], [9]]
    assert dp.locality() <= 4 * 2 * 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3), st.floats(0.02, 0.3))
def test_partition_gaps_on_grid(seed, T, density):
    rng = random.Random(seed)
    g = grid(10, 10)
    D = sorted(v for v in range(g.n) if rng.random() < density)
    dp = partition_D(g, D, T)
    assert sorted(v for p in dp.parts for v in p) == D
    assert check_partition(g, dp) == []
    for i, a in enumerate(dp.parts):
        for b in dp.parts[i + 1:]:
            assert nx_distance(g, a, b) >= 2 * T + 1
    assert dp.locality() <= max(1, len(D)) * 2 * T


# outcomes and sampling


def test_marginal_matches_full_enumeration():
    g = path(5)
    o = EnumerableOutcome(1, 1, xor_rule)
    ref = full_coin_law(g, 1, 1, xor_rule, range(5), view)
    assert o.marginal(g, range(5)) == ref
    ref = full_coin_law(g, 1, 1, xor_rule, [0, 4], view)
    assert o.marginal(g, [0, 4]) == ref


def test_enumeration_guard():
    with pytest.raises(EnumerationTooLarge):
        EnumerableOutcome(1, 2, xor_rule).marginal(path(30), range(30))
    with pytest.raises(NotEnumerable):
        QuantumPiOutcome().marginal(path(2), [0])


@pytest.mark.parametrize("n,D", [(6, [0, 5]), (8, [0, 1, 6, 7]), (7, [0, 2, 4, 6]), (5, [2])])
def test_sample_D_exact_law(n, D):
    g = path(n)
    o = EnumerableOutcome(1, 1, xor_rule)
    dp = partition_D(g, D, 1)
    ref = full_coin_law(g, 1, 1, xor_rule, D, view)
    assert sample_D_law(o, g, dp) == ref


def test_sample_D_far_parts_product_form():
    g = path(8)
    o = EnumerableOutcome(1, 1, xor_rule)
    dp = partition_D(g, [0, 7], 1)
    assert len(dp.parts) == 2
    trials = 10 ** 4
    c = Counter()
    for s in range(trials):
        lab = sample_D(o, g, dp, s)
        c[(lab[0], lab[7])] += 1
    # chi-square against the uniform product law, 3 degrees of freedom
    chi2 = sum((c[k] - trials / 4) ** 2 / (trials / 4) for k in [(0, 0), (0, 1), (1, 0), (1, 1)])
    assert chi2 < 16.27  # p = 0.001


def test_sample_D_single_part_is_direct_sample():
    g = path(4)
    o = EnumerableOutcome(1, 1, own_coin)
    dp = DPartition([[1, 2]], 1, [1])
    lab = sample_D(o, g, dp, 3)
    assert lab[0] is UNASSIGNED and lab[3] is UNASSIGNED
    assert lab[1] in (0, 1) and lab[2] in (0, 1)


def test_table_outcome_checks_its_graph():
    g = path(2)
    t = TableOutcome(g, {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}, 1)
    assert t.marginal(g, [1]) == {(0,): Fraction(1, 2), (1,): Fraction(1, 2)}
    assert t.conditional(g, 1, {0: 1}) == {1: 1}
    with pytest.raises(ContractViolation):
        t.sample(path(3), 0)
    with pytest.raises(ContractViolation):
        TableOutcome(g, {(0, 0): Fraction(1, 3)}, 1)
    with pytest.raises(ContractViolation):
        t.conditional(g, 1, {0: 5})


# completion


def test_complete_from_restricted_solution():
    g = cycle(12)
    c = cluster(g, 1, 0.2)
    known = Labeling([i % 2 for i in range(12)])
    out = complete_clusters(two_coloring(), g, c, known.restrict(c.D))
    assert out is not None and check_all(two_coloring(), g, out) == []


def test_contradicting_frontier_gives_none():
    g = cycle(6)
    c = Clustering([0, 2], [[1], [3, 4, 5]], 0.5, 1)
    partial = Labeling([0, UNASSIGNED, 1, UNASSIGNED, UNASSIGNED, UNASSIGNED])
    assert complete_clusters(two_coloring(), g, c, partial) is None


def test_two_clusters_complete_independently():
    g = path(11)
    c = Clustering([4, 5, 6], [[0, 1, 2, 3], [7, 8, 9, 10]], 0.3, 1)
    partial = Labeling([UNASSIGNED] * 4 + [0, 1, 0] + [UNASSIGNED] * 4)
    assert check_clustering(g, c) == []
    out = complete_clusters(two_coloring(), g, c, partial)
    assert check_all(two_coloring(), g, out) == []


# simulation


def test_trivial_outcome_always_succeeds():
    g = grid(6, 6)
    for seed in range(20):
        res = simulate(constant_outcome(0), trivial_problem(), g, seed)
        assert res.valid and res.labeling == [0] * g.n
        assert res.stats["clustering_problems"] == [] and res.stats["partition_problems"] == []


def test_simulate_pi_on_small_lift():
    g = lift(random_bipartite(6, 4, seed=2), 3).graph
    outcome = QuantumPiOutcome()
    for seed in range(5):
        res = simulate(outcome, pi_problem(), g, seed, eps=0.3)
        assert res.valid and check_pi(g, res.labeling) == []
        assert res.stats["clustering_problems"] == [] and res.stats["partition_problems"] == []
        loc = res.stats["locality"]
        assert loc["total"] == loc["cluster"] + loc["partition"] + loc["sample"] + loc["complete"]


def test_recorded_locality_is_sublinear():
    # lifts of roughly 2^8, 2^10 and 2^12 nodes
    outcome = QuantumPiOutcome()
    points = []
    for whites, h in [(12, 3), (24, 4), (48, 5)]:
        g = lift(random_bipartite(whites, 4, seed=whites), h).graph
        res = simulate(outcome, pi_problem(), g, 0)
        assert res.valid
        points.append((g.n, res.stats["locality"]["total"]))
    (n0, l0), (n2, l2) = points[0], points[-1]
    assert l2 / l0 < n2 / n0


# online adapter


def six_node_outcome():
    g = LabeledGraph(6, [Edge(0, 1, "", ""), Edge(1, 2, "", ""), Edge(3, 4, "", ""),
                         Edge(4, 5, "", ""), Edge(2, 3, "", "")])
    return g, EnumerableOutcome(1, 1, xor_rule)


def test_first_reveal_is_the_marginal():
    g, o = six_node_outcome()
    law = adapter_law(o, g, [2])
    assert law == {(x,): p for (x,), p in o.marginal(g, [2]).items()}


def test_adapter_law_equals_outcome_law():
    g, o = six_node_outcome()
    for order in ([0, 5, 2, 3, 1, 4], [3, 0, 4, 5, 1, 2], list(range(6))):
        want = o.marginal(g, range(6))
        got = adapter_law(o, g, order)
        reordered = {tuple(k[order.index(v)] for v in range(6)): p for k, p in got.items()}
        assert reordered == want


def test_far_components_are_independent():
    g = path(10)
    o = EnumerableOutcome(1, 1, own_coin)
    law = adapter_law(o, g, [0, 9])
    assert law == {(a, b): Fraction(1, 4) for a in (0, 1) for b in (0, 1)}
    xor = EnumerableOutcome(1, 1, xor_rule)
    law = adapter_law(xor, g, [0, 9])
    m0, m9 = xor.marginal(g, [0]), xor.marginal(g, [9])
    assert law == {(a, b): m0[(a,)] * m9[(b,)] for (a,) in m0 for (b,) in m9}


def test_adapter_empirical_tv():
    g, o = six_node_outcome()
    table = o.table(g)
    order = [0, 5, 2, 3, 1, 4]
    samples = []
    for s in range(10 ** 4):
        res = online_adapter(table, g, order, s)
        samples.append(tuple(x for _, x in sorted(res)))
    assert total_variation(empirical(samples), table.law) <= 0.05
