import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lcllab.gadgets import (
    CHL,
    CHR,
    E_OCTOPUS,
    E_PROPER,
    E_TREE,
    HEAD,
    HP1,
    HP2,
    INTER,
    PH,
    PI,
    IP,
    PORT,
    V_OCTOPUS,
    V_PROPER,
    BipartiteInstance,
    InvalidInstance,
    OctopusSpec,
    build_octopus,
    build_tree_gadget,
    canonical_eta,
    check_octopus,
    check_proper,
    check_tree,
    compress,
    head_height,
    lift,
    mutate,
    octopus_violations,
    proper_violations,
    random_bipartite,
    tree_index,
    tree_violations,
)
from lcllab.graph import BOT, Edge, LabeledGraph, bfs, diameter, step

from oracles import bfs_layers, coordinate_tree


def ids(violations):
    return {x.constraint for x in violations}


def test_tree_sizes():
    g1 = build_tree_gadget(1)
    assert (g1.n, g1.m) == (1, 0) and check_tree(g1) == []
    g2 = build_tree_gadget(2)
    assert (g2.n, g2.m) == (3, 3) and check_tree(g2) == []
    g4 = build_tree_gadget(4)
    assert g4.n == 15


@pytest.mark.parametrize("height", [1, 2, 3, 4, 5, 6])
def test_tree_matches_coordinate_construction(height):
    g = build_tree_gadget(height)
    ref = coordinate_tree(height)
    index = lambda c: tree_index(*c)  # noqa: E731
    mine = sorted((min(e.u, e.v), max(e.u, e.v), e.lu if e.u < e.v else e.lv,
                   e.lv if e.u < e.v else e.lu) for e in g.edges)
    theirs = sorted((min(index(a), index(b)), max(index(a), index(b)),
                     la if index(a) < index(b) else lb, lb if index(a) < index(b) else la)
                    for a, b, la, lb in ref)
    assert mine == theirs
    depth = bfs_layers(g.edge_subgraph(lambda i, e: {e.lu, e.lv} != {"L", "R"})[0], 0)
    for l in range(height):
        layer = sorted(v for v, d in depth.items() if d == l)
        assert len(layer) == 2 ** l
        # each layer is a path through L/R edges
        sib = [e for e in g.edges if e.u in layer and e.v in layer]
        assert len(sib) == len(layer) - 1


def test_tree_violation_examples():
    g = build_tree_gadget(3)
    e = g.edges[0]
    dup = [Edge(e.u, e.v, e.lu, e.lv)] + list(g.edges[1:])
    # give the root two ChL half-edges
    dup = [Edge(x.u, x.v, CHL if x.lu == CHR and x.u == 0 else x.lu, x.lv) for x in dup]
    assert "1" in ids(check_tree(g.replace(edges=dup)))
    no_right = [x for x in g.edges if not (x.u == 0 and x.lu == CHR)]
    assert "6" in ids(check_tree(g.replace(edges=no_right)))


def test_octopus_examples():
    g = build_octopus(OctopusSpec.uniform(1, (1,), 1))
    assert g.n == 2 and g.m == 1 and check_octopus(g) == []
    spec = OctopusSpec.uniform(2, (2, 1), 2)
    g = build_octopus(spec)
    assert g.n == 3 + 3 * 3 and check_octopus(g) == []
    leaf0, leaf1 = tree_index(1, 0), tree_index(1, 1)
    assert {HP1, HP2} <= set(g.half_labels(leaf0))
    assert HP1 in g.half_labels(leaf1) and HP2 not in g.half_labels(leaf1)


def test_octopus_violation_examples():
    g = build_octopus(OctopusSpec.uniform(2, (2, 1), 2))
    cut = [e for e in g.edges if PH not in (e.lu, e.lv) or e.lu != HP2]
    assert "6" in ids(check_octopus(g.replace(edges=cut)))
    heads = [v for v in range(g.n) if g.labels[v] == HEAD]
    extra = list(g.edges) + [Edge(heads[1], heads[2], HP1, PH)]
    found = check_octopus(g.replace(edges=extra))
    assert "1" in ids(found)


def test_octopus_spec_validation():
    with pytest.raises(InvalidInstance):
        OctopusSpec.uniform(2, (1,), 1)
    with pytest.raises(InvalidInstance):
        OctopusSpec.uniform(1, (3,), 1)
    with pytest.raises(InvalidInstance):
        OctopusSpec(1, (1,), {(0, 1): 0})


def test_proper_examples():
    b = random_bipartite(5, 4, seed=3)
    res = lift(b, 2)
    assert check_proper(res.graph) == []
    g = res.graph
    lonely = LabeledGraph(g.n + 1, g.edges, list(g.labels) + [INTER])
    assert any(x.constraint == "3" and x.node == g.n for x in check_proper(lonely))
    # pi_link on a port leaf that is not the left-most one
    e0 = next(iter(res.port_leftmost))
    other_leaf = res.port_leftmost[e0] + 1
    edges = list(g.edges) + [Edge(other_leaf, res.inter[0], PI, IP)]
    assert any(x.constraint == "2" and x.node == other_leaf for x in check_proper(g.replace(edges=edges)))


def test_smallest_lift():
    b = BipartiteInstance(1, 1, ((0, 0),), ((0,),))
    res = lift(b, 3)
    g = res.graph
    assert sum(1 for x in g.labels if x == HEAD) == 1
    assert sum(1 for x in g.labels if x == PORT) == 7
    assert res.inter == [8]
    assert check_proper(g) == []


def test_head_shape_for_degree_three():
    assert head_height(3) == 2 and canonical_eta(3) == (2, 1)


@pytest.mark.parametrize("deg", range(1, 9))
def test_port_count_equals_degree(deg):
    assert sum(canonical_eta(deg)) == deg
    assert len(canonical_eta(deg)) == 2 ** (head_height(deg) - 1)
    b = BipartiteInstance(1, 1, tuple((0, 0) for _ in range(deg)), (tuple(range(deg)),))
    res = lift(b, 1)
    assert sum(1 for x in res.graph.labels if x == PORT) == deg


def _same_instance(b, res, b2, comp2):
    """compress(lift(b)) equals b up to renaming, with orders carried over."""
    g = res.graph
    wmap, kmap, emap = {}, {}, {}
    for v in range(g.n):
        a, c = res.comp[v], comp2[v]
        assert a[0] == c[0]
        table = {"white": wmap, "black": kmap, "edge": emap}[a[0]]
        assert table.setdefault(a[1], c[1]) == c[1]
    assert len(wmap) == b.whites == b2.whites and len(kmap) == b.blacks == b2.blacks
    for e, (w, k) in enumerate(b.edges):
        assert b2.edges[emap[e]] == (wmap[w], kmap[k])
    for w in range(b.whites):
        assert b2.order[wmap[w]] == tuple(emap[e] for e in b.order[w])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 50), st.integers(1, 8), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_compress_inverts_lift(whites, delta, h, seed):
    # total degree must be able to reach a multiple of the black degree
    assume(any(t % 3 == 0 for t in range(whites, whites * delta + 1)))
    b = random_bipartite(whites, delta, seed)
    res = lift(b, h)
    b2, comp2 = compress(res.graph)
    _same_instance(b, res, b2, comp2)


def test_compress_rejects_single_octopus():
    g = build_octopus(OctopusSpec.uniform(1, (1,), 2))
    with pytest.raises(InvalidInstance):
        compress(g.replace(labels=list(g.labels)))


def test_two_ports_on_one_leaf_are_consecutive():
    b = BipartiteInstance(1, 1, ((0, 0), (0, 0), (0, 0)), ((2, 0, 1),))
    res = lift(b, 1)
    g = res.graph
    leaf = tree_index(1, 0)
    first = step(g, leaf, HP1)
    second = step(g, leaf, HP2)
    assert res.comp[first] == ("edge", 2) and res.comp[second] == ("edge", 0)
    b2, _ = compress(g)
    assert b2.order == ((0, 1, 2),)


def test_black_of_degree_zero_rejected():
    b = BipartiteInstance(1, 2, ((0, 0),), ((0,),))
    with pytest.raises(InvalidInstance):
        lift(b, 1)


@pytest.mark.parametrize("family", ["tree", "octopus", "proper"])
def test_single_mutations_are_detected(family):
    rng = random.Random(family)
    for _ in range(150):
        if family == "tree":
            g = build_tree_gadget(rng.randint(2, 5))
            fn, halves, nodes = tree_violations, E_TREE, ()
        elif family == "octopus":
            x = rng.randint(1, 3)
            eta = tuple(rng.choice((1, 2)) for _ in range(2 ** (x - 1)))
            g = build_octopus(OctopusSpec.uniform(x, eta, rng.randint(1, 3)))
            fn, halves, nodes = octopus_violations, E_OCTOPUS, V_OCTOPUS
        else:
            g = lift(random_bipartite(rng.randint(1, 6), 4, rng.random()), rng.randint(1, 2)).graph
            fn, halves, nodes = proper_violations, E_PROPER, V_PROPER
        _, _, bad = mutate(g, rng, halves, nodes)
        assert any(True for v in range(bad.n) for _ in fn(bad, v))


def test_octopus_diameter_is_linear_in_heights():
    worst = 0
    for x in range(1, 5):
        for w in range(1, 5):
            g = build_octopus(OctopusSpec.uniform(x, (2,) * 2 ** (x - 1), w))
            d = diameter(g)
            worst = max(worst, d / (x + w))
    assert worst <= 4


def test_lift_gadget_boundaries_are_linked():
    res = lift(random_bipartite(4, 4, seed=9), 2)
    g = res.graph
    for e, root in res.port_root.items():
        assert step(g, root, PH) is not BOT
        assert step(g, res.port_leftmost[e], PI) in res.inter
