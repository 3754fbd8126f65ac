import random

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from lossykernel.errors import CapExceeded, ParseError
from lossykernel.graph import complete, cycle, make_graph, path, random_graph, star
from lossykernel.harness import random_low_tw_graph, random_rooted_tree
from lossykernel.treewidth import (RootedTree, TreeDecomposition, enumerate_cliques, exact_tree_decomposition,
                                   heuristic_tree_decomposition, is_nice, lca_closure, make_binary_rooted,
                                   make_nice, parse_tree_decomposition, single_bag, tree_components,
                                   treewidth, treewidth_at_most, verify_tree_decomposition)

from oracles import brute_cliques, brute_treewidth
from strategies import graphs


# exact decompositions

def test_tree_has_width_one():
    td = exact_tree_decomposition(nx.balanced_tree(2, 3), width_cap=1)
    assert td is not None and td.width() == 1


def test_k5_exceeds_cap_three():
    assert exact_tree_decomposition(complete(5), width_cap=3) is None


def test_c6_width_two():
    td = exact_tree_decomposition(cycle(6), width_cap=2)
    assert td.width() == 2 and verify_tree_decomposition(cycle(6), td)


# frozen from the subset-DP oracle over elimination orders
FROZEN_TW = [
    (lambda: cycle(6), 2),
    (lambda: nx.convert_node_labels_to_integers(nx.grid_2d_graph(3, 3)), 3),
    (lambda: nx.complete_bipartite_graph(3, 3), 3),
    (lambda: nx.petersen_graph().subgraph(range(9)).copy(), 3),
    (lambda: random_graph(9, 0.4, 0), 2),
    (lambda: random_graph(9, 0.4, 1), 4),
    (lambda: random_graph(9, 0.4, 7), 4),
]


@pytest.mark.parametrize("make,tw", FROZEN_TW)
def test_frozen_treewidths(make, tw):
    g = make()
    assert treewidth(g) == tw
    assert treewidth_at_most(g, tw) and not treewidth_at_most(g, tw - 1)


@given(graphs(max_n=8))
def test_exact_matches_brute_force(g):
    td = exact_tree_decomposition(g)
    assert verify_tree_decomposition(g, td)
    assert td.width() == max(brute_treewidth(g), 0) or g.number_of_nodes() == 0


def test_exact_decomposition_valid_on_random_graphs():
    for s in range(100):
        g = random_graph(10, 0.3, s)
        assert verify_tree_decomposition(g, exact_tree_decomposition(g))


def test_solver_cap_is_a_hard_error():
    with pytest.raises(CapExceeded):
        exact_tree_decomposition(path(26))


def test_heuristic_decomposition_is_valid():
    g = random_graph(30, 0.1, 1)
    assert verify_tree_decomposition(g, heuristic_tree_decomposition(g))


def test_treewidth_of_disconnected_graph_is_max_over_components():
    g = nx.disjoint_union(complete(4), cycle(5))
    assert treewidth(g) == 3


# verification

def test_single_bag_is_valid():
    g = random_graph(7, 0.5, 3)
    assert verify_tree_decomposition(g, single_bag(g))


def test_missing_edge_coverage_detected():
    g = path(3)
    td = TreeDecomposition(RootedTree({0: None, 1: 0}, 0), {0: frozenset({0, 1}), 1: frozenset({2})})
    assert not verify_tree_decomposition(g, td)


def test_disconnected_trace_detected():
    g = make_graph(3)
    tree = RootedTree({0: None, 1: 0, 2: 1}, 0)
    td = TreeDecomposition(tree, {0: frozenset({0}), 1: frozenset({1}), 2: frozenset({0, 2})})
    assert not verify_tree_decomposition(g, td)


def test_text_round_trip():
    g = cycle(6)
    td = exact_tree_decomposition(g)
    back = parse_tree_decomposition(td.to_text())
    assert back.bags == td.bags and back.root == td.root
    with pytest.raises(ParseError):
        parse_tree_decomposition("s td 0 0 0\n")


# normal forms

def _star_decomposition():
    g = star(5)
    parent = {0: None, **{i: 0 for i in range(1, 6)}}
    bags = {0: frozenset({0}), **{i: frozenset({0, i}) for i in range(1, 6)}}
    return g, TreeDecomposition(RootedTree(parent, 0), bags)


def test_binary_form_of_star_shaped_tree():
    g, td = _star_decomposition()
    b = make_binary_rooted(td)
    assert verify_tree_decomposition(g, b)
    assert b.width() == td.width()
    assert max(len(c) for c in b.tree.children().values()) <= 2


def test_binary_form_keeps_path_shape():
    g = path(6)
    td = exact_tree_decomposition(g)
    b = make_binary_rooted(td)
    assert len(b.bags) == len(td.bags)


def test_nice_form_of_triangle_bag():
    n = make_nice(single_bag(complete(3)))
    assert is_nice(n) and verify_tree_decomposition(complete(3), n)
    assert n.width() == 2
    kinds = {len(c) for c in n.tree.children().values()}
    assert kinds <= {0, 1}  # a chain


def test_nice_form_of_empty_graph():
    n = make_nice(single_bag(make_graph(0)))
    assert all(not b for b in n.bags.values())


def test_nice_form_on_random_decompositions():
    for s in range(20):
        g = random_graph(9, 0.35, s)
        td = exact_tree_decomposition(g)
        n = make_nice(td)
        assert is_nice(n) and verify_tree_decomposition(g, n) and n.width() == td.width()


# LCA closures

def test_closure_of_single_node():
    t = RootedTree({0: None, 1: 0, 2: 1}, 0)
    assert lca_closure(t, [2]) == {2}


def test_closure_of_two_leaves_of_a_star():
    t = RootedTree({"r": None, "x": "r", "y": "r"}, "r")
    assert lca_closure(t, ["x", "y"]) == {"x", "y", "r"}


@given(st.integers(1, 80), st.integers(1, 10), st.integers(0, 10 ** 6))
def test_closure_properties(n, size, seed):
    rng = random.Random(seed)
    t = random_rooted_tree(rng, n)
    s = rng.sample(t.nodes, min(size, n))
    c = lca_closure(t, s)
    assert set(s) <= c
    assert len(c) <= 2 * len(s) - 1
    assert lca_closure(t, c) == c
    assert all(len(nb) <= 2 for _, nb in tree_components(t, c))


def test_closure_on_fifty_node_trees():
    rng = random.Random(5)
    for _ in range(50):
        t = random_rooted_tree(rng, 50)
        s = rng.sample(t.nodes, 6)
        c = lca_closure(t, s)
        assert len(c) <= 11 and all(len(nb) <= 2 for _, nb in tree_components(t, c))


# cliques

def test_cliques_of_edgeless_graph():
    g = make_graph(4)
    assert enumerate_cliques(g, single_bag(g)) == {frozenset({i}) for i in range(4)}


def test_cliques_of_triangle():
    assert len(enumerate_cliques(complete(3), single_bag(complete(3)))) == 7


def test_cliques_match_subset_enumeration():
    rng = random.Random(1)
    for _ in range(5):
        g = random_low_tw_graph(rng, 15, 2, 0.3)
        assert enumerate_cliques(g, exact_tree_decomposition(g)) == brute_cliques(g)


@given(graphs(max_n=8))
def test_cliques_property(g):
    assert enumerate_cliques(g, exact_tree_decomposition(g)) == brute_cliques(g)
