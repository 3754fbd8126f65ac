from itertools import permutations

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from lossykernel.errors import CapExceeded, InvalidInput, ParseError
from lossykernel.graph import (BoundariedGraph, are_isomorphic, canonical_form, canonical_graph, complete,
                               connected_catalog, cycle, format_graph, glue, graph_from_code, graphs_on,
                               make_graph, parse_family, parse_graph, path, random_graph, star)

from oracles import brute_isomorphic
from strategies import boundaried_pairs, graphs


def edge_set(g):
    return {frozenset(e) for e in g.edges()}


# glue

def test_glue_single_boundary_vertex_with_edge():
    h1 = BoundariedGraph(make_graph([0]), (0,))
    h2 = BoundariedGraph(make_graph([10, 11], [(10, 11)]), (10,))
    g = glue(h1, h2)
    assert g.number_of_nodes() == 2 and g.number_of_edges() == 1


def test_glue_empty_boundary_is_disjoint_union():
    g = glue(BoundariedGraph(complete(3)), BoundariedGraph(complete(3)))
    assert g.number_of_nodes() == 6
    assert sorted(len(c) for c in nx.connected_components(g)) == [3, 3]


def test_glue_path_with_edge_closes_triangle():
    a, b, c = 0, 1, 2
    h1 = BoundariedGraph(make_graph([a, b, c], [(a, b), (b, c)]), (a, c))
    h2 = BoundariedGraph(make_graph([7, 8], [(7, 8)]), (7, 8))
    g = glue(h1, h2)
    assert edge_set(g) == {frozenset(e) for e in [(a, b), (b, c), (a, c)]}


def test_glue_collapses_parallel_edges():
    h = BoundariedGraph(make_graph([0, 1], [(0, 1)]), (0, 1))
    assert glue(h, h).number_of_edges() == 1


def test_glue_rejects_mismatched_boundaries():
    with pytest.raises(InvalidInput):
        glue(BoundariedGraph(path(2), (0,)), BoundariedGraph(path(2), (0, 1)))


@given(boundaried_pairs())
def test_glue_commutes_up_to_isomorphism(pair):
    a, b = pair
    assert canonical_form(glue(a, b)) == canonical_form(glue(b, a))


@given(boundaried_pairs())
def test_glue_vertex_count(pair):
    a, b = pair
    assert glue(a, b).number_of_nodes() == a.n() + b.n() - a.t


# isomorphism and canonical forms

def test_isomorphic_relabelled_cycle():
    c = cycle(4)
    assert are_isomorphic(c, nx.relabel_nodes(c, {0: 2, 1: 0, 2: 3, 3: 1}))


def test_path_and_star_not_isomorphic():
    assert not are_isomorphic(path(4), star(3))


def test_k4_minus_edge_is_c4_plus_chord():
    a = complete(4)
    a.remove_edge(0, 1)
    b = cycle(4)
    b.add_edge(0, 2)
    assert are_isomorphic(a, b) and brute_isomorphic(a, b)


def test_empty_graph_code_is_fixed():
    assert canonical_form(make_graph(0)) == canonical_form(nx.Graph())


def test_triangle_code_invariant_under_relabelling():
    codes = {canonical_form(nx.relabel_nodes(complete(3), dict(zip(range(3), p)))) for p in permutations([5, 7, 9])}
    assert len(codes) == 1


def test_eleven_graphs_on_four_vertices():
    # frozen from brute-force isomorphism classes of all 64 labelled 4-vertex graphs
    assert len(graphs_on(4)) == 11


def test_connected_catalog_counts():
    # connected graphs on 1..5 vertices: 1, 1, 2, 6, 21
    assert len(connected_catalog(5)) == 31


def test_canonical_form_matches_brute_force_on_five_vertices():
    gs = [graph_from_code(c) for c in graphs_on(5)]
    assert len(gs) == 34
    for i, a in enumerate(gs):
        for b in gs[i + 1:i + 4]:
            assert not brute_isomorphic(a, b)


@given(graphs(max_n=5), graphs(max_n=5))
def test_codes_equal_iff_isomorphic(a, b):
    assert (canonical_form(a) == canonical_form(b)) == brute_isomorphic(a, b)


@given(graphs(max_n=6), st.randoms())
def test_canonical_form_invariant(g, rnd):
    perm = list(g.nodes())
    rnd.shuffle(perm)
    h = nx.relabel_nodes(g, dict(zip(g.nodes(), perm)))
    assert canonical_form(g) == canonical_form(h)
    assert are_isomorphic(canonical_graph(g), g)


def test_boundaried_code_respects_labels():
    p = path(3)
    assert canonical_form(BoundariedGraph(p, (0, 1))) != canonical_form(BoundariedGraph(p, (0, 2)))
    assert canonical_form(BoundariedGraph(p, (0, 1))) == canonical_form(BoundariedGraph(p, (2, 1)))


def test_code_round_trip():
    for code in graphs_on(5):
        assert canonical_form(graph_from_code(code)) == code


def test_iso_cap():
    with pytest.raises(CapExceeded):
        canonical_form(path(11))
    assert canonical_form(path(11), cap=None)


# random graphs

def test_random_graph_extremes_and_determinism():
    assert random_graph(5, 0.0, 3).number_of_edges() == 0
    assert are_isomorphic(random_graph(5, 1.0, 3), complete(5))
    assert edge_set(random_graph(8, 0.5, 42)) == edge_set(random_graph(8, 0.5, 42))
    with pytest.raises(InvalidInput):
        random_graph(3, 1.5, 0)


# text format

def test_parse_round_trip():
    text = "p 4 3\ne 0 1\ne 1 2\ne 2 3\nb 0 3\n"
    h = parse_graph(text)
    assert isinstance(h, BoundariedGraph) and h.boundary == (0, 3)
    assert format_graph(h) == text


@pytest.mark.parametrize("text", [
    "e 0 1\n",                     # no header
    "p 2 1\ne 0 5\n",              # out of range
    "p 2 2\ne 0 1\ne 1 0\n",       # parallel edge
    "p 2 1\ne 1 1\n",              # self-loop
    "p 2 2\ne 0 1\n",              # edge count mismatch
    "p 2 x\n",                     # not an integer
    "q 1 1\n",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_graph(text)


def test_parse_family():
    fam = parse_family("p 3 3\ne 0 1\ne 1 2\ne 0 2\n---\np 2 1\ne 0 1\n")
    assert [f.number_of_nodes() for f in fam] == [3, 2]
    with pytest.raises(ParseError):
        parse_family("\n")
