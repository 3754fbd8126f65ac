import json
import random

import networkx as nx
import pytest
from hypothesis import given, strategies as st

from lossykernel.errors import InvalidInput
from lossykernel.graph import complete, delete, path
from lossykernel.harness import random_low_tw_graph
from lossykernel.minors import is_minor
from lossykernel.protrusion import (MinorPacking, ProtrusionDecomposition, decomposition_from_cover, from_json,
                                    make_nice_decomposition, neighborhood, packing_problems, pattern_code,
                                    product_with_packing, to_dot, to_json, trivial_decomposition, validate)
from lossykernel.solvers import FDeletion, greedy_solution
from lossykernel.treewidth import exact_tree_decomposition

K2 = pattern_code(path(2))


def cover_decomposition(g, s=None):
    if s is None:
        s = greedy_solution(FDeletion([complete(3)], None), g)
    return decomposition_from_cover(g, s, exact_tree_decomposition(g, caps=None))


def random_case(seed, n=(4, 16)):
    rng = random.Random(seed)
    g = random_low_tw_graph(rng, rng.randint(*n), 3)
    s = set(rng.sample(sorted(g.nodes()), rng.randint(1, 3)))
    return rng, g, s


# validation

def test_trivial_decomposition_is_valid():
    g = path(5)
    d = trivial_decomposition(g)
    assert d.alpha == 5 and d.beta == 0 and validate(g, d) == []


def test_part_with_outside_neighbour_is_reported():
    g = path(4)
    d = ProtrusionDecomposition({0, 1}, (frozenset({2}), frozenset({3})), 2, 2)
    assert any("outside the root bag" in p for p in validate(g, d))


def test_overlap_and_coverage_reported():
    g = path(3)
    d = ProtrusionDecomposition({0, 1}, (frozenset({1}),), 2, 2)
    probs = validate(g, d)
    assert any("overlaps" in p for p in probs) and any("uncovered" in p for p in probs)


def test_generated_decompositions_are_valid():
    for seed in range(200):
        _, g, s = random_case(seed)
        d = cover_decomposition(g, s)
        assert validate(g, d, caps=None) == []


# nice form

def test_nice_input_unchanged():
    g = path(5)
    d = ProtrusionDecomposition({2}, (frozenset({0, 1}), frozenset({3, 4})), 2, 2, True)
    assert make_nice_decomposition(g, d) == d


def test_root_vertex_migrates_into_part():
    # 0 sits in the root bag but all its neighbours lie in N[P1] = {1, 2, 3}
    g = nx.Graph([(0, 1), (1, 2), (2, 3), (0, 3), (3, 4)])
    d = ProtrusionDecomposition({0, 3, 4}, (frozenset({1, 2}),), 3, 3)
    n = make_nice_decomposition(g, d)
    assert 0 in n.part(1) and 0 not in n.root_bag
    assert validate(g, n) == []


def test_nice_form_is_idempotent_and_valid():
    for seed in range(100):
        _, g, s = random_case(seed)
        d = cover_decomposition(g, s)
        n = make_nice_decomposition(g, d)
        assert validate(g, n, caps=None) == []
        assert all(d.part(i) <= n.part(i) for i in d.indices())
        assert make_nice_decomposition(g, n) == n


# cover construction

def test_empty_cover_convention():
    g = path(6)
    d = decomposition_from_cover(g, set(), exact_tree_decomposition(g))
    assert d.root_bag == frozenset() and d.parts == (frozenset(g.nodes()),)
    assert validate(g, d) == []


def test_path_with_middle_vertex():
    g = path(10)
    d = decomposition_from_cover(g, {5}, exact_tree_decomposition(g))
    assert 5 in d.root_bag and len(d.root_bag) <= 4 and d.ell <= 4
    assert validate(g, d) == []


def test_cover_bounds_on_random_graphs():
    for seed in range(100):
        _, g, s = random_case(seed)
        td = exact_tree_decomposition(g, caps=None)
        d = decomposition_from_cover(g, s, td)
        b = max(td.width(), 1) + 1
        assert s <= d.root_bag
        assert len(d.root_bag) <= 2 * b * len(s) and d.ell <= 2 * b * len(s)
        assert all(len(neighborhood(g, d.part(i))) <= 2 * b for i in d.indices())
        assert validate(g, d, caps=None) == []


def test_cover_rejects_bad_input():
    g = path(4)
    with pytest.raises(InvalidInput):
        decomposition_from_cover(g, {9}, exact_tree_decomposition(g))
    with pytest.raises(InvalidInput):
        decomposition_from_cover(g, {0}, exact_tree_decomposition(path(3)))


# product refinement

def _edge_packing(g, inner, c):
    """Assign the first c parts holding an edge to K2."""
    idx = [i for i in inner.indices() if g.subgraph(inner.part(i)).number_of_edges()][:c]
    return MinorPacking({K2: frozenset(idx)}, len(idx))


def test_product_with_trivial_outer_and_empty_inner():
    g = path(5)
    outer = trivial_decomposition(g)
    inner = ProtrusionDecomposition(frozenset(), (), 0, 0, True)
    d = product_with_packing(g, outer, inner)
    assert d.root_bag == outer.root_bag and d.parts == ()


def test_product_with_empty_inner_root_keeps_multiplicity():
    g = nx.disjoint_union_all([path(3)] * 3)
    outer = ProtrusionDecomposition(frozenset(), (frozenset(g.nodes()),), 1, 2, True)
    inner = ProtrusionDecomposition(frozenset(), tuple(frozenset(range(3 * i, 3 * i + 3)) for i in range(3)), 3, 2, True)
    pk = MinorPacking({K2: {1, 2}}, 2)
    d = product_with_packing(g, outer, inner, pk)
    assert d.packing.c == 2 and len(d.packing.assignment[K2]) == 2
    assert packing_problems(g, d) == []


def test_product_on_random_pairs():
    for seed in range(30):
        rng, g, s = random_case(seed, (8, 16))
        outer = cover_decomposition(g, s)
        rest = delete(g, outer.root_bag)
        if rest.number_of_nodes() == 0:
            continue
        s2 = set(rng.sample(sorted(rest.nodes()), 1))
        inner = decomposition_from_cover(rest, s2, exact_tree_decomposition(rest, caps=None))
        pk = _edge_packing(rest, inner, 2)
        d = product_with_packing(g, outer, inner, pk)
        assert validate(g, d, caps=None) == []
        assert len(d.packing.assignment.get(K2, ())) == pk.c


# export

def test_json_round_trip():
    for seed in range(20):
        _, g, s = random_case(seed)
        d = cover_decomposition(g, s)
        assert from_json(json.loads(json.dumps(to_json(d)))) == d


def test_json_schema_mismatch():
    with pytest.raises(InvalidInput):
        from_json({"parts": []})


def test_dot_clusters():
    g = path(3)
    assert to_dot(g, trivial_decomposition(g)).count("subgraph cluster_") == 1
    d = ProtrusionDecomposition({0}, tuple(frozenset({i}) for i in range(1, 6)), 5, 1)
    assert to_dot(nx.star_graph(5), d).count("subgraph cluster_") == 6
