import json
import os
import random

import networkx as nx
import pytest

from lossykernel.config import DEFAULT_CAPS
from lossykernel.errors import CapExceeded, InvalidInput, LiftError
from lossykernel.graph import BoundariedGraph, canonical_form, complete, disjoint_union, glue_with_map, make_graph, path
from lossykernel.harness import check_replacer, gen_replacer
from lossykernel.minors import compute_h_folio
from lossykernel.replacer import (EncoderSpace, ReplacerSkip, clear_memory_cache, equivalent, find_representative,
                                  label_partitions, lift_through_replacement, realized, replace_protrusion,
                                  signature_of)
from lossykernel.solvers import FDeletion, capped_optimum

K3 = [complete(3)]


def pendant_path(length):
    """Boundary vertex 0 with a path of `length` further vertices hanging off it."""
    return BoundariedGraph(path(length + 1), (0,))


def pendant_triangle():
    return BoundariedGraph(nx.Graph([(0, 1), (1, 2), (2, 3), (3, 1)]), (0,))


@pytest.fixture(autouse=True)
def no_disk_cache(monkeypatch):
    monkeypatch.delenv("LKL_CACHE_DIR", raising=False)


# query spaces

def test_label_partitions():
    assert len(label_partitions(1)) == 2  # {} and {{1}}
    assert len(label_partitions(2)) == 5


def test_query_space_sizes():
    k3k2 = [disjoint_union(complete(3), path(2))]
    sizes = [len(EncoderSpace.for_family(f, r, 1).queries) for f in (K3, k3k2) for r in (1, 2)]
    assert sizes == [3, 14, 10, 46]


def test_space_caps():
    with pytest.raises(ReplacerSkip):
        EncoderSpace.for_family(K3, 3, 1)
    with pytest.raises(ReplacerSkip):
        EncoderSpace.for_family(K3, 1, 4)


# signatures

def test_isolated_boundary_vertex():
    sp = EncoderSpace.for_family(K3, 1, 0, 3)
    sig = signature_of(BoundariedGraph(make_graph([0]), (0,)), sp)
    assert sig.folio == frozenset()  # the interior is empty
    assert set(sig.f_map.values()) == {0}
    assert len(realized(BoundariedGraph(make_graph([0]), (0,)), set(), sp)) == 1


def test_pendant_triangle_signature():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    h = pendant_triangle()
    sig = signature_of(h, sp)
    assert canonical_form(complete(3)) in sig.folio
    whole = realized(h, set(), sp)
    for v in (1, 2, 3):
        assert len(realized(h, {v}, sp)) < len(whole)  # one deletion kills the triangle witness
    assert signature_of(pendant_triangle(), sp) == sig


def test_equivalence_examples():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    assert equivalent(pendant_path(5), pendant_path(5), sp)
    assert equivalent(pendant_path(5), pendant_path(6), sp)
    assert not equivalent(pendant_triangle(), pendant_path(4), sp)


def test_equivalence_is_an_equivalence():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    rng = random.Random(4)
    hs = []
    for _ in range(12):
        g = nx.gnp_random_graph(rng.randint(2, 6), 0.45, seed=rng.randrange(10 ** 6))
        hs.append(BoundariedGraph(g, (0,)))
    for a in hs:
        assert equivalent(a, a, sp)
        for b in hs:
            assert equivalent(a, b, sp) == equivalent(b, a, sp)
            for c in hs:
                if equivalent(a, b, sp) and equivalent(b, c, sp):
                    assert equivalent(a, c, sp)


def test_boundary_size_mismatch():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    with pytest.raises(InvalidInput):
        equivalent(pendant_path(2), BoundariedGraph(path(3), (0, 1)), sp)


# representatives

def test_minimal_graph_is_its_own_representative():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    h = BoundariedGraph(make_graph([0]), (0,))
    assert find_representative(h, sp).n() == 1


def test_pendant_p6_representative():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    h = pendant_path(6)
    rep = find_representative(h, sp)
    # boundary plus a P3: the folio of the interior still needs P3
    assert rep.n() == 4 and equivalent(h, rep, sp)


def test_isomorphic_inputs_share_a_representative():
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    a = pendant_path(6)
    b = BoundariedGraph(nx.relabel_nodes(a.graph, {i: 20 - i for i in range(7)}), (20,))
    assert canonical_form(find_representative(a, sp)) == canonical_form(find_representative(b, sp))


def test_candidate_cap_falls_back_to_identity():
    caps = DEFAULT_CAPS.with_(candidates=1)
    sp = EncoderSpace.for_family(K3, 1, 1, 3, caps=caps)
    h = pendant_path(6)
    assert find_representative(h, sp).n() == h.n()


def test_strict_caps_raise_instead_of_falling_back():
    caps = DEFAULT_CAPS.with_(candidates=1, identity_fallback=False)
    sp = EncoderSpace.for_family(K3, 1, 1, 3, caps=caps)
    with pytest.raises(CapExceeded):
        find_representative(pendant_path(6), sp)


def test_representative_cache_on_disk(tmp_path, monkeypatch):
    monkeypatch.setenv("LKL_CACHE_DIR", str(tmp_path))
    clear_memory_cache()
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    first = find_representative(pendant_path(7), sp)
    data = json.loads((tmp_path / "representatives.json").read_text())
    assert data
    clear_memory_cache()
    again = find_representative(pendant_path(7), sp)
    assert canonical_form(first) == canonical_form(again)


# replacement

def host_with_pendant_path(length):
    g = complete(4)
    nx.add_path(g, [0] + list(range(4, 4 + length)))
    return g, set(range(4, 4 + length)) | {0}


def test_small_protrusion_is_identity():
    g, x = host_with_pendant_path(1)
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    g2, handle = replace_protrusion(g, x, sp, boundary=(0,))
    assert handle.is_identity() and g2 is g


def test_pendant_p10_shrinks_and_keeps_optimum():
    g, x = host_with_pendant_path(10)
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    g2, handle = replace_protrusion(g, x, sp, boundary=(0,))
    assert g2.number_of_nodes() < g.number_of_nodes()
    p = FDeletion(K3, None)
    assert len(p.solve(g, 10)) == len(p.solve(g2, 10)) == 2
    a = compute_h_folio(handle.original.interior(), 3, caps=None).members
    assert a == compute_h_folio(handle.replacement.interior(), 3, caps=None).members


def test_replace_rejects_bad_boundary():
    g, x = host_with_pendant_path(4)
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    with pytest.raises(InvalidInput):
        replace_protrusion(g, x, sp, boundary=(4,))
    with pytest.raises(InvalidInput):
        replace_protrusion(g, x | {1}, sp)


def test_random_composed_graphs():
    for seed in range(30):
        assert check_replacer(gen_replacer(seed)) == [], seed


def test_sub_protrusion_swap_keeps_outer_signature():
    sp_in = EncoderSpace.for_family(K3, 1, 1, 3)
    sp_out = EncoderSpace.for_family(K3, 1, 1, 3)
    # outer boundary 0, a triangle 0-1-2, and a long pendant path hanging off 2
    g = nx.Graph([(0, 1), (1, 2), (2, 0)])
    nx.add_path(g, [2] + list(range(3, 10)))
    g2, handle = replace_protrusion(g, set(range(2, 10)), sp_in, boundary=(2,))
    assert not handle.is_identity()
    assert signature_of(BoundariedGraph(g, (0,)), sp_out) == signature_of(BoundariedGraph(g2, (0,)), sp_out)


# lifting

def _triangle_behind_path():
    """Host K4 on 0..3, then 0-4-5-6 with a triangle 6-7-8 and a tail 8-9-10."""
    g = complete(4)
    nx.add_path(g, [0, 4, 5, 6, 7, 8, 9, 10])
    g.add_edge(6, 8)
    return g, set(range(4, 11)) | {0}


def test_lift_of_solution_missing_the_standin():
    g, x = host_with_pendant_path(10)
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    g2, handle = replace_protrusion(g, x, sp, boundary=(0,))
    assert lift_through_replacement(handle, {1, 2}) == frozenset({1, 2})


def test_lift_maps_killer_vertex():
    g, x = _triangle_behind_path()
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    g2, handle = replace_protrusion(g, x, sp, boundary=(0,))
    assert not handle.is_identity()
    new = set(g2.nodes()) - set(g.nodes())
    p = FDeletion(K3, None)
    s2 = p.solve(g2, 5)
    assert s2 & new
    s = lift_through_replacement(handle, s2)
    assert p.is_solution(g, s) and len(s) == len(s2)
    assert (s - s2) <= x


def test_lift_rejects_infeasible_and_over_budget():
    g, x = _triangle_behind_path()
    sp = EncoderSpace.for_family(K3, 1, 1, 3)
    g2, handle = replace_protrusion(g, x, sp, boundary=(0,))
    with pytest.raises(LiftError):
        lift_through_replacement(handle, set())
    new = sorted(set(g2.nodes()) - set(g.nodes()))
    with pytest.raises(LiftError):
        lift_through_replacement(handle, {1, 2} | set(new[:2]))
