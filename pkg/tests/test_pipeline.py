import itertools
from dataclasses import replace
from fractions import Fraction

import networkx as nx
import pytest

from lossykernel.errors import ConfigError, InvalidInput
from lossykernel.graph import complete, disjoint_union, make_graph, path
from lossykernel.harness import audit_kernel, audit_protocol, random_instance
from lossykernel.lifting import LiftChain
from lossykernel.pipeline import (NearProtrusion, NoInstance, PipelineConfig, apply_lrr1, apply_lrr2,
                                  apply_lrr3, build_flow_graph, build_near_protrusion, check_partition,
                                  classify_parts, group_components, lrr1_threshold, neighbourhood_bound,
                                  non_edge_witness, partition_root_bag, rounds_for,
                                  validate_near_protrusion)
from lossykernel.protrusion import neighborhood, validate
from lossykernel.solvers import FDeletion, TwDeletion, capped_optimum, make_oracle, max_internally_disjoint_paths

K3 = [complete(3)]


def cfg_k3(**kw):
    return PipelineConfig(**{"family": K3, "eta": 1, **kw})


def k2m(m):
    """u=0, v=1 joined through m middle vertices."""
    g = make_graph(m + 2)
    for i in range(2, m + 2):
        g.add_edges_from([(0, i), (1, i)])
    return g


def pendant_k4():
    g = complete(4)
    g.add_edges_from([(3, 4), (4, 5), (5, 6)])
    return g


# parameters

def test_rounds_and_threshold():
    assert rounds_for(1) == 1
    assert rounds_for(Fraction(1, 2)) == 3
    assert lrr1_threshold(1, 1) == 4
    assert lrr1_threshold(Fraction(1, 2), 1) == 6


@pytest.mark.parametrize("kw", [dict(epsilon=0), dict(eta=0), dict(beta_oracle=Fraction(1, 2)),
                                dict(mode="vc")])
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        cfg_k3(**kw)


def test_config_needs_planar_family():
    with pytest.raises(ConfigError):
        PipelineConfig(family=[], eta=1)
    with pytest.raises(ConfigError):
        PipelineConfig(family=[complete(5)], eta=1)


def test_describe_has_rounds():
    assert cfg_k3(epsilon=Fraction(1, 2)).describe()["r"] == 3


# near protrusion

def test_minor_free_input_has_empty_near_protrusion():
    np_ = build_near_protrusion(path(8), 2, cfg_k3())
    assert np_.x == frozenset() and np_.z == frozenset()


def test_pendant_k4_solution():
    g = pendant_k4()
    np_ = build_near_protrusion(g, 2, cfg_k3())
    assert len(np_.x) == 2
    assert validate_near_protrusion(g, 2, cfg_k3(), np_) == []


def test_no_instance():
    g = disjoint_union(*[complete(3)] * 3)
    with pytest.raises(NoInstance):
        build_near_protrusion(g, 1, cfg_k3())


def test_eta_too_small_for_family():
    # K4-minor-free graphs can have treewidth 2
    cfg = PipelineConfig(family=[complete(4)], eta=1)
    with pytest.raises(ConfigError):
        build_near_protrusion(nx.cycle_graph(5), 1, cfg)


def _instances(count, n_max=14):
    for seed in range(count):
        g, k = random_instance(seed, n_max=n_max, family=K3)
        try:
            yield g, k, build_near_protrusion(g, k, cfg_k3())
        except NoInstance:
            continue


def test_near_protrusion_valid_on_random_instances():
    seen = 0
    for g, k, np_ in _instances(100):
        assert validate_near_protrusion(g, k, cfg_k3(), np_) == []
        seen += 1
    assert seen > 50


def test_residual_x_neighbours_bounded_for_every_small_solution():
    problem = FDeletion(K3, None)
    for g, k, np_ in _instances(40, n_max=10):
        comps = list(nx.connected_components(g.subgraph(set(g) - np_.x - np_.z)))
        for size in range(k + 1):
            for s in itertools.combinations(sorted(g), size):
                if problem.is_solution(g, s):
                    for c in comps:
                        assert len((neighborhood(g, c) & np_.x) - set(s)) <= 2


def test_validator_rejects_non_solution():
    g = pendant_k4()
    bad = NearProtrusion({0}, set())
    assert any("not a solution" in p for p in validate_near_protrusion(g, 2, cfg_k3(), bad))


# first rule

def star_case():
    g = make_graph(5, [(0, i) for i in range(1, 5)])
    return g, NearProtrusion({1, 2, 3, 4}, set())


def test_lrr1_deletes_crowded_neighbourhood():
    g, np_ = star_case()
    chain = LiftChain()
    g2, k2, np2, fired = apply_lrr1(g, 5, np_, cfg_k3(), chain)
    assert fired == [[1, 2, 3, 4]]
    assert k2 == 1 and set(g2) == {0}
    assert np2.x == frozenset()
    assert chain.lift(set()) == {1, 2, 3, 4}
    assert chain.ratio_bound() == 2


def test_lrr1_identity_below_threshold():
    g, np_ = star_case()
    g2, k2, _, fired = apply_lrr1(g, 5, np_, cfg_k3(epsilon=Fraction(1, 2)), LiftChain())
    assert fired == [] and k2 == 5 and set(g2) == set(g)


def test_lrr1_post_state_bound():
    cfg = cfg_k3()
    t = lrr1_threshold(cfg.epsilon, cfg.eta)
    for g, k, np_ in _instances(60):
        g2, k2, np2, fired = apply_lrr1(g, k, np_, cfg, LiftChain())
        assert k2 == k - sum(len(f) for f in fired)
        for c in nx.connected_components(g2.subgraph(set(g2) - np2.x - np2.z)):
            assert len(neighborhood(g2, c) & np2.x) < t
            assert len(neighborhood(g2, c)) <= neighbourhood_bound(cfg)


# grouping and the flow graph

def test_components_with_same_neighbourhood_merge():
    g = make_graph(5, [(0, 2), (1, 2), (0, 3), (1, 3), (0, 4)])
    d = group_components(g, {0, 1}, cfg_k3())
    assert d.parts == (frozenset({2, 3}), frozenset({4}))
    assert validate(g, d, check_packing=False) == []


def test_group_rejects_wide_neighbourhood():
    g = make_graph(12, [(0, i) for i in range(1, 12)])
    with pytest.raises(InvalidInput):
        group_components(g, set(range(1, 12)), cfg_k3())


def test_flow_on_clique_adds_nothing():
    g = complete(5)
    assert nx.utils.edges_equal(build_flow_graph(g, set(g), 3, 1).edges(), g.edges())


def test_flow_adds_well_connected_pair():
    assert build_flow_graph(k2m(3), {0, 1}, 0, 1).has_edge(0, 1)
    assert not build_flow_graph(k2m(2), {0, 1}, 0, 1).has_edge(0, 1)
    assert not build_flow_graph(k2m(3), {0, 1}, 1, 1).has_edge(0, 1)


def test_flow_only_inside_root():
    assert not build_flow_graph(k2m(5), {0, 2}, 0, 1).has_edge(0, 1)


@pytest.mark.parametrize("use_all", [False, True])
def test_flow_preserves_capped_tw_deletion(use_all):
    tw = TwDeletion(1, None)
    for g, k, np_ in _instances(40):
        p0 = set(g) if use_all else np_.x | np_.z
        flow = build_flow_graph(g, p0, k, 1)
        assert capped_optimum(tw, g, k) == capped_optimum(tw, flow, k)


def test_classify_and_witness():
    g = k2m(2)
    d = group_components(g, {0, 1}, cfg_k3())
    simp, non = classify_parts(build_flow_graph(g, {0, 1}, 0, 1), d)
    assert simp == [] and non == [1]
    u, v = non_edge_witness(g, d, 1)
    assert max_internally_disjoint_paths(g, u, v) <= 0 + 1 + 1

    g = k2m(3)
    d = group_components(g, {0, 1}, cfg_k3())
    flow = build_flow_graph(g, {0, 1}, 0, 1)
    assert classify_parts(flow, d) == ([1], [])
    assert non_edge_witness(flow, d, 1) is None


def test_classify_witness_on_random_instances():
    for g, k, np_ in _instances(40):
        p0 = np_.x | np_.z
        d = group_components(g, p0, cfg_k3())
        flow = build_flow_graph(g, p0, k, 1)
        _, non = classify_parts(flow, d)
        for i in non:
            u, v = non_edge_witness(flow, d, i)
            assert max_internally_disjoint_paths(g, u, v) <= k + 2


# second rule

def test_lrr2_drops_simplicial_part_and_lifts():
    g = k2m(3)
    cfg = cfg_k3()
    d = group_components(g, {0, 1}, cfg)
    flow = build_flow_graph(g, {0, 1}, 0, 1)
    chain = LiftChain()
    g2, k2, d2, simp, non = apply_lrr2(g, 1, d, flow, cfg, chain)
    assert set(g2) == {0, 1} and g2.has_edge(0, 1)
    assert d2.parts == ()
    lifted = chain.lift(set())
    assert FDeletion(K3, None).is_solution(g, lifted) and len(lifted) == 1


def test_lrr2_without_simplicial_parts_only_switches_graph():
    g = k2m(2)
    cfg = cfg_k3()
    d = group_components(g, {0, 1}, cfg)
    g2, _, d2, simp, non = apply_lrr2(g, 1, d, build_flow_graph(g, {0, 1}, 1, 1), cfg, LiftChain())
    assert simp == [] and set(g2) == set(g) and d2.parts == d.parts


# root bag partition

def tw_oracle():
    return make_oracle(TwDeletion(1, None), capacity=40)


def test_partition_of_low_treewidth_root():
    fp0 = path(6)
    parts, tr = partition_root_bag(fp0, 2, cfg_k3(epsilon=Fraction(1, 2)), tw_oracle())
    assert len(tr["rounds"]) == 2 and tr["case"] == "short"
    assert parts[0] == frozenset() and parts[1] == frozenset(fp0)
    assert check_partition(fp0, parts, 1) == []


def test_partition_single_round_at_eps_one():
    fp0 = path(6)
    parts, tr = partition_root_bag(fp0, 2, cfg_k3(), tw_oracle())
    assert len(tr["rounds"]) == 1 and parts == [frozenset(), frozenset(fp0)]


def test_partition_of_empty_root():
    oracle = tw_oracle()
    parts, tr = partition_root_bag(make_graph(0), 0, cfg_k3(), oracle)
    assert oracle.calls == 0 and all(not q for q in parts)


def test_partition_random_roots():
    cfg = cfg_k3(epsilon=Fraction(1, 2))
    for g, k, np_ in _instances(40):
        p0 = np_.x | np_.z
        fp0 = build_flow_graph(g, p0, k, 1).subgraph(p0).copy()
        oracle = tw_oracle()
        parts, tr = partition_root_bag(fp0, k, cfg, oracle)
        assert oracle.calls <= cfg.r
        assert check_partition(fp0, parts, 1) == []


def test_check_partition_flags_problems():
    g = complete(4)
    assert check_partition(g, [frozenset(), frozenset(g)], 1) == ["piece 1 has treewidth above 1"]
    assert "pieces do not cover P0" in check_partition(g, [frozenset({0})], 1)


# third rule

def test_lrr3():
    chain = LiftChain()
    g2, k2 = apply_lrr3(complete(5), 4, [frozenset({0, 1, 2}), frozenset({3, 4})], chain, cfg_k3())
    assert k2 == 1 and set(g2) == {3, 4}
    assert chain.lift({3}) == {0, 1, 2, 3}
    assert chain.ratio_bound() == 2


def test_lrr3_identity():
    g2, k2 = apply_lrr3(complete(3), 2, [frozenset(), frozenset({0, 1, 2})], LiftChain(), cfg_k3())
    assert k2 == 2 and g2.number_of_nodes() == 3


# drivers

def test_forest_input():
    _, rep = audit_kernel(path(7), 2, cfg_k3())
    assert rep["lifted_solution"] == [] and rep["capped_ratio"] == "1"
    _, rep = audit_protocol(path(7), 2, cfg_k3())
    assert rep["lifted_solution"] == [] and rep["rounds"] == 1


def test_no_instance_still_feasible():
    g = disjoint_union(*[complete(3)] * 3)
    _, rep = audit_kernel(g, 1, cfg_k3())
    assert rep["feasible"] and rep["capped_ratio"] == "1"


def test_report_fields():
    g, k = random_instance(3, family=K3)
    _, rep = audit_kernel(g, k, cfg_k3())
    for key in ("schema", "config", "stages", "oracle_transcript", "rules", "lift_steps",
                "ratio_bound", "lifted_solution", "feasible", "kernel_size", "rounds"):
        assert key in rep
    assert rep["rounds"] == 1


@pytest.mark.parametrize("beta,eps,bound", [(1, 1, 2), (2, 1, 4), (1, Fraction(1, 2), Fraction(3, 2))])
def test_random_ratios(beta, eps, bound):
    cfg = cfg_k3(epsilon=eps)
    for seed in range(15):
        g, k = random_instance(seed, n_max=14, family=K3)
        _, rep = audit_kernel(g, k, cfg, beta=beta, padding_seed=seed)
        assert rep["ok"] and Fraction(rep["capped_ratio"]) <= 2 * beta
        _, rep = audit_protocol(g, k, cfg, beta=beta, padding_seed=seed)
        assert rep["ok"] and Fraction(rep["capped_ratio"]) <= (1 + Fraction(eps)) * beta
        assert rep["rounds"] <= 1 + rounds_for(eps)


def test_tweta_mode():
    cfg = PipelineConfig(eta=1, mode="tweta")
    g = pendant_k4()
    _, rep = audit_kernel(g, 2, cfg)
    assert rep["ok"] and rep["capped_ratio"] == "1"


def test_negative_k():
    with pytest.raises(InvalidInput):
        audit_kernel(path(3), -1, cfg_k3())
