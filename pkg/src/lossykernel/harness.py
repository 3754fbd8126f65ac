"""Random instances, property suites and ratio audits shared by the CLI and the tests."""
from dataclasses import dataclass, replace
from fractions import Fraction
import hashlib
import json
import random

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import InvalidInput
from .graph import (BoundariedGraph, complete, connected_catalog, delete, format_graph,
                    glue_with_map, graph_from_code, make_graph, random_graph)
from .minors import is_minor_free
from .solvers import FDeletion, TwDeletion, capped_optimum, greedy_solution, make_oracle
from .treewidth import RootedTree, exact_tree_decomposition, treewidth, treewidth_at_most


def planted_instance(rng, n, family, eta, planted, attach=(2, 4), extra_edges=None):
    """F-minor-free base with treewidth <= eta plus `planted` vertices wired into it.

    The planted vertices form a solution, so opt <= planted.  Base edges are
    added at random while the base stays free of every family member.
    """
    base_n = n - planted
    if base_n < 1:
        raise InvalidInput("n must exceed the planted count")
    g = make_graph(base_n)
    order = list(range(base_n))
    rng.shuffle(order)
    for i in range(1, base_n):
        u, v = order[i], order[rng.randrange(i)]
        g.add_edge(u, v)
        if not _ok(g, family, eta):
            g.remove_edge(u, v)
    tries = base_n if extra_edges is None else extra_edges
    for _ in range(tries):
        u, v = rng.sample(range(base_n), 2) if base_n > 1 else (0, 0)
        if u == v or g.has_edge(u, v):
            continue
        g.add_edge(u, v)
        if not _ok(g, family, eta):
            g.remove_edge(u, v)
    for p in range(base_n, n):
        g.add_node(p)
        lo, hi = attach
        for u in rng.sample(range(p), min(p, rng.randint(lo, hi))):
            g.add_edge(p, u)
    return g


def _ok(g, family, eta):
    if family:
        return is_minor_free(g, family, caps=None)
    return treewidth_at_most(g, eta, caps=None)


def random_instance(seed, n_max=18, k_max=4, family=None, eta=1):
    """Seeded (graph, k) with a planted solution of size <= k_max."""
    rng = random.Random(seed)
    n = rng.randint(5, n_max)
    planted = rng.randint(0, min(k_max, n - 2))
    g = planted_instance(rng, n, family, eta, planted)
    k = rng.randint(max(planted - 1, 0), k_max)
    return g, k


def digest(g):
    return hashlib.sha256(format_graph(g).encode()).hexdigest()[:16]


def audit_kernel(g, k, cfg, beta=1, padding_seed=None):
    """Run the kernel driver against an exact oracle and compare with the exact optimum."""
    from .pipeline import run_lossy_kernel
    oracle = make_oracle(TwDeletion(cfg.eta, cfg.caps), beta=beta, capacity=cfg.caps.solver,
                         padding_seed=padding_seed)
    cfg = replace(cfg, beta_oracle=Fraction(beta))
    sol, report = run_lossy_kernel(g, k, cfg, oracle)
    report["bound"] = str(2 * Fraction(beta))
    report["ok"] = _ratio_ok(report, 2 * Fraction(beta))
    return sol, report


def audit_protocol(g, k, cfg, beta=1, padding_seed=None):
    from .pipeline import run_lossy_protocol
    oracle_f = make_oracle(cfg.problem(), beta=beta, capacity=cfg.caps.solver, padding_seed=padding_seed)
    oracle_tw = make_oracle(TwDeletion(cfg.eta, cfg.caps), beta=beta, capacity=cfg.caps.solver,
                            padding_seed=padding_seed)
    cfg = replace(cfg, beta_oracle=Fraction(beta))
    sol, report = run_lossy_protocol(g, k, cfg, oracle_f, oracle_tw)
    bound = (1 + cfg.epsilon) * Fraction(beta)
    report["bound"] = str(bound)
    report["ok"] = _ratio_ok(report, bound) and report["rounds"] <= 1 + cfg.r
    return sol, report


def _ratio_ok(report, bound):
    if not report.get("feasible"):
        return False
    ratio = report.get("capped_ratio")
    if ratio is None:
        return True
    if ratio == "inf":
        return False
    return Fraction(ratio) <= bound


REPORT_FIELDS = {
    "schema": int, "config": dict, "n": int, "m": int, "k": int, "stages": list,
    "oracle_transcript": list, "rules": list, "lift_steps": list, "ratio_bound": str,
    "lifted_solution": list, "feasible": bool, "rounds": int,
}


def report_problems(report):
    """Schema check of a run report; empty list means it conforms."""
    from .pipeline import REPORT_SCHEMA
    out = []
    for key, typ in REPORT_FIELDS.items():
        if key not in report:
            out.append(f"missing {key}")
        elif not isinstance(report[key], typ):
            out.append(f"{key} is {type(report[key]).__name__}, expected {typ.__name__}")
    if report.get("schema") != REPORT_SCHEMA:
        out.append(f"schema {report.get('schema')!r} is not {REPORT_SCHEMA}")
    if "exact_opt" in report and "capped_ratio" not in report:
        out.append("exact optimum without a capped ratio")
    for call in report.get("oracle_transcript", []):
        if not {"round", "n", "k", "answer_size"} <= set(call):
            out.append("incomplete oracle call record")
            break
    return out


def dumps_report(report):
    return json.dumps(report, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------- property suites
# A suite is gen(seed) -> instance, check(instance) -> list of failure strings
# (empty = pass) and shrink(instance) -> smaller instances to try when minimizing.

@dataclass(frozen=True)
class Suite:
    gen: object
    check: object
    shrink: object = None
    dump: object = None


def _drop_vertex(g, v):
    h = g.copy()
    h.remove_node(v)
    return h


def random_rooted_tree(rng, n):
    parent = {0: None}
    for v in range(1, n):
        parent[v] = rng.randrange(v)
    return RootedTree(parent, 0)


def random_low_tw_graph(rng, n, tw, p=None):
    for _ in range(200):
        g = random_graph(n, p if p is not None else rng.choice([0.1, 0.15, 0.2, 0.3]), rng.randrange(10 ** 9))
        if treewidth(g, caps=None) <= tw:
            return g
    return nx.path_graph(n)


# lca ------------------------------------------------------------------------------

def gen_lca(seed):
    rng = random.Random(seed)
    tree = random_rooted_tree(rng, rng.randint(1, 100))
    return tree, rng.sample(tree.nodes, rng.randint(1, min(10, len(tree.nodes))))


def check_lca(inst):
    from . import treewidth as tw
    tree, s = inst
    closure = tw.lca_closure(tree, s)
    out = []
    if len(closure) > 2 * len(set(s)) - 1:
        out.append(f"|L| = {len(closure)} > 2|S|-1 = {2 * len(set(s)) - 1}")
    if not set(s) <= closure:
        out.append("closure misses S")
    for _, nbrs in tw.tree_components(tree, closure):
        if len(nbrs) > 2:
            out.append(f"component of T - L with {len(nbrs)} neighbours")
    if tw.lca_closure(tree, closure) != closure:
        out.append("closure is not idempotent")
    return out


def shrink_lca(inst):
    tree, s = inst
    for x in s:
        if len(s) > 1:
            yield tree, [y for y in s if y != x]
    ch = tree.children()
    for v in tree.nodes:
        if not ch[v] and v != tree.root and v not in s:
            yield RootedTree({u: p for u, p in tree.parent.items() if u != v}, tree.root), s


def dump_lca(inst):
    tree, s = inst
    return {"parent": {str(v): p for v, p in tree.parent.items()}, "root": tree.root, "s": list(s)}


# pack-or-cover --------------------------------------------------------------------

def gen_pack(seed):
    rng = random.Random(seed)
    g = random_low_tw_graph(rng, rng.randint(3, 16), 3)
    return g, rng.choice(connected_catalog(4)), rng.randint(1, 3)


def check_pack(inst):
    from .dichotomy import pack_or_cover
    g, code, l = inst
    pattern = graph_from_code(code)
    td = exact_tree_decomposition(g, caps=None)
    res = pack_or_cover(g, pattern, l, td)
    out = []
    if res.is_packing:
        if len(res.packing) != l:
            out.append("packing has the wrong size")
        used = set()
        for m in res.packing:
            if not m.is_valid(g, pattern):
                out.append("invalid model in packing")
            if used & m.vertices():
                out.append("models overlap")
            used |= m.vertices()
    else:
        if not is_minor_free(delete(g, res.cover), [pattern], caps=None):
            out.append("cover leaves a model")
        bound = (td.width() + 1) * (l - 1)
        if len(res.cover) > bound:
            out.append(f"cover of size {len(res.cover)} exceeds (w+1)(l-1) = {bound}")
    return out


def shrink_graph_first(inst):
    g, *rest = inst
    for v in sorted(g.nodes()):
        yield (_drop_vertex(g, v), *rest)


def dump_graph_first(inst):
    g, *rest = inst
    return {"graph": format_graph(g), "args": [str(a) for a in rest]}


# protrusion decompositions --------------------------------------------------------

def _cover_decomposition(g):
    from .protrusion import decomposition_from_cover
    s = greedy_solution(FDeletion([complete(3)], None), g)
    return decomposition_from_cover(g, s, exact_tree_decomposition(g, caps=None))


def gen_protrusion(seed):
    rng = random.Random(seed)
    return (random_low_tw_graph(rng, rng.randint(4, 16), 3),)


def check_protrusion(inst):
    from .protrusion import from_json, to_json, validate
    g, = inst
    d = _cover_decomposition(g)
    out = validate(g, d, caps=None)
    if from_json(json.loads(json.dumps(to_json(d)))) != d:
        out.append("JSON round trip changed the decomposition")
    return out


# dichotomy ------------------------------------------------------------------------

def gen_dichotomy(seed):
    rng = random.Random(seed)
    return random_low_tw_graph(rng, rng.randint(4, 18), 3), rng.randint(0, 2)


def check_dichotomy(inst):
    from .dichotomy import construct_dichotomy, dichotomy_problems
    from .protrusion import validate
    g, k = inst
    dec = construct_dichotomy(g, _cover_decomposition(g), k, 3, k_hat=k + 3)
    return dichotomy_problems(g, dec, k, 3) + validate(g, dec, caps=None)


# compression with a disconnected family -------------------------------------------

def gen_compress(seed):
    rng = random.Random(seed)
    return random_low_tw_graph(rng, rng.randint(5, 16), 2, rng.choice([0.2, 0.3])), rng.randint(0, 3)


def check_compress(inst):
    """Capped optimum unchanged, and every solution of size <= k lifts to one no larger."""
    from itertools import combinations
    from .dichotomy import compress_decomposition
    from .protrusion import decomposition_from_cover
    g, k = inst
    family = [nx.disjoint_union(complete(3), nx.path_graph(2))]
    problem = FDeletion(family, None)
    d = decomposition_from_cover(g, greedy_solution(problem, g), exact_tree_decomposition(g, caps=None))
    g2, lift = compress_decomposition(g, d, k, family, k_hat=k + 5)
    out = []
    a, b = capped_optimum(problem, g, k), capped_optimum(problem, g2, k)
    if a != b:
        out.append(f"capped optimum {a} before, {b} after compression")
    for size in range(k + 1):
        for s2 in combinations(sorted(g2.nodes()), size):
            if problem.is_solution(g2, s2):
                s = lift(set(s2))
                if not problem.is_solution(g, s) or len(s) > size:
                    out.append(f"lift of {sorted(s2)} gives {sorted(s)}")
    return out


# replacement ----------------------------------------------------------------------

SMALL_FAMILIES = {
    "K3": lambda: [complete(3)],
    "P3": lambda: [nx.path_graph(3)],
}


def composed_instance(rng):
    """Random H (+) G* glued along a boundary of size 1 or 2.

    Returns (H, G*, glued graph, H-vertex -> glued-vertex map, r).
    """
    r = rng.randint(1, 2)

    def piece(n, tw):
        g = random_low_tw_graph(rng, n, tw, rng.choice([0.25, 0.4]))
        return BoundariedGraph(g, tuple(rng.sample(sorted(g.nodes()), r)))

    h = piece(rng.randint(r + 2, 9), 2)
    rest = piece(rng.randint(r + 1, 8), 3)
    g, ident = glue_with_map(rest, h)
    return h, rest, g, ident, r


def gen_replacer(seed, families=("K3", "P3")):
    rng = random.Random(seed)
    name = rng.choice(sorted(families))
    h, _, g, ident, r = composed_instance(rng)
    x = frozenset(ident[v] for v in h.graph.nodes())
    bnd = tuple(ident[v] for v in h.boundary)
    return g, x, bnd, name, rng.randint(1, 2)


def budget_solution(problem, g, k, inner, d):
    """Smallest solution of size <= k using at most d vertices of `inner`, or None."""
    from itertools import combinations
    for size in range(k + 1):
        for s in combinations(sorted(g.nodes()), size):
            if len(inner.intersection(s)) <= d and problem.is_solution(g, s):
                return frozenset(s)
    return None


def check_replacer(inst, k_max=3):
    """Folio kept, budget-respecting capped optimum kept for k <= k_max, lift round trip.

    A replacement only answers for solutions with at most d deletions inside
    the protrusion, so the plain capped optimum is compared for k <= d only.
    """
    from .minors import compute_h_folio
    from .replacer import EncoderSpace, lift_through_replacement, replace_protrusion
    g, x, bnd, name, d = inst
    family = SMALL_FAMILIES[name]()
    space = EncoderSpace.for_family(family, len(bnd), d, 3)
    g2, handle = replace_protrusion(g, x, space, boundary=bnd)
    out = []
    f1 = compute_h_folio(handle.original.interior(), 3, caps=None).members
    f2 = compute_h_folio(handle.replacement.interior(), 3, caps=None).members
    if f1 != f2:
        out.append("folio changed")
    problem = FDeletion(family, None)
    inner1 = set(x) - set(bnd)
    inner2 = set(handle.replacement.graph.nodes()) - set(bnd)
    s1 = budget_solution(problem, g, k_max, inner1, d)
    s2 = budget_solution(problem, g2, k_max, inner2, d)
    for k in range(k_max + 1):
        a = min(len(s1), k + 1) if s1 is not None else k + 1
        b = min(len(s2), k + 1) if s2 is not None else k + 1
        if a != b:
            out.append(f"budget-respecting capped optimum at k={k}: {a} before, {b} after")
        if k <= d:
            a, b = capped_optimum(problem, g, k), capped_optimum(problem, g2, k)
            if a != b:
                out.append(f"capped optimum at k={k}: {a} before, {b} after")
    if s2 is not None:
        s = lift_through_replacement(handle, s2)
        if not problem.is_solution(g, s) or len(s) != len(s2):
            out.append("lift lost feasibility or changed size")
    return out


def shrink_replacer(inst):
    g, x, bnd, name, d = inst
    for v in sorted(g.nodes()):
        if v not in bnd:
            yield _drop_vertex(g, v), x - {v}, bnd, name, d


def dump_replacer(inst):
    g, x, bnd, name, d = inst
    return {"graph": format_graph(g), "edges": sorted(map(sorted, g.edges())), "protrusion": sorted(x),
            "boundary": list(bnd), "family": name, "d": d}


# flow graph -----------------------------------------------------------------------

def gen_flow(seed):
    rng = random.Random(seed)
    n = rng.randint(5, 14)
    k = rng.randint(0, 4)
    g = planted_instance(rng, n, [complete(3)], 1, rng.randint(0, min(4, n - 2)), attach=(3, 6))
    return g, k


def check_flow(inst):
    from .pipeline import NoInstance, PipelineConfig, build_flow_graph, build_near_protrusion
    g, k = inst
    family = [complete(3)]
    cfg = PipelineConfig(family=family, eta=1)
    try:
        np_ = build_near_protrusion(g, k, cfg)
        p0 = np_.x | np_.z
    except NoInstance:
        p0 = set(g.nodes())
    flow = build_flow_graph(g, p0, k, 1)
    tw = TwDeletion(1, None)
    out = []
    a, b = capped_optimum(tw, g, k), capped_optimum(tw, flow, k)
    if a != b:
        out.append(f"tw-deletion capped optimum {a} on G, {b} on the flow graph")
    if capped_optimum(FDeletion(family, None), g, k) < b:
        out.append("F-deletion optimum below the flow graph's treewidth-deletion optimum")
    return out


# end-to-end -----------------------------------------------------------------------

def gen_pipeline(seed):
    return random_instance(seed, family=[complete(3)])


def check_pipeline(inst):
    from .pipeline import PipelineConfig
    g, k = inst
    cfg = PipelineConfig(family=[complete(3)], eta=1)
    out = []
    _, rep = audit_kernel(g, k, cfg)
    if not rep["ok"]:
        out.append(f"kernel ratio {rep.get('capped_ratio')} above {rep['bound']}")
    for eps in (Fraction(1), Fraction(1, 2)):
        _, rep = audit_protocol(g, k, replace(cfg, epsilon=eps))
        if not rep["ok"]:
            out.append(f"protocol eps={eps}: ratio {rep.get('capped_ratio')} rounds {rep['rounds']}")
    return out


SUITES = {
    "lca": Suite(gen_lca, check_lca, shrink_lca, dump_lca),
    "pack": Suite(gen_pack, check_pack, shrink_graph_first, dump_graph_first),
    "protrusion": Suite(gen_protrusion, check_protrusion, shrink_graph_first, dump_graph_first),
    "dichotomy": Suite(gen_dichotomy, check_dichotomy, shrink_graph_first, dump_graph_first),
    "compress": Suite(gen_compress, check_compress, shrink_graph_first, dump_graph_first),
    "replacer": Suite(gen_replacer, check_replacer, shrink_replacer, dump_replacer),
    "flow": Suite(gen_flow, check_flow, shrink_graph_first, dump_graph_first),
    "pipeline": Suite(gen_pipeline, check_pipeline, shrink_graph_first, dump_graph_first),
}


def _run_check(suite, inst):
    try:
        return suite.check(inst), False
    except Exception as e:  # a crash is a failure too; it gets reported with the instance
        return [f"{type(e).__name__}: {e}"], True


def minimize(suite, inst, failures, crashed, max_steps=200):
    """Greedy shrink: keep taking the first smaller instance that still fails the same way."""
    if suite.shrink is None:
        return inst, failures
    for _ in range(max_steps):
        for cand in suite.shrink(inst):
            f, c = _run_check(suite, cand)
            if f and c == crashed:
                inst, failures = cand, f
                break
        else:
            break
    return inst, failures


@dataclass
class Failure:
    suite: str
    seed: int
    failures: list
    instance: dict

    def to_json(self):
        return {"suite": self.suite, "seed": self.seed, "failures": self.failures, "instance": self.instance}


def case_seeds(seed, count):
    return [seed * 100003 + i for i in range(count)]


def run_suite(name, count, seed=0, workers=1, shrink=True):
    """{suite: [Failure]} with failures in seed order; empty lists mean the suite passed."""
    from concurrent.futures import ThreadPoolExecutor
    names = sorted(SUITES) if name == "all" else [name]
    for nm in names:
        if nm not in SUITES:
            raise InvalidInput(f"unknown suite {nm!r}; choose from {sorted(SUITES)} or 'all'")
    out = {}
    for nm in names:
        suite = SUITES[nm]

        def one(s, suite=suite):
            inst = suite.gen(s)
            f, crashed = _run_check(suite, inst)
            return inst, f, crashed

        seeds = case_seeds(seed, count)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(one, seeds))
        else:
            results = [one(s) for s in seeds]
        fails = []
        for s, (inst, f, crashed) in zip(seeds, results):
            if not f:
                continue
            if shrink:
                inst, f = minimize(suite, inst, f, crashed)
            dump = suite.dump(inst) if suite.dump else repr(inst)
            fails.append(Failure(nm, s, f, dump))
        out[nm] = fails
    return out
