"""Reduction pipeline: near-protrusions, the three lossy rules, the flow graph and the drivers."""
from dataclasses import dataclass, field
from fractions import Fraction
import logging
import math

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import ConfigError, InvalidInput, InvariantViolation
from .lifting import LiftChain
from .protrusion import ProtrusionDecomposition, neighborhood
from .solvers import (FDeletion, Solution, TwDeletion, capped_ratio, capped_value, Instance,
                      f_deletion_bounded_tw, greedy_solution, max_internally_disjoint_paths,
                      min_vertex_separator, optimum, tw_obstructions)
from .treewidth import (enumerate_cliques, exact_tree_decomposition, lca_closure, treewidth,
                        treewidth_at_most, tree_decomposition)

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1


def rounds_for(epsilon):
    """1 + ceil(log_{1+eps}(1/eps)), exactly: the least m >= 0 with (1+eps)^m >= 1/eps."""
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ConfigError("epsilon must be positive")
    m, power = 0, Fraction(1)
    while power < 1 / eps:
        power *= 1 + eps
        m += 1
    return 1 + m


def lrr1_threshold(epsilon, eta):
    """Smallest integer count of X-neighbours that triggers the neighbourhood deletion rule."""
    eps = Fraction(epsilon)
    return math.ceil((1 + eps) * (eta + 1) / eps)


@dataclass
class PipelineConfig:
    family: list = field(default_factory=list)
    eta: int = 1
    epsilon: Fraction = Fraction(1)
    beta_oracle: Fraction = Fraction(1)
    mode: str = "fdel"               # fdel: F-deletion; tweta: treewidth-eta deletion
    caps: object = DEFAULT_CAPS
    k_hat: object = "relaxed"        # packing size used by the dichotomy: "relaxed" (k+h), "full" or an int
    space_mode: str = "family"
    solution_multiple: int = 1       # no-instance report once opt exceeds this multiple of k

    def __post_init__(self):
        self.epsilon = Fraction(self.epsilon)
        self.beta_oracle = Fraction(self.beta_oracle)
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.eta < 1:
            raise ConfigError("eta must be at least 1")
        if self.beta_oracle < 1:
            raise ConfigError("oracle beta must be at least 1")
        if self.mode not in ("fdel", "tweta"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "fdel":
            if not self.family:
                raise ConfigError("F-deletion needs a non-empty family")
            if not any(nx.check_planarity(f)[0] for f in self.family):
                raise ConfigError("the family must contain a planar graph")

    @property
    def h(self):
        if self.mode == "tweta":
            fam = tw_obstructions(self.eta)
            return max(f.number_of_nodes() for f in fam) if fam else self.eta + 2
        return max(f.number_of_nodes() for f in self.family)

    @property
    def r(self):
        return rounds_for(self.epsilon)

    def problem(self):
        if self.mode == "tweta":
            return TwDeletion(self.eta, self.caps)
        return FDeletion(self.family, self.caps)

    def tw_problem(self):
        return TwDeletion(self.eta, self.caps)

    def dichotomy_k_hat(self, k, h):
        if self.k_hat == "relaxed":
            return k + h
        if self.k_hat == "full":
            return None
        return int(self.k_hat)

    def describe(self):
        return {
            "mode": self.mode,
            "eta": self.eta,
            "epsilon": str(self.epsilon),
            "r": self.r,
            "beta_oracle": str(self.beta_oracle),
            "family_sizes": [f.number_of_nodes() for f in self.family],
            "k_hat": self.k_hat if isinstance(self.k_hat, (str, int)) else str(self.k_hat),
        }


# ---------------------------------------------------------------- near protrusions

@dataclass(frozen=True)
class NearProtrusion:
    x: frozenset
    z: frozenset

    def __post_init__(self):
        object.__setattr__(self, "x", frozenset(self.x))
        object.__setattr__(self, "z", frozenset(self.z))


class NoInstance(Exception):
    """Raised internally when a step proves opt > k."""


def _components_outside(g, removed):
    rest = g.subgraph(set(g.nodes()) - set(removed))
    return [set(c) for c in sorted(nx.connected_components(rest), key=min)]


def validate_near_protrusion(g, k, cfg, np_):
    """List of violated near-protrusion conditions; empty means valid."""
    out = []
    if np_.x & np_.z:
        out.append("X and Z overlap")
    if not cfg.problem().is_solution(g, np_.x):
        out.append("X is not a solution")
    need = k + cfg.eta + 2
    for comp in _components_outside(g, np_.x | np_.z):
        nb = neighborhood(g, comp)
        if len(nb & np_.z) > 2 * (cfg.eta + 1):
            out.append(f"component at {min(comp)} has {len(nb & np_.z)} Z-neighbours")
        xs = sorted(nb & np_.x)
        for i, u in enumerate(xs):
            for v in xs[i + 1:]:
                if max_internally_disjoint_paths(g, u, v) < need:
                    out.append(f"X-neighbours {u}, {v} of component at {min(comp)} have < {need} disjoint paths")
    return out


def build_near_protrusion(g, k, cfg):
    """(X, Z) with X an optimum solution, or raise NoInstance when opt > multiple * k."""
    problem = cfg.problem()
    x = problem.solve(g, cfg.solution_multiple * k)
    if x is None:
        raise NoInstance(f"no solution of size <= {cfg.solution_multiple * k}")
    x = frozenset(x)
    rest = g.subgraph(set(g.nodes()) - x)
    if not treewidth_at_most(rest, cfg.eta, caps=None):
        raise ConfigError(f"treewidth of G - X exceeds eta = {cfg.eta}; eta is too small for this family")
    need = k + cfg.eta + 2
    z = set()
    changed = True
    while changed:
        changed = False
        for comp in _components_outside(g, x | z):
            xs = sorted(neighborhood(g, comp) & x)
            bad = next(((u, v) for i, u in enumerate(xs) for v in xs[i + 1:]
                        if max_internally_disjoint_paths(g, u, v) < need), None)
            if bad is not None:
                sep = min_vertex_separator(g, *bad)
                grow = sep - x
                if not grow & comp:
                    raise InvariantViolation("separator misses the component joining the pair")
                z |= grow
                changed = True
                break
    if z:
        # close Z under bags so every component sees at most two bags of it
        td = exact_tree_decomposition(rest, caps=None) if rest.number_of_nodes() <= cfg.caps.solver \
            else tree_decomposition(rest, cfg.caps)
        if td.width() > cfg.eta:
            raise InvariantViolation("decomposition of G - X is wider than eta")
        depth = td.tree.depth()
        chosen = []
        for v in sorted(z):
            holders = [t for t in td.nodes() if v in td.bags[t]]
            chosen.append(min(holders, key=lambda t: (depth[t], repr(t))))
        for t in lca_closure(td.tree, chosen):
            z |= td.bags[t]
    return NearProtrusion(x, frozenset(z))


# ---------------------------------------------------------------- first rule

def apply_lrr1(g, k, np_, cfg, chain):
    """Delete N(C) & X for every component C seeing at least the threshold many X-vertices."""
    threshold = lrr1_threshold(cfg.epsilon, cfg.eta)
    x = set(np_.x)
    g = g.copy()
    fired = []
    changed = True
    while changed:
        changed = False
        for comp in _components_outside(g, x | np_.z):
            hit = neighborhood(g, comp) & x
            if len(hit) >= threshold:
                gone = frozenset(hit)
                g.remove_nodes_from(gone)
                x -= gone
                k -= len(gone)
                chain.push("LRR1", 1 + cfg.epsilon, lambda s, gone=gone: set(s) | gone, strict=True,
                           deleted=sorted(gone))
                fired.append(sorted(gone))
                changed = True
                break
    return g, k, NearProtrusion(x, np_.z), fired


def neighbourhood_bound(cfg):
    return lrr1_threshold(cfg.epsilon, cfg.eta) - 1 + 2 * (cfg.eta + 1)


# ---------------------------------------------------------------- decompositions and the flow graph

def group_components(g, p0, cfg):
    """Parts are unions of components of G - P0 sharing one neighbourhood."""
    p0 = frozenset(p0)
    bound = neighbourhood_bound(cfg)
    groups = {}
    for comp in _components_outside(g, p0):
        nb = frozenset(neighborhood(g, comp))
        if len(nb) > bound:
            raise InvalidInput(f"component at {min(comp)} has {len(nb)} > {bound} neighbours")
        groups.setdefault(nb, set()).update(comp)
    parts = sorted((frozenset(p) for p in groups.values()), key=min)
    beta = cfg.eta + bound
    return ProtrusionDecomposition(p0, tuple(parts), max(len(p0), len(parts)), beta, True)


def build_flow_graph(g, p0, k, eta):
    """g plus uv for every u, v in p0 joined by at least k+eta+2 internally disjoint paths."""
    out = g.copy()
    nodes = sorted(p0)
    need = k + eta + 2
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            if not g.has_edge(u, v) and max_internally_disjoint_paths(g, u, v) >= need:
                out.add_edge(u, v)
    return out


def _is_clique(g, vs):
    vs = sorted(vs)
    return all(g.has_edge(u, v) for i, u in enumerate(vs) for v in vs[i + 1:])


def classify_parts(g_flow, d):
    """(simplicial indices, non-simplicial indices): N(P_i) empty or a clique in the flow graph."""
    simp, non = [], []
    for i in d.indices():
        nb = neighborhood(g_flow, d.part(i))
        (simp if _is_clique(g_flow, nb) else non).append(i)
    return simp, non


def non_edge_witness(g_flow, d, i):
    """A non-adjacent pair in N(P_i), which proves the part is not simplicial."""
    nb = sorted(neighborhood(g_flow, d.part(i)))
    for a, u in enumerate(nb):
        for v in nb[a + 1:]:
            if not g_flow.has_edge(u, v):
                return u, v
    return None


# ---------------------------------------------------------------- second rule

def apply_lrr2(g, k, d, g_flow, cfg, chain):
    """Drop simplicial parts and move to treewidth-eta deletion on the flow graph."""
    simp, non = classify_parts(g_flow, d)
    drop = set()
    for i in simp:
        drop |= d.part(i)
    keep = set(g.nodes()) - drop
    g2 = g_flow.subgraph(keep).copy()
    base = g.copy()
    family = cfg.family if cfg.mode == "fdel" else None
    tw_bound = 2 * cfg.eta + 1

    def lift(s):
        s = set(s)
        rest = base.copy()
        rest.remove_nodes_from(s)
        if len(s) > k:
            # the capped value is k+1 whatever is added, so any completion will do
            return s | set(greedy_solution(cfg.problem(), rest))
        if not treewidth_at_most(rest, tw_bound, caps=None):
            raise InvariantViolation(f"treewidth of G - S' exceeds {tw_bound}")
        if family is not None:
            extra = f_deletion_bounded_tw(rest, family, tw_bound, caps=None)
        else:
            extra = TwDeletion(cfg.eta, None).solve(rest, rest.number_of_nodes())
        return s | set(extra)

    chain.push("LRR2", 2, lift, simplicial=len(simp), non_simplicial=len(non))
    parts = tuple(d.part(i) for i in non)
    d2 = ProtrusionDecomposition(d.root_bag, parts, max(len(d.root_bag), len(parts)), d.beta, True)
    return g2, k, d2, simp, non


# ---------------------------------------------------------------- protocol pieces

def partition_root_bag(g_flow_p0, k, cfg, oracle):
    """Split P0 into Q0, Q1..Qr with bounded-treewidth Q_i, using at most r oracle calls."""
    r = cfg.r
    q0 = set(g_flow_p0.nodes())
    qs = [set() for _ in range(r)]
    transcript = {"r": r, "rounds": [], "case": None}
    if not q0:
        transcript["case"] = "empty"
        return [frozenset()] + [frozenset(q) for q in qs], transcript
    for j in range(1, r + 1):
        sol = oracle(g_flow_p0.subgraph(q0).copy(), k, round_no=j)
        s = set(sol.vertices)
        transcript["rounds"].append({"round": j, "q0": len(q0), "answer": len(s)})
        if len(q0) <= (1 + cfg.epsilon) * len(s):
            transcript["case"] = "short"
            break
        qs[j - 1] = q0 - s
        q0 = s
    else:
        transcript["case"] = "long"
    return [frozenset(q0)] + [frozenset(q) for q in qs], transcript


def check_partition(g_flow_p0, parts, eta):
    out = []
    seen = set()
    for q in parts:
        if seen & q:
            out.append("pieces overlap")
        seen |= q
    if seen != set(g_flow_p0.nodes()):
        out.append("pieces do not cover P0")
    for i, q in enumerate(parts[1:], start=1):
        if not treewidth_at_most(g_flow_p0.subgraph(q), eta, caps=None):
            out.append(f"piece {i} has treewidth above {eta}")
    return out


def apply_lrr3(g, k, partition, chain, cfg):
    q0 = frozenset(partition[0])
    g2 = g.copy()
    g2.remove_nodes_from(q0)
    chain.push("LRR3", 1 + cfg.epsilon, lambda s: set(s) | q0, deleted=sorted(q0))
    return g2, k - len(q0)


def clique_product_bound(g_flow, pieces, groups):
    """Every simplicial neighbourhood splits into cliques of the pieces; count them against the product."""
    per_piece = []
    for q in pieces:
        sub = g_flow.subgraph(q).copy()
        td = exact_tree_decomposition(sub, caps=None) if sub.number_of_nodes() else None
        cl = set(enumerate_cliques(sub, td)) if td is not None else set()
        per_piece.append({frozenset(c) for c in cl})
    bound = 1
    for cl in per_piece:
        bound *= len(cl) + 1
    for nb in groups:
        for q, cl in zip(pieces, per_piece):
            piece = frozenset(nb) & q
            if piece and piece not in cl:
                raise InvariantViolation("simplicial neighbourhood is not a union of piece cliques")
    if len(groups) > bound:
        raise InvariantViolation(f"{len(groups)} simplicial neighbourhoods exceed the clique product {bound}")
    return bound


# ---------------------------------------------------------------- drivers

def _compress(g, d, k, family, cfg, chain, stages):
    from .dichotomy import compress_decomposition
    if family is None or k < 0 or not d.parts:
        stages.append({"stage": "compress", "skipped": "nothing to compress" if family else "no obstruction family"})
        return g
    h = max(f.number_of_nodes() for f in family)
    g2, lift = compress_decomposition(g, d, k, family, h=h, caps=cfg.caps,
                                      k_hat=cfg.dichotomy_k_hat(k, min(h, cfg.caps.pattern)),
                                      space_mode=cfg.space_mode)
    chain.push("compress", 1, lift, strict=True, replaced=len(lift.handles))
    stages.append({"stage": "compress", "n_before": g.number_of_nodes(), "n_after": g2.number_of_nodes(),
                   "replaced": len(lift.handles), "skipped": len(lift.skipped), "budget": lift.budget})
    return g2


def _finish(g, k, chain, s_final, cfg, stages, oracles, compute_opt):
    lifted = frozenset(chain.lift(s_final))
    problem = cfg.problem()
    feasible = problem.is_solution(g, lifted)
    sol = Solution(lifted, feasible)
    report = {
        "schema": REPORT_SCHEMA,
        "config": cfg.describe(),
        "n": g.number_of_nodes(),
        "m": g.number_of_edges(),
        "k": k,
        "stages": stages,
        "oracle_transcript": [c for o in oracles for c in o.call_log],
        "rules": chain.rules(),
        "lift_steps": chain.summary(),
        "ratio_bound": str(chain.ratio_bound(cfg.beta_oracle)),
        "lifted_solution": sorted(lifted),
        "feasible": feasible,
        "rounds": sum(len(o.call_log) for o in oracles),
    }
    if compute_opt and (cfg.caps is None or g.number_of_nodes() <= cfg.caps.solver):
        inst = Instance(g, k)
        opt = len(optimum(problem, g))
        capped = min(opt, k + 1)
        value = capped_value(inst, sol)
        report["exact_opt"] = opt
        report["capped_opt"] = capped
        report["capped_value"] = value if value != math.inf else "inf"
        ratio = capped_ratio(value, capped)
        report["capped_ratio"] = str(ratio) if ratio != math.inf else "inf"
    return sol, report


def _kernel_tail(cur, k1, np1, cfg, chain, stages):
    """LRR2 plus compression: returns the kernel graph, its budget and its problem."""
    p0 = np1.x | np1.z
    d = group_components(cur, p0, cfg)
    stages.append({"stage": "group", "root": len(d.root_bag), "parts": d.ell, "beta": d.beta})
    g_flow = build_flow_graph(cur, p0, k1, cfg.eta)
    stages.append({"stage": "flow", "added_edges": g_flow.number_of_edges() - cur.number_of_edges()})
    g2, k2, d2, simp, non = apply_lrr2(cur, k1, d, g_flow, cfg, chain)
    stages.append({"stage": "LRR2", "simplicial": len(simp), "non_simplicial": len(non),
                   "n_after": g2.number_of_nodes()})
    g3 = _compress(g2, d2, k2, tw_obstructions(cfg.eta), cfg, chain, stages)
    return g3, k2


def run_lossy_kernel(g, k, cfg, oracle_tw, compute_opt=True):
    """Single-call lossy kernel: reduce, ask the treewidth oracle once, lift back."""
    if k < 0:
        raise InvalidInput("k must be non-negative")
    cfg = _with_epsilon(cfg, 1)
    chain = LiftChain()
    stages = []
    try:
        np_ = build_near_protrusion(g, k, cfg)
    except NoInstance as e:
        stages.append({"stage": "near_protrusion", "no_instance": str(e)})
        fallback = greedy_solution(cfg.problem(), g)
        return _finish(g, k, chain, fallback, cfg, stages, [oracle_tw], compute_opt)
    stages.append({"stage": "near_protrusion", "x": len(np_.x), "z": len(np_.z)})
    cur, k1, np1, fired = apply_lrr1(g, k, np_, cfg, chain)
    stages.append({"stage": "LRR1", "fired": len(fired), "k_after": k1})
    if k1 < 0:
        sol = oracle_tw(cur, 0) if cfg.mode == "tweta" else Solution(greedy_solution(cfg.problem(), cur))
        stages.append({"stage": "no_instance_after_LRR1"})
        return _finish(g, k, chain, sol.vertices, cfg, stages, [oracle_tw], compute_opt)
    kern, k2 = _kernel_tail(cur, k1, np1, cfg, chain, stages)
    stages.append({"stage": "kernel", "n": kern.number_of_nodes(), "m": kern.number_of_edges(), "k": k2})
    sol = oracle_tw(kern, k2, round_no=1)
    sol_final, report = _finish(g, k, chain, sol.vertices, cfg, stages, [oracle_tw], compute_opt)
    report["kernel_size"] = {"n": kern.number_of_nodes(), "m": kern.number_of_edges(), "k": k2}
    report["rounds"] = len(oracle_tw.call_log)
    return sol_final, report


def run_lossy_protocol(g, k, cfg, oracle_f, oracle_tw, compute_opt=True):
    """Multi-round protocol: at most r treewidth-oracle rounds, then one call for the compressed instance."""
    if k < 0:
        raise InvalidInput("k must be non-negative")
    chain = LiftChain()
    stages = []
    oracles = [oracle_tw, oracle_f]
    try:
        np_ = build_near_protrusion(g, k, cfg)
    except NoInstance as e:
        stages.append({"stage": "near_protrusion", "no_instance": str(e)})
        fallback = greedy_solution(cfg.problem(), g)
        sol, report = _finish(g, k, chain, fallback, cfg, stages, oracles, compute_opt)
        report["rounds"] = 0
        return sol, report
    stages.append({"stage": "near_protrusion", "x": len(np_.x), "z": len(np_.z)})
    g1, k1, np1, fired = apply_lrr1(g, k, np_, cfg, chain)
    stages.append({"stage": "LRR1", "fired": len(fired), "k_after": k1})
    p0 = np1.x | np1.z
    rounds = 0
    if k1 >= 0:
        flow1 = build_flow_graph(g1, p0, k1, cfg.eta)
        fp0 = flow1.subgraph(p0).copy()
        partition, transcript = partition_root_bag(fp0, k1, cfg, oracle_tw)
        rounds += len(transcript["rounds"])
        problems = check_partition(fp0, partition, cfg.eta)
        if problems:
            raise InvariantViolation("; ".join(problems))
        stages.append({"stage": "partition", **transcript, "q0": len(partition[0])})
        g2, k2 = apply_lrr3(g1, k1, partition, chain, cfg)
        stages.append({"stage": "LRR3", "deleted": len(partition[0]), "k_after": k2})
    else:
        g2, k2, partition = g1, k1, None
    if k2 < 0:
        sol = Solution(greedy_solution(cfg.problem(), g2))
        stages.append({"stage": "no_instance", "k": k2})
        sol_final, report = _finish(g, k, chain, sol.vertices, cfg, stages, oracles, compute_opt)
        report["rounds"] = rounds
        return sol_final, report
    p0b = p0 - partition[0]
    d = group_components(g2, p0b, cfg)
    flow2 = build_flow_graph(g2, p0b, k2, cfg.eta)
    simp, non = classify_parts(flow2, d)
    groups = {}
    for i in simp:
        groups.setdefault(frozenset(neighborhood(flow2, d.part(i))), set()).update(d.part(i))
    bound = clique_product_bound(flow2, [q for q in partition[1:]], list(groups))
    parts = [d.part(i) for i in non] + [frozenset(v) for _, v in sorted(groups.items(), key=lambda kv: min(kv[1]))]
    d2 = ProtrusionDecomposition(p0b, tuple(parts), max(len(p0b), len(parts)), d.beta, True)
    stages.append({"stage": "group", "non_simplicial": len(non), "simplicial_groups": len(groups),
                   "clique_bound": bound})
    family = cfg.family if cfg.mode == "fdel" else tw_obstructions(cfg.eta)
    g3 = _compress(g2, d2, k2, family, cfg, chain, stages)
    stages.append({"stage": "kernel", "n": g3.number_of_nodes(), "m": g3.number_of_edges(), "k": k2})
    sol = oracle_f(g3, k2, round_no=rounds + 1)
    rounds += 1
    if rounds > 1 + cfg.r:
        raise InvariantViolation(f"{rounds} oracle rounds exceed 1 + r = {1 + cfg.r}")
    sol_final, report = _finish(g, k, chain, sol.vertices, cfg, stages, oracles, compute_opt)
    report["kernel_size"] = {"n": g3.number_of_nodes(), "m": g3.number_of_edges(), "k": k2}
    report["rounds"] = rounds
    return sol_final, report


def _with_epsilon(cfg, eps):
    from dataclasses import replace
    return replace(cfg, epsilon=Fraction(eps))
