"""Exact deletion solvers, disjoint-path counting and approximation oracles."""
from dataclasses import dataclass, field
from fractions import Fraction
import math
import random

import networkx as nx
from networkx.algorithms.connectivity import local_node_connectivity, minimum_st_node_cut

from .config import DEFAULT_CAPS
from .errors import CapExceeded, InvalidInput, OracleCapacityError
from .graph import bits, complete, to_masks
from .minors import first_model, is_forest, is_minor_free, is_triangle
from .treewidth import treewidth, treewidth_at_most


@dataclass(frozen=True)
class Instance:
    graph: nx.Graph
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise InvalidInput("budget k must be non-negative")


@dataclass(frozen=True)
class Solution:
    vertices: frozenset
    feasible: bool = True

    def __len__(self):
        return len(self.vertices)


def capped_value(inst, sol):
    """min(|S|, k+1) for a feasible S, +inf otherwise."""
    if not sol.feasible:
        return math.inf
    return min(len(sol.vertices), inst.k + 1)


def capped_ratio(value, opt):
    """value / opt with 0/0 read as 1."""
    if opt == 0:
        return Fraction(1) if value == 0 else math.inf
    if value == math.inf:
        return math.inf
    return Fraction(value, opt)


# ---------------------------------------------------------------- branching engine

def _two_core(adj, mask):
    changed = True
    while changed:
        changed = False
        for v in bits(mask):
            if bin(adj[v] & mask).count("1") <= 1:
                mask &= ~(1 << v)
                changed = True
    return mask


def _shortest_cycle_mask(adj, mask):
    """Shortest cycle inside mask as a list of indices, or None."""
    mask = _two_core(adj, mask)
    if not mask:
        return None
    best = None
    for s in bits(mask):
        dist, par = {s: 0}, {s: -1}
        queue = [s]
        for x in queue:
            if best is not None and 2 * dist[x] + 1 >= len(best):
                break
            for y in bits(adj[x] & mask):
                if y not in dist:
                    dist[y], par[y] = dist[x] + 1, x
                    queue.append(y)
                elif par[x] != y and dist[y] >= dist[x]:
                    left, right = [x], [y]
                    while left[-1] != right[-1]:
                        if dist[left[-1]] >= dist[right[-1]]:
                            left.append(par[left[-1]])
                        else:
                            right.append(par[right[-1]])
                    cyc = left + right[-2::-1]
                    if len(set(cyc)) == len(cyc) and (best is None or len(cyc) < len(best)):
                        best = cyc
    return best


def _branch(n, obstruction, budget, lower=0):
    """Smallest set (as index list) hitting every obstruction, of size <= budget.

    obstruction(mask) returns the index list of some obstruction inside mask,
    or None when mask is already clean.  Iterative deepening with a memo of
    (mask -> largest budget known to fail).
    """
    failed = {}
    full = (1 << n) - 1

    def go(mask, b):
        if failed.get(mask, -1) >= b:
            return None
        obs = obstruction(mask)
        if obs is None:
            return []
        if b > 0:
            for v in obs:
                rest = go(mask & ~(1 << v), b - 1)
                if rest is not None:
                    return [v] + rest
        failed[mask] = max(failed.get(mask, -1), b)
        return None

    for b in range(lower, budget + 1):
        res = go(full, b)
        if res is not None:
            return res
    return None


# ---------------------------------------------------------------- problems

class FDeletion:
    """Delete vertices until no family member is a minor."""
    name = "fdel"

    def __init__(self, family, caps=DEFAULT_CAPS):
        self.family = list(family)
        self.caps = caps
        self.triangle_only = len(self.family) == 1 and is_triangle(self.family[0])
        self.connected = all(f.number_of_nodes() > 0 and nx.is_connected(f) for f in self.family)

    def is_solution(self, g, s):
        h = g.copy()
        h.remove_nodes_from(s)
        if self.triangle_only:
            return is_forest(h)
        return is_minor_free(h, self.family, self.caps)

    def _obstruction_fn(self, g, order, adj):
        if self.triangle_only:
            return lambda mask: _shortest_cycle_mask(adj, mask)
        idx = {v: i for i, v in enumerate(order)}

        def obs(mask):
            h = g.subgraph([order[i] for i in bits(mask)])
            m = first_model(h, self.family, self.caps)
            if m is None:
                return None
            return sorted((idx[v] for v in m.vertices()), key=lambda i: -bin(adj[i] & mask).count("1"))
        return obs

    def solve(self, g, budget):
        """Minimum solution if one of size <= budget exists, else None."""
        if self.caps is not None and g.number_of_nodes() > self.caps.solver:
            raise CapExceeded(f"{g.number_of_nodes()} vertices exceeds the solver cap {self.caps.solver}")
        if self.connected:
            out = []
            comps = sorted(nx.connected_components(g), key=lambda c: min(c))
            for comp in comps:
                part = self._solve_one(g.subgraph(comp), budget - len(out))
                if part is None:
                    return None
                out += part
            return frozenset(out)
        res = self._solve_one(g, budget)
        return None if res is None else frozenset(res)

    def _solve_one(self, g, budget):
        if budget < 0:
            return None
        order, adj = to_masks(g)
        res = _branch(len(order), self._obstruction_fn(g, order, adj), budget)
        return None if res is None else [order[i] for i in res]

    def describe(self):
        return {"problem": self.name, "family_sizes": [f.number_of_nodes() for f in self.family]}


def tw_obstructions(eta):
    """A minor family whose exclusion is exactly treewidth <= eta, when a short one is known."""
    if eta == 0:
        return [nx.path_graph(2)]
    if eta == 1:
        return [complete(3)]
    if eta == 2:
        return [complete(4)]
    return None


class TwDeletion:
    """Delete vertices until the treewidth is at most eta."""
    name = "tweta"

    def __init__(self, eta, caps=DEFAULT_CAPS):
        if eta < 0:
            raise InvalidInput("eta must be non-negative")
        self.eta = eta
        self.caps = caps
        fam = tw_obstructions(eta)
        self._as_minor = FDeletion(fam, caps) if fam is not None else None

    def is_solution(self, g, s):
        h = g.copy()
        h.remove_nodes_from(s)
        return treewidth_at_most(h, self.eta, caps=None)

    def solve(self, g, budget):
        if self.caps is not None and g.number_of_nodes() > self.caps.solver:
            raise CapExceeded(f"{g.number_of_nodes()} vertices exceeds the solver cap {self.caps.solver}")
        if self._as_minor is not None:
            return self._as_minor.solve(g, budget)
        from itertools import combinations
        nodes = sorted(g.nodes())
        for size in range(0, min(budget, len(nodes)) + 1):
            for s in combinations(nodes, size):
                if self.is_solution(g, s):
                    return frozenset(s)
        return None

    def describe(self):
        return {"problem": self.name, "eta": self.eta}


def optimum(problem, g):
    """Exact optimum (no budget)."""
    return problem.solve(g, g.number_of_nodes())


def capped_optimum(problem, g, k):
    """min(opt, k+1)."""
    s = problem.solve(g, k)
    return k + 1 if s is None else len(s)


def exact_f_deletion(g, family, k=None, caps=DEFAULT_CAPS):
    """Minimum F-deletion set if one of size <= k exists (k=None: no limit)."""
    budget = g.number_of_nodes() if k is None else k
    s = FDeletion(family, caps).solve(g, budget)
    if s is None:
        return Solution(frozenset(), False)
    return Solution(s, True)


def exact_tw_deletion(g, eta, k=None, caps=DEFAULT_CAPS):
    budget = g.number_of_nodes() if k is None else k
    s = TwDeletion(eta, caps).solve(g, budget)
    if s is None:
        return Solution(frozenset(), False)
    return Solution(s, True)


def f_deletion_bounded_tw(g, family, tw_bound, caps=DEFAULT_CAPS):
    """Optimum F-deletion set of a graph whose treewidth is at most tw_bound."""
    if not treewidth_at_most(g, tw_bound, caps=caps):
        raise InvalidInput(f"treewidth exceeds the promised bound {tw_bound}")
    return FDeletion(family, caps).solve(g, g.number_of_nodes())


def greedy_solution(problem, g):
    """Some feasible solution: repeatedly delete a vertex of a remaining obstruction."""
    s = set()
    if isinstance(problem, TwDeletion) and problem._as_minor is None:
        h = g.copy()
        while not treewidth_at_most(h, problem.eta, caps=None):
            v = max(sorted(h.nodes()), key=h.degree)
            s.add(v)
            h.remove_node(v)
        return frozenset(s)
    fam = problem.family if isinstance(problem, FDeletion) else problem._as_minor.family
    h = g.copy()
    while True:
        m = first_model(h, fam, None)
        if m is None:
            return frozenset(s)
        v = max(sorted(m.vertices()), key=h.degree)
        s.add(v)
        h.remove_node(v)


# ---------------------------------------------------------------- disjoint paths

def max_internally_disjoint_paths(g, u, v):
    """Maximum number of u-v paths sharing only their ends (a direct edge counts once)."""
    if u == v:
        raise InvalidInput("endpoints must differ")
    if g.has_edge(u, v):
        h = g.copy()
        h.remove_edge(u, v)
        return 1 + local_node_connectivity(h, u, v)
    if not nx.has_path(g, u, v):
        return 0
    return local_node_connectivity(g, u, v)


def min_vertex_separator(g, u, v):
    """Smallest vertex set avoiding u, v that separates them once a uv edge is ignored."""
    h = g
    if g.has_edge(u, v):
        h = g.copy()
        h.remove_edge(u, v)
    if not nx.has_path(h, u, v):
        return set()
    return set(minimum_st_node_cut(h, u, v))


# ---------------------------------------------------------------- oracles

@dataclass
class Oracle:
    """beta-approximate oracle of bounded capacity backed by an exact solver."""
    problem: object
    beta: Fraction
    capacity: int
    padding_seed: int = None
    call_log: list = field(default_factory=list)

    def __call__(self, g, k, round_no=None):
        n = g.number_of_nodes()
        if n > self.capacity:
            raise OracleCapacityError(f"instance with {n} vertices exceeds oracle capacity {self.capacity}")
        s = set(optimum(self.problem, g))
        if self.beta > 1 and self.padding_seed is not None:
            rng = random.Random(f"{self.padding_seed}:{len(self.call_log)}")
            extra = math.floor(self.beta * len(s)) - len(s)
            pool = sorted(v for v in g.nodes() if v not in s)
            rng.shuffle(pool)
            s |= set(pool[:extra])
        self.call_log.append({
            "round": len(self.call_log) + 1 if round_no is None else round_no,
            "problem": self.problem.name,
            "n": n,
            "m": g.number_of_edges(),
            "k": k,
            "answer_size": len(s),
        })
        return Solution(frozenset(s), True)

    @property
    def calls(self):
        return len(self.call_log)


def make_oracle(problem, beta=1, capacity=DEFAULT_CAPS.solver, padding_seed=None):
    beta = Fraction(beta)
    if beta < 1:
        raise InvalidInput("beta must be at least 1")
    return Oracle(problem, beta, capacity, padding_seed)
