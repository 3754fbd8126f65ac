"""Exact tree decompositions of small graphs and operations on rooted trees."""
from dataclasses import dataclass, field
from itertools import count

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import CapExceeded, InvalidInput, ParseError
from .graph import bits, to_masks


# ---------------------------------------------------------------- rooted trees

@dataclass(frozen=True)
class RootedTree:
    """A rooted tree given by parent pointers (the root maps to None)."""
    parent: dict
    root: object

    def __post_init__(self):
        if self.parent.get(self.root, "missing") is not None:
            raise InvalidInput("root must map to None")
        for v in self.parent:
            seen = set()
            x = v
            while x is not None:
                if x in seen:
                    raise InvalidInput("parent pointers contain a cycle")
                seen.add(x)
                if x not in self.parent:
                    raise InvalidInput(f"unknown parent {x}")
                x = self.parent[x]
            if self.root not in seen:
                raise InvalidInput("tree is not connected to the root")

    @property
    def nodes(self):
        return list(self.parent)

    def children(self):
        out = {v: [] for v in self.parent}
        for v, p in self.parent.items():
            if p is not None:
                out[p].append(v)
        return out

    def depth(self):
        d = {}
        for v in self.parent:
            chain = []
            x = v
            while x is not None and x not in d:
                chain.append(x)
                x = self.parent[x]
            base = -1 if x is None else d[x]
            for y in reversed(chain):
                base += 1
                d[y] = base
        return d

    def lca(self, u, v, depth=None):
        depth = depth or self.depth()
        while depth[u] > depth[v]:
            u = self.parent[u]
        while depth[v] > depth[u]:
            v = self.parent[v]
        while u != v:
            u, v = self.parent[u], self.parent[v]
        return u

    def edges(self):
        return [(p, v) for v, p in self.parent.items() if p is not None]

    def to_networkx(self):
        t = nx.Graph()
        t.add_nodes_from(self.parent)
        t.add_edges_from(self.edges())
        return t

    def preorder(self):
        ch = self.children()
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(ch[v]))
        return out


def lca_closure(tree, s):
    """{LCA(u, v) : u, v in s}; closed under pairwise LCAs."""
    s = list(dict.fromkeys(s))
    for x in s:
        if x not in tree.parent:
            raise InvalidInput(f"{x} is not a node of the tree")
    depth = tree.depth()
    out = set(s)
    for i, u in enumerate(s):
        for v in s[i + 1:]:
            out.add(tree.lca(u, v, depth))
    return out


def tree_components(tree, removed):
    """Components of T - removed as (node set, neighbours in removed) pairs."""
    t = tree.to_networkx()
    rest = t.subgraph([v for v in t if v not in removed])
    out = []
    for comp in nx.connected_components(rest):
        nb = {u for v in comp for u in t[v] if u in removed}
        out.append((set(comp), nb))
    out.sort(key=lambda c: min(map(repr, c[0])))
    return out


# ---------------------------------------------------------------- tree decompositions

@dataclass(frozen=True)
class TreeDecomposition:
    tree: RootedTree
    bags: dict = field(default_factory=dict)

    @property
    def root(self):
        return self.tree.root

    def width(self):
        return max((len(b) for b in self.bags.values()), default=0) - 1

    def nodes(self):
        return self.tree.nodes

    def below(self):
        """node -> union of bags in the subtree rooted at that node."""
        ch = self.tree.children()
        out = {}
        for v in reversed(self.tree.preorder()):
            acc = set(self.bags[v])
            for c in ch[v]:
                acc |= out[c]
            out[v] = frozenset(acc)
        return out

    def to_text(self, n=None):
        if n is None:
            n = len(set().union(*self.bags.values())) if self.bags else 0
        lines = [f"s td {len(self.bags)} {self.width() + 1} {n}"]
        for t in self.tree.preorder():
            lines.append(" ".join(["b", str(t)] + [str(v) for v in sorted(self.bags[t])]))
        for p, v in self.tree.edges():
            lines.append(f"{p} {v}")
        lines.append(f"r {self.root}")
        return "\n".join(lines) + "\n"


def parse_tree_decomposition(text):
    bags, edges, root = {}, [], None
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0] in ("c", "#", "s"):
            continue
        try:
            if parts[0] == "b":
                bags[int(parts[1])] = frozenset(int(x) for x in parts[2:])
            elif parts[0] == "r":
                root = int(parts[1])
            else:
                edges.append((int(parts[0]), int(parts[1])))
        except (ValueError, IndexError):
            raise ParseError(f"bad decomposition line {raw!r}") from None
    if not bags:
        raise ParseError("decomposition has no bags")
    if root is None:
        root = min(bags)
    t = nx.Graph()
    t.add_nodes_from(bags)
    t.add_edges_from(edges)
    if not nx.is_tree(t):
        raise ParseError("decomposition edges do not form a tree")
    parent = {root: None}
    for u, v in nx.bfs_edges(t, root):
        parent[v] = u
    return TreeDecomposition(RootedTree(parent, root), bags)


def verify_tree_decomposition(g, td):
    """Check vertex coverage, edge coverage and connectivity of vertex traces."""
    try:
        bags = td.bags
        if set(bags) != set(td.tree.parent):
            return False
        covered = set().union(*bags.values()) if bags else set()
        if not set(g.nodes()) <= covered or not covered <= set(g.nodes()):
            return False
        for u, v in g.edges():
            if not any(u in b and v in b for b in bags.values()):
                return False
        t = td.tree.to_networkx()
        for v in g.nodes():
            holders = [x for x, b in bags.items() if v in b]
            if not nx.is_connected(t.subgraph(holders)):
                return False
        return nx.is_tree(t) if len(t) else False
    except (AttributeError, KeyError, TypeError):
        return False


def single_bag(g):
    return TreeDecomposition(RootedTree({0: None}, 0), {0: frozenset(g.nodes())})


# ---------------------------------------------------------------- exact search

def _eliminate(adj, v):
    nb = adj[v]
    out = list(adj)
    for u in bits(nb):
        out[u] = (out[u] | nb) & ~(1 << u) & ~(1 << v)
    out[v] = 0
    return out


def _is_clique(adj, s):
    for x in bits(s):
        if (adj[x] | (1 << x)) & s != s:
            return False
    return True


def _safe_vertex(adj, rem, w):
    """A vertex whose elimination never hurts the decision 'tw <= w'."""
    for v in bits(rem):
        nb = adj[v]
        d = bin(nb).count("1")
        if d > w:
            continue
        if _is_clique(adj, nb):
            return v
        # almost simplicial: contracting into the odd neighbour yields the same graph
        for u in bits(nb):
            if _is_clique(adj, nb & ~(1 << u)):
                return v
    return None


def _min_fill_order(adj, n):
    adj = list(adj)
    rem = (1 << n) - 1
    order, width = [], -1
    while rem:
        best, bv = None, None
        for v in bits(rem):
            nb = adj[v]
            fill = 0
            for x in bits(nb):
                fill += bin(nb & ~adj[x] & ~(1 << x)).count("1")
            key = (fill, bin(nb).count("1"), v)
            if best is None or key < best:
                best, bv = key, v
        width = max(width, bin(adj[bv]).count("1"))
        order.append(bv)
        adj = _eliminate(adj, bv)
        rem &= ~(1 << bv)
    return order, width


def _mmw_lower_bound(adj, n):
    """Minor-min-width: contract a min-degree vertex into its min-degree neighbour."""
    adj = list(adj)
    rem = (1 << n) - 1
    lb = 0
    while bin(rem).count("1") > 1:
        v = min(bits(rem), key=lambda x: (bin(adj[x]).count("1"), x))
        dv = bin(adj[v]).count("1")
        lb = max(lb, dv)
        if dv == 0:
            rem &= ~(1 << v)
            continue
        u = min(bits(adj[v]), key=lambda x: (bin(adj[x]).count("1"), x))
        merged = (adj[u] | adj[v]) & ~(1 << u) & ~(1 << v)
        for x in bits(adj[v]):
            adj[x] &= ~(1 << v)
        adj[v] = 0
        adj[u] = merged
        for x in bits(merged):
            adj[x] |= 1 << u
        rem &= ~(1 << v)
    return lb


def _decide(adj, n, w):
    """Elimination order of width <= w, or None."""
    failed = set()

    def dfs(adj, rem):
        if bin(rem).count("1") <= w + 1:
            return bits(rem)
        if rem in failed:
            return None
        v = _safe_vertex(adj, rem, w)
        if v is not None:
            rest = dfs(_eliminate(adj, v), rem & ~(1 << v))
            if rest is None:
                failed.add(rem)
                return None
            return [v] + rest
        for v in bits(rem):
            if bin(adj[v]).count("1") <= w:
                rest = dfs(_eliminate(adj, v), rem & ~(1 << v))
                if rest is not None:
                    return [v] + rest
        failed.add(rem)
        return None

    return dfs(list(adj), (1 << n) - 1)


def _td_from_order(order_vertices, adj, n, elim):
    """Tree decomposition from an elimination order (indices into order_vertices)."""
    if n == 0:
        return TreeDecomposition(RootedTree({0: None}, 0), {0: frozenset()})
    pos = {v: i for i, v in enumerate(elim)}
    adj = list(adj)
    bags, parent = {}, {}
    for v in elim:
        nb = adj[v]
        bags[pos[v]] = frozenset([order_vertices[v]] + [order_vertices[u] for u in bits(nb)])
        parent[pos[v]] = min((pos[u] for u in bits(nb)), default=None)
        adj = _eliminate(adj, v)
    root = n - 1
    for t, p in parent.items():
        if p is None and t != root:
            parent[t] = root
    return TreeDecomposition(RootedTree(parent, root), bags)


def _check_solver_cap(g, caps):
    if caps is not None and g.number_of_nodes() > caps.solver:
        raise CapExceeded(f"{g.number_of_nodes()} vertices exceeds the solver cap {caps.solver}")


def exact_tree_decomposition(g, width_cap=None, caps=DEFAULT_CAPS):
    """Minimum-width decomposition, or None when tw(g) > width_cap.

    Decides 'tw <= w' for increasing w between a minor-min-width lower bound
    and a min-fill upper bound by depth-first search over elimination orders
    with safe (almost) simplicial eliminations and memoised failures.
    """
    _check_solver_cap(g, caps)
    order, adj = to_masks(g)
    n = len(order)
    if n == 0:
        return _td_from_order(order, adj, 0, [])
    lb = _mmw_lower_bound(adj, n)
    heur, ub = _min_fill_order(adj, n)
    ub = max(ub, 0)
    if width_cap is not None and lb > width_cap:
        return None
    elim = None
    for w in range(lb, ub):
        if width_cap is not None and w > width_cap:
            return None
        elim = _decide(adj, n, w)
        if elim is not None:
            break
    if elim is None:
        if width_cap is not None and ub > width_cap:
            return None
        elim = heur
    return _td_from_order(order, adj, n, elim)


def heuristic_tree_decomposition(g):
    """Min-fill elimination decomposition; valid but not necessarily minimum width."""
    order, adj = to_masks(g)
    n = len(order)
    if n == 0:
        return _td_from_order(order, adj, 0, [])
    heur, _ = _min_fill_order(adj, n)
    return _td_from_order(order, adj, n, heur)


def tree_decomposition(g, caps=DEFAULT_CAPS):
    """Exact decomposition within the solver cap, min-fill heuristic beyond it."""
    if caps is not None and g.number_of_nodes() > caps.solver:
        return heuristic_tree_decomposition(g)
    return exact_tree_decomposition(g, caps=caps)


def _component_graphs(g):
    return [g.subgraph(c) for c in nx.connected_components(g)]


def treewidth(g, caps=DEFAULT_CAPS):
    """Exact treewidth, taken component by component."""
    if g.number_of_nodes() == 0:
        return -1
    if g.number_of_edges() == g.number_of_nodes() - nx.number_connected_components(g):
        return 1 if g.number_of_edges() else 0
    return max(exact_tree_decomposition(c, caps=caps).width() for c in _component_graphs(g))


def treewidth_at_most(g, w, caps=DEFAULT_CAPS):
    if g.number_of_nodes() == 0:
        return True
    if g.number_of_edges() == g.number_of_nodes() - nx.number_connected_components(g):
        return w >= (1 if g.number_of_edges() else 0)
    for c in _component_graphs(g):
        if c.number_of_nodes() <= w + 1:
            continue
        if exact_tree_decomposition(c, width_cap=w, caps=caps) is None:
            return False
    return True


# ---------------------------------------------------------------- normal forms

def _fresh(existing):
    start = max((x for x in existing if isinstance(x, int)), default=-1) + 1
    return count(start)


def make_binary_rooted(td):
    """Every node gets at most two children by chaining copies of its bag."""
    parent = dict(td.tree.parent)
    bags = dict(td.bags)
    fresh = _fresh(bags)
    ch = td.tree.children()
    for x in td.tree.preorder():
        kids = ch[x]
        anchor = x
        while len(kids) > 2:
            y = next(fresh)
            bags[y] = bags[x]
            parent[y] = anchor
            parent[kids[0]] = anchor
            anchor, kids = y, kids[1:]
        for c in kids:
            parent[c] = anchor
    return TreeDecomposition(RootedTree(parent, td.root), bags)


def make_nice(td):
    """Nice form: empty leaves and root, introduce/forget steps of one vertex, binary joins."""
    td = make_binary_rooted(td)
    ch = td.tree.children()
    fresh = count(0)
    bags, parent = {}, {}

    def new(bag, kids):
        t = next(fresh)
        bags[t] = frozenset(bag)
        for c in kids:
            parent[c] = t
        return t

    def walk(top, target):
        """Chain of forgets then introduces from bag(top) to target."""
        cur = set(bags[top])
        for v in sorted(cur - target):
            cur.discard(v)
            top = new(cur, [top])
        for v in sorted(target - cur):
            cur.add(v)
            top = new(cur, [top])
        return top

    def build(x):
        target = set(td.bags[x])
        kids = ch[x]
        if not kids:
            return walk(new((), []), target)
        tops = [walk(build(c), target) for c in kids]
        if len(tops) == 1:
            return tops[0]
        return new(target, tops)

    top = walk(build(td.root), set())
    parent[top] = None
    return TreeDecomposition(RootedTree(parent, top), bags)


def nice_kind(td, t):
    ch = td.tree.children()[t]
    if not ch:
        return "leaf"
    if len(ch) == 2:
        return "join"
    a, b = td.bags[t], td.bags[ch[0]]
    if len(a) == len(b) + 1 and b < a:
        return "introduce"
    if len(b) == len(a) + 1 and a < b:
        return "forget"
    return "other"


def is_nice(td):
    ch = td.tree.children()
    if td.bags[td.root]:
        return False
    for t in td.nodes():
        kind = nice_kind(td, t)
        if kind == "other":
            return False
        if kind == "leaf" and td.bags[t]:
            return False
        if kind == "join" and any(td.bags[c] != td.bags[t] for c in ch[t]):
            return False
        if len(ch[t]) > 2:
            return False
    return True


# ---------------------------------------------------------------- cliques

def enumerate_cliques(g, td):
    """All non-empty cliques of g; each lies inside some bag."""
    out = set()
    for bag in td.bags.values():
        order, adj = to_masks(g.subgraph(bag), sorted(bag))
        k = len(order)
        # grow cliques by extending with larger indices only
        stack = [(0, 0, (1 << k) - 1)]
        while stack:
            clique, start, cand = stack.pop()
            if clique:
                out.add(frozenset(order[i] for i in bits(clique)))
            for i in bits(cand):
                if i >= start:
                    stack.append((clique | (1 << i), i + 1, cand & adj[i]))
    return out
