"""Minor models, minor containment, h-folios and rooted-minor queries.

The search grows branch sets one vertex at a time.  A partial assignment is
repaired at its first defect (a disconnected branch set, an unrealised pattern
edge, an unseeded pattern vertex); every repair branches over all ways an
eventual model could extend the current partial one, so the search is
complete.  Visited partial assignments are memoised.
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import networkx as nx
from networkx.algorithms.isomorphism import GraphMatcher

from .config import DEFAULT_CAPS
from .errors import CapExceeded, InvalidInput
from .graph import BoundariedGraph, all_small_graphs, bits, canonical_form, graph_from_code, to_masks


@dataclass(frozen=True)
class MinorModel:
    branch_sets: dict

    def vertices(self):
        out = set()
        for b in self.branch_sets.values():
            out |= b
        return frozenset(out)

    def is_valid(self, host, pattern):
        seen = set()
        for a in pattern.nodes():
            b = self.branch_sets.get(a)
            if not b or not set(b) <= set(host.nodes()):
                return False
            if seen & set(b):
                return False
            seen |= set(b)
            if not nx.is_connected(host.subgraph(b)):
                return False
        for a, c in pattern.edges():
            ba, bc = self.branch_sets[a], self.branch_sets[c]
            if not any(y in bc for x in ba for y in host[x]):
                return False
        return True


@dataclass(frozen=True)
class Folio:
    members: frozenset
    h: int

    def __contains__(self, code):
        return code in self.members

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class RootedMinorQuery:
    """Pattern plus a partition of some boundary labels.

    ``placement`` optionally pins part i to pattern vertex placement[i]; without
    it, any injective placement of the parts will do.
    """
    pattern: nx.Graph
    anchor_partition: tuple = ()
    placement: tuple = None

    def __post_init__(self):
        parts = tuple(frozenset(p) for p in self.anchor_partition)
        object.__setattr__(self, "anchor_partition", parts)
        seen = set()
        for p in parts:
            if not p or seen & p:
                raise InvalidInput("anchor parts must be non-empty and disjoint")
            seen |= p
        if self.placement is not None:
            pl = tuple(self.placement)
            object.__setattr__(self, "placement", pl)
            if len(pl) != len(parts) or len(set(pl)) != len(pl):
                raise InvalidInput("placement must map parts injectively")
            if any(a not in self.pattern for a in pl):
                raise InvalidInput("placement refers to unknown pattern vertices")

    def labels(self):
        return frozenset().union(*self.anchor_partition) if self.anchor_partition else frozenset()

    def key(self):
        """Hashable identity, canonical under pattern isomorphism."""
        g = self.pattern
        if self.placement is None:
            return ("any", canonical_form(g, cap=None), tuple(sorted(tuple(sorted(p)) for p in self.anchor_partition)))
        # colour pattern vertices by the label set pinned to them
        pinned = {a: tuple(sorted(p)) for a, p in zip(self.placement, self.anchor_partition)}
        order = sorted(g.nodes(), key=lambda a: (0, pinned[a]) if a in pinned else (1, ()))
        best = None
        nodes = list(g.nodes())
        for perm in _pinned_perms(order, pinned):
            pos = {a: i for i, a in enumerate(perm)}
            edges = tuple(sorted(tuple(sorted((pos[x], pos[y]))) for x, y in g.edges()))
            if best is None or edges < best:
                best = edges
        tags = tuple(pinned[a] for a in order if a in pinned)
        return ("at", len(nodes), tags, best)


def _pinned_perms(order, pinned):
    fixed = [a for a in order if a in pinned]
    free = [a for a in order if a not in pinned]
    for rest in permutations(free):
        yield fixed + list(rest)


# ---------------------------------------------------------------- search engine

def _component(adj, start, within):
    seen = start
    frontier = start
    while frontier:
        nxt = 0
        for i in bits(frontier):
            nxt |= adj[i]
        nxt &= within & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def _connected(adj, m):
    if not m:
        return True
    low = m & -m
    return _component(adj, low, m) == m


def _nbr(adj, m):
    out = 0
    for i in bits(m):
        out |= adj[i]
    return out & ~m


def _pattern_order(padj, anchors):
    k = len(padj)
    done, order = set(), []
    starts = sorted(range(k), key=lambda a: (0 if anchors[a] else 1, -bin(padj[a]).count("1"), a))
    for s in starts:
        if s in done:
            continue
        queue = [s]
        done.add(s)
        while queue:
            a = queue.pop(0)
            order.append(a)
            nb = sorted(bits(padj[a]), key=lambda b: (0 if anchors[b] else 1, -bin(padj[b]).count("1"), b))
            for b in nb:
                if b not in done:
                    done.add(b)
                    queue.append(b)
    return order


@lru_cache(maxsize=None)
def _orbits_cached(padj):
    k = len(padj)
    g = nx.Graph()
    g.add_nodes_from(range(k))
    g.add_edges_from((a, b) for a in range(k) for b in bits(padj[a]) if a < b)
    orbit = {a: {a} for a in range(k)}
    for iso in GraphMatcher(g, g).isomorphisms_iter():
        for a, b in iso.items():
            orbit[a].add(b)
    return orbit


def _orbits(padj):
    return _orbits_cached(tuple(padj))


def _reduce_host(adj, avail, anchored, min_pdeg):
    """Drop non-anchored vertices that no model needs (low degree for the pattern)."""
    if min_pdeg < 1:
        return avail
    changed = True
    while changed:
        changed = False
        for v in bits(avail & ~anchored):
            d = bin(adj[v] & avail).count("1")
            if d == 0 or (min_pdeg >= 2 and d <= 1):
                avail &= ~(1 << v)
                changed = True
    return avail


def search_model(adj, avail, padj, anchors=None, symmetric=True, limit=None):
    """Branch sets (list of masks, one per pattern vertex) or None.

    adj: host adjacency masks; avail: vertices allowed in branch sets;
    padj: pattern adjacency masks over 0..k-1; anchors[a]: host vertices that
    must belong to branch set a.
    """
    k = len(padj)
    if k == 0:
        return []
    anchors = list(anchors) if anchors else [0] * k
    anchored = 0
    for m in anchors:
        if m & anchored:
            return None
        anchored |= m
    if anchored & ~avail:
        return None
    pedges = [(a, b) for a in range(k) for b in bits(padj[a]) if a < b]
    min_pdeg = min(bin(m).count("1") for m in padj)
    avail = _reduce_host(adj, avail, anchored, min_pdeg)
    if bin(avail).count("1") < k:
        return None
    host_edges = sum(bin(adj[v] & avail).count("1") for v in bits(avail)) // 2
    if host_edges < len(pedges):
        return None

    order = _pattern_order(padj, anchors)
    pos = {a: i for i, a in enumerate(order)}
    pedges.sort(key=lambda e: (max(pos[e[0]], pos[e[1]]), min(pos[e[0]], pos[e[1]])))
    unanchored = not anchored
    orbit = _orbits(padj) if (symmetric and unanchored and k > 1) else None
    seen = set()
    budget = [limit]

    def defect(B, free):
        for a in order:
            if B[a] and not _connected(adj, B[a]):
                return ("conn", a)
        for a, b in pedges:
            if B[a] and B[b] and not (_nbr(adj, B[a]) & B[b]):
                return ("edge", a, b)
        for a in order:
            if not B[a]:
                for b in order:
                    if B[b] and padj[a] >> b & 1:
                        return ("adj", a, b)
        for a in order:
            if not B[a]:
                return ("new", a)
        return None

    def feasible(B, free, excl):
        empties = sum(1 for m in B if not m)
        if bin(free).count("1") < empties:
            return False
        for a in range(k):
            m = B[a]
            if m and not _connected(adj, m):
                if _component(adj, m & -m, m | (free & ~excl[a])) & m != m:
                    return False
        for a, b in pedges:
            if B[a] and B[b] and not (_nbr(adj, B[a]) & B[b]):
                both = B[a] | B[b]
                reach = _component(adj, B[a] & -B[a], both | free)
                if reach & both != both:
                    return False
        return True

    def dfs(B, excl, avail_now):
        key = (tuple(B), tuple(excl), avail_now)
        if key in seen:
            return None
        seen.add(key)
        if budget[0] is not None:
            budget[0] -= 1
            if budget[0] < 0:
                raise _SearchBudget()
        used = 0
        for m in B:
            used |= m
        free = avail_now & ~used
        if not feasible(B, free, excl):
            return None
        d = defect(B, free)
        if d is None:
            return list(B)
        kind = d[0]
        if kind == "conn":
            a = d[1]
            comp = _component(adj, B[a] & -B[a], B[a])
            for v in bits(_nbr(adj, comp) & free & ~excl[a]):
                B2 = list(B)
                B2[a] |= 1 << v
                r = dfs(B2, excl, avail_now)
                if r is not None:
                    return r
            return None
        if kind == "edge":
            a, b = d[1], d[2]
            fa = _nbr(adj, B[a]) & free
            fb = _nbr(adj, B[b]) & free
            if bin(fb).count("1") < bin(fa).count("1"):
                a, b, fa = b, a, fb
            for v in bits(fa):
                for target in (a, b):
                    if excl[target] >> v & 1:
                        continue
                    B2 = list(B)
                    B2[target] |= 1 << v
                    r = dfs(B2, excl, avail_now)
                    if r is not None:
                        return r
            return None
        if kind == "adj":
            a, b = d[1], d[2]
            for v in bits(_nbr(adj, B[b]) & free):
                for target, seed in ((a, True), (b, False)):
                    if excl[target] >> v & 1:
                        continue
                    B2 = list(B)
                    B2[target] = (1 << v) if seed else (B2[target] | (1 << v))
                    r = dfs(B2, excl, avail_now)
                    if r is not None:
                        return r
            return None
        a = d[1]
        cands = sorted(bits(free & ~excl[a]), key=lambda v: (-bin(adj[v] & avail_now).count("1"), v))
        root_level = used == 0
        excl = list(excl)
        for v in cands:
            if not (avail_now >> v & 1):
                continue
            B2 = list(B)
            B2[a] = 1 << v
            r = dfs(B2, tuple(excl), avail_now)
            if r is not None:
                return r
            if root_level and orbit is not None and len(orbit[a]) == k:
                # vertex-transitive pattern: v lies in no model at all
                avail_now &= ~(1 << v)
                if bin(avail_now).count("1") < k:
                    return None
            else:
                for a2 in (orbit[a] if (orbit is not None and root_level) else (a,)):
                    excl[a2] |= 1 << v
        return None

    B0 = list(anchors)
    try:
        return dfs(B0, tuple([0] * k), avail)
    except RecursionError:  # pragma: no cover - depth is bounded by n
        raise


class _SearchBudget(Exception):
    pass


# ---------------------------------------------------------------- public API

def _pattern_masks(pattern):
    porder, padj = to_masks(pattern)
    return porder, padj


def _check_caps(host, pattern, caps):
    if caps is None:
        return
    if pattern.number_of_nodes() > caps.pattern:
        raise CapExceeded(f"pattern with {pattern.number_of_nodes()} vertices exceeds the pattern cap {caps.pattern}")
    if host.number_of_nodes() > caps.solver:
        raise CapExceeded(f"host with {host.number_of_nodes()} vertices exceeds the solver cap {caps.solver}")


def _shortest_cycle(g):
    """Vertices of a shortest cycle in g, in cyclic order, or None."""
    best = None
    for s in g.nodes():
        dist, par = {s: 0}, {s: None}
        queue = [s]
        for x in queue:
            if best is not None and 2 * dist[x] + 1 >= len(best):
                break
            for y in g[x]:
                if y not in dist:
                    dist[y], par[y] = dist[x] + 1, x
                    queue.append(y)
                elif par[x] != y and dist[y] >= dist[x]:
                    # walk both sides back to their meeting point
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


def is_triangle(pattern):
    return pattern.number_of_nodes() == 3 and pattern.number_of_edges() == 3


def is_forest(g):
    n = g.number_of_nodes()
    return n == 0 or g.number_of_edges() == n - nx.number_connected_components(g)


@lru_cache(maxsize=None)
def _pattern_info(code):
    from .treewidth import treewidth
    f = graph_from_code(code)
    k = f.number_of_nodes()
    connected = k > 0 and nx.is_connected(f)
    return {
        "tw": treewidth(f, caps=None) if k else -1,
        "connected": connected,
        "biconnected": connected and k >= 3 and nx.is_biconnected(f),
        "min_degree": min((d for _, d in f.degree()), default=0),
    }


def _series_reduce(g):
    """Delete degree <= 1 vertices and suppress degree-2 ones; returns (graph, merged)."""
    g = g.copy()
    merged = {v: {v} for v in g.nodes()}
    changed = True
    while changed:
        changed = False
        for v in sorted(g.nodes()):
            if v not in g:
                continue
            d = g.degree(v)
            if d <= 1:
                g.remove_node(v)
                changed = True
            elif d == 2:
                a, b = sorted(g[v])
                g.remove_node(v)
                g.add_edge(a, b)
                merged[a] |= merged[v]
                changed = True
    return g, merged


def _generic_model(host, pattern):
    order, adj = to_masks(host)
    porder, padj = _pattern_masks(pattern)
    res = search_model(adj, (1 << len(order)) - 1, padj)
    if res is None:
        return None
    return {porder[a]: frozenset(order[i] for i in bits(m)) for a, m in enumerate(res)}


def _pieces(host, info, k, e):
    """Host regions that must contain a model of a connected pattern on its own."""
    comps = [host.subgraph(c) for c in nx.connected_components(host)]
    if info["biconnected"]:
        comps = [host.subgraph(b) for c in comps for b in nx.biconnected_components(c)]
    comps = [c for c in comps if c.number_of_nodes() >= k and c.number_of_edges() >= e]
    comps.sort(key=lambda c: (-c.number_of_nodes(), min(c.nodes())))
    return comps


DP_MAX_WIDTH = 3
DIRECT_MAX_HOST = 10  # below this many vertices plain branching beats the DP


@lru_cache(maxsize=4096)
def _nice_td_cached(key):
    from .treewidth import exact_tree_decomposition, make_nice
    nodes, edges = key
    g = nx.Graph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    td = exact_tree_decomposition(g, caps=None)
    return td.width(), (make_nice(td) if td.width() <= DP_MAX_WIDTH else None)


def host_decomposition(g):
    """(treewidth, nice decomposition or None when too wide for the DP)."""
    key = (tuple(sorted(g.nodes())), tuple(sorted(tuple(sorted(e)) for e in g.edges())))
    return _nice_td_cached(key)


def _model_in(host, pattern, info, anchors=None):
    """Branch sets {pattern vertex: frozenset} of a model in host, or None."""
    from .minor_dp import dp_model
    width, td = host_decomposition(host)
    if width < info["tw"]:
        return None
    porder, padj = _pattern_masks(pattern)
    ppos = {a: i for i, a in enumerate(porder)}
    if td is not None and host.number_of_nodes() > DIRECT_MAX_HOST:
        anc = {v: ppos[a] for v, a in (anchors or {}).items()}
        sets = dp_model(host, padj, anc, td)
        if sets is None:
            return None
        return {porder[a]: frozenset(b) for a, b in sets.items()}
    order, adj = to_masks(host)
    idx = {v: i for i, v in enumerate(order)}
    amask = [0] * len(porder)
    for v, a in (anchors or {}).items():
        amask[ppos[a]] |= 1 << idx[v]
    res = search_model(adj, (1 << len(order)) - 1, padj, amask, symmetric=not anchors)
    if res is None:
        return None
    return {porder[a]: frozenset(order[i] for i in bits(m)) for a, m in enumerate(res)}


def find_minor_model(host, pattern, caps=DEFAULT_CAPS):
    """A model of pattern in host, or None when pattern is not a minor of host."""
    _check_caps(host, pattern, caps)
    k = pattern.number_of_nodes()
    if k == 0:
        return MinorModel({})
    if k > host.number_of_nodes() or pattern.number_of_edges() > host.number_of_edges():
        return None
    if is_triangle(pattern):
        cyc = _shortest_cycle(host)
        if cyc is None:
            return None
        a, b, c = sorted(pattern.nodes())
        return MinorModel({a: frozenset([cyc[0]]), b: frozenset([cyc[1]]), c: frozenset(cyc[2:])})
    if pattern.number_of_edges() == 0:
        vs = sorted(host.nodes())[:k]
        return MinorModel({a: frozenset([v]) for a, v in zip(sorted(pattern.nodes()), vs)})
    info = _pattern_info(canonical_form(pattern, cap=None))
    if info["connected"]:
        for piece in _pieces(host, info, k, pattern.number_of_edges()):
            sets = _model_in(piece, pattern, info)
            if sets is not None:
                return MinorModel(sets)
        return None
    # disconnected: every component must fit somewhere before the joint search
    for comp in nx.connected_components(pattern):
        if not is_minor(host, pattern.subgraph(comp).copy(), caps=None):
            return None
    sets = _model_in(host, pattern, info)
    return None if sets is None else MinorModel(sets)


def is_minor(host, pattern, caps=DEFAULT_CAPS):
    if is_triangle(pattern):
        return not is_forest(host)
    return find_minor_model(host, pattern, caps) is not None


def minimal_model(host, pattern, model):
    """Shrink a model greedily until no single vertex can be dropped."""
    sets = {a: set(b) for a, b in model.branch_sets.items()}
    changed = True
    while changed:
        changed = False
        for a in sorted(sets, key=lambda x: -len(sets[x])):
            for v in sorted(sets[a], key=lambda x: host.degree(x)):
                if len(sets[a]) == 1:
                    break
                trial = dict(sets)
                trial[a] = sets[a] - {v}
                if MinorModel({x: frozenset(y) for x, y in trial.items()}).is_valid(host, pattern):
                    sets = trial
                    changed = True
    return MinorModel({a: frozenset(b) for a, b in sets.items()})


def find_small_model(host, pattern, caps=DEFAULT_CAPS):
    """A vertex-minimal model (shortest cycle for the triangle); used for branching."""
    m = find_minor_model(host, pattern, caps)
    if m is None or is_triangle(pattern):
        return m
    return minimal_model(host, pattern, m)


def is_minor_free(g, family, caps=DEFAULT_CAPS):
    return not any(is_minor(g, f, caps) for f in family)


def first_model(g, family, caps=DEFAULT_CAPS):
    """Smallest-found model over the family members, or None if g is F-minor-free."""
    best = None
    for f in family:
        m = find_small_model(g, f, caps)
        if m is not None and (best is None or len(m.vertices()) < len(best.vertices())):
            best = m
    return best


# ---------------------------------------------------------------- folios

@lru_cache(maxsize=None)
def _one_step_minors(code):
    """Codes of graphs obtained by deleting one vertex or one edge (non-empty only)."""
    g = graph_from_code(code)
    out = set()
    for v in g.nodes():
        if g.number_of_nodes() > 1:
            h = g.copy()
            h.remove_node(v)
            out.add(canonical_form(h, cap=None))
    for e in g.edges():
        h = g.copy()
        h.remove_edge(*e)
        out.add(canonical_form(h, cap=None))
    return frozenset(out)


def compute_h_folio(g, h, caps=DEFAULT_CAPS):
    """Canonical codes of all graphs on 1..h vertices that are minors of g."""
    if caps is not None and h > caps.pattern:
        raise CapExceeded(f"folio bound {h} exceeds the pattern cap {caps.pattern}")
    found = set()
    n, m = g.number_of_nodes(), g.number_of_edges()
    for code in all_small_graphs(h):
        f = graph_from_code(code)
        if f.number_of_nodes() > n or f.number_of_edges() > m:
            continue
        if not _one_step_minors(code) <= found:
            continue
        if is_minor(g, f, caps=None):
            found.add(code)
    return Folio(frozenset(found), h)


# ---------------------------------------------------------------- rooted queries

def rooted_search(h_star, deleted, query, caps=DEFAULT_CAPS):
    """Branch sets of a rooted model, or None."""
    if not isinstance(h_star, BoundariedGraph):
        raise InvalidInput("rooted queries need a boundaried host")
    pattern = query.pattern
    if caps is not None and pattern.number_of_nodes() > max(caps.pattern, caps.query, caps.representative):
        raise CapExceeded(f"query pattern with {pattern.number_of_nodes()} vertices exceeds the caps")
    labels = h_star.labeling
    for p in query.anchor_partition:
        for lab in p:
            if lab not in labels:
                raise InvalidInput(f"anchor label {lab} not on the boundary")
    deleted = set(deleted)
    used_labels = query.labels()
    keep = [v for v in h_star.graph.nodes()
            if v not in deleted and not (v in h_star.boundary and h_star.label_of(v) not in used_labels)]
    parts = []
    for p in query.anchor_partition:
        vs = [labels[lab] for lab in p]
        if any(v in deleted for v in vs):
            return None
        parts.append(vs)
    host = h_star.graph.subgraph(keep)
    k = pattern.number_of_nodes()
    if k > host.number_of_nodes():
        return None
    info = _pattern_info(canonical_form(pattern, cap=None))
    pnodes = sorted(pattern.nodes())
    if query.placement is not None:
        placements = [tuple(query.placement)]
    else:
        placements = permutations(pnodes, len(parts))
    for pl in placements:
        anchors = {v: a for vs, a in zip(parts, pl) for v in vs}
        sets = _model_in(host, pattern, info, anchors)
        if sets is not None:
            return sets
    return None


def witnesses_rooted_minor(h_star, deleted, query, caps=DEFAULT_CAPS):
    """Does h_star - deleted hold a model with each anchor part inside one branch set
    and no unanchored boundary vertex used?"""
    return rooted_search(h_star, deleted, query, caps) is not None
