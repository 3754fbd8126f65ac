"""Graphs, boundaried graphs, text I/O and canonical forms for tiny graphs.

Graphs are plain ``networkx.Graph`` objects with integer vertex ids.  They are
never mutated after construction by this package; every operation returns a
new graph.  Hot loops convert to bitmask adjacency (``to_masks``).
"""
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
import random

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import CapExceeded, InvalidInput, ParseError


# ---------------------------------------------------------------- basics

def make_graph(vertices, edges=()):
    """Graph on ``vertices`` (an int n means 0..n-1) with the given edges."""
    g = nx.Graph()
    if isinstance(vertices, int):
        vertices = range(vertices)
    g.add_nodes_from(vertices)
    for u, v in edges:
        if u == v:
            raise InvalidInput(f"self-loop at {u}")
        g.add_edge(u, v)
    return g


def complete(n):
    return nx.complete_graph(n)


def path(n):
    return nx.path_graph(n)


def cycle(n):
    return nx.cycle_graph(n)


def star(leaves):
    return nx.star_graph(leaves)


def disjoint_union(*graphs):
    """Disjoint union, relabelled to 0..n-1 in argument order."""
    out = nx.Graph()
    off = 0
    for g in graphs:
        order = sorted(g.nodes())
        idx = {v: off + i for i, v in enumerate(order)}
        out.add_nodes_from(idx.values())
        out.add_edges_from((idx[u], idx[v]) for u, v in g.edges())
        off += len(order)
    return out


def induced(g, vertices):
    """Induced subgraph as an independent copy."""
    return g.subgraph(vertices).copy()


def delete(g, vertices):
    h = g.copy()
    h.remove_nodes_from([v for v in vertices if v in h])
    return h


def relabel_dense(g):
    """Copy of g on 0..n-1 (sorted order) plus the map new -> old."""
    order = sorted(g.nodes())
    idx = {v: i for i, v in enumerate(order)}
    return nx.relabel_nodes(g, idx, copy=True), order


def to_masks(g, order=None):
    """(order, adj) where adj[i] is the neighbour bitmask of order[i]."""
    if order is None:
        order = sorted(g.nodes())
    idx = {v: i for i, v in enumerate(order)}
    adj = [0] * len(order)
    for u, v in g.edges():
        if u in idx and v in idx:
            adj[idx[u]] |= 1 << idx[v]
            adj[idx[v]] |= 1 << idx[u]
    return order, adj


def bits(mask):
    """Indices of set bits, ascending."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_of(indices):
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def random_graph(n, p, seed):
    """Erdos-Renyi G(n, p), reproducible from ``seed``."""
    if not 0 <= p <= 1:
        raise InvalidInput("edge probability must lie in [0, 1]")
    rng = random.Random(seed)
    g = make_graph(n)
    for u, v in combinations(range(n), 2):
        if p >= 1 or rng.random() < p:
            g.add_edge(u, v)
    return g


# ---------------------------------------------------------------- boundaried graphs

@dataclass(frozen=True)
class BoundariedGraph:
    """A graph with an ordered boundary; label i+1 names ``boundary[i]``."""
    graph: nx.Graph
    boundary: tuple = ()

    def __post_init__(self):
        b = tuple(self.boundary)
        object.__setattr__(self, "boundary", b)
        if len(set(b)) != len(b):
            raise InvalidInput("boundary vertices must be distinct")
        missing = [v for v in b if v not in self.graph]
        if missing:
            raise InvalidInput(f"boundary vertices {missing} not in graph")

    @property
    def t(self):
        return len(self.boundary)

    @property
    def labeling(self):
        return {i + 1: v for i, v in enumerate(self.boundary)}

    def label_of(self, v):
        return self.boundary.index(v) + 1

    def interior(self):
        """The graph with its boundary vertices removed."""
        return delete(self.graph, self.boundary)

    def n(self):
        return self.graph.number_of_nodes()


def glue(h1, h2):
    """h1 (+) h2: identify equal-label boundary vertices, collapse parallel edges.

    Vertices of h1 keep their ids.  Non-boundary vertices of h2 keep theirs when
    they do not clash with h1, otherwise all of them are renumbered after
    max(h1) in sorted order.
    """
    if h1.t != h2.t:
        raise InvalidInput(f"boundary sizes differ: {h1.t} vs {h2.t}")
    out = h1.graph.copy()
    b2 = set(h2.boundary)
    inner2 = sorted(v for v in h2.graph.nodes() if v not in b2)
    ident = dict(zip(h2.boundary, h1.boundary))
    if any(v in out for v in inner2):
        start = max(out.nodes(), default=-1) + 1
        ident.update({v: start + i for i, v in enumerate(inner2)})
    else:
        ident.update({v: v for v in inner2})
    out.add_nodes_from(ident[v] for v in inner2)
    out.add_edges_from((ident[u], ident[v]) for u, v in h2.graph.edges())
    return out


def glue_with_map(h1, h2):
    """Like :func:`glue` but also returns the h2-vertex -> result-vertex map."""
    if h1.t != h2.t:
        raise InvalidInput(f"boundary sizes differ: {h1.t} vs {h2.t}")
    out = h1.graph.copy()
    b2 = set(h2.boundary)
    inner2 = sorted(v for v in h2.graph.nodes() if v not in b2)
    ident = dict(zip(h2.boundary, h1.boundary))
    if any(v in out for v in inner2):
        start = max(out.nodes(), default=-1) + 1
        ident.update({v: start + i for i, v in enumerate(inner2)})
    else:
        ident.update({v: v for v in inner2})
    out.add_nodes_from(ident[v] for v in inner2)
    out.add_edges_from((ident[u], ident[v]) for u, v in h2.graph.edges())
    return out, ident


# ---------------------------------------------------------------- text format

def _lines(text):
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("c ") or line == "c":
            continue
        yield line


def parse_graph(text):
    """Parse "p n m / e u v / b ..." text; returns Graph or BoundariedGraph."""
    n = m = None
    edges = []
    boundary = None
    for line in _lines(text):
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "p":
                if n is not None or len(parts) != 3:
                    raise ParseError(f"bad header line: {line!r}")
                n, m = int(parts[1]), int(parts[2])
            elif tag == "e":
                if len(parts) != 3:
                    raise ParseError(f"bad edge line: {line!r}")
                edges.append((int(parts[1]), int(parts[2])))
            elif tag == "b":
                if boundary is not None:
                    raise ParseError("more than one boundary line")
                boundary = [int(x) for x in parts[1:]]
            else:
                raise ParseError(f"unknown line: {line!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"non-integer field in {line!r}") from None
    if n is None:
        raise ParseError("missing 'p <n> <m>' header")
    if n < 0 or m < 0:
        raise ParseError("negative counts in header")
    if len(edges) != m:
        raise ParseError(f"header promises {m} edges, found {len(edges)}")
    g = make_graph(n)
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise ParseError(f"self-loop at {u}")
        if g.has_edge(u, v):
            raise ParseError(f"parallel edge ({u}, {v})")
        g.add_edge(u, v)
    if boundary is None:
        return g
    if any(not 0 <= v < n for v in boundary) or len(set(boundary)) != len(boundary):
        raise ParseError("boundary must list distinct in-range vertices")
    return BoundariedGraph(g, tuple(boundary))


def format_graph(g):
    """Inverse of :func:`parse_graph`; vertices are renumbered densely."""
    boundary = None
    if isinstance(g, BoundariedGraph):
        boundary, g = g.boundary, g.graph
    order = sorted(g.nodes())
    idx = {v: i for i, v in enumerate(order)}
    edges = sorted(tuple(sorted((idx[u], idx[v]))) for u, v in g.edges())
    out = [f"p {len(order)} {len(edges)}"]
    out += [f"e {u} {v}" for u, v in edges]
    if boundary is not None:
        out.append("b " + " ".join(str(idx[v]) for v in boundary))
    return "\n".join(out) + "\n"


def parse_family(text):
    blocks, cur = [], []
    for raw in text.splitlines():
        if raw.strip() == "---":
            blocks.append("\n".join(cur))
            cur = []
        else:
            cur.append(raw)
    blocks.append("\n".join(cur))
    family = [parse_graph(b) for b in blocks if list(_lines(b))]
    if not family:
        raise ParseError("family file contains no graphs")
    if any(isinstance(f, BoundariedGraph) for f in family):
        raise ParseError("family members cannot carry a boundary")
    return family


def format_family(family):
    return "---\n".join(format_graph(f) for f in family)


def read_graph(path):
    with open(path) as fh:
        return parse_graph(fh.read())


def read_family(path):
    with open(path) as fh:
        return parse_family(fh.read())


# ---------------------------------------------------------------- canonical forms

def _refine(nbrs, colors):
    """Colour refinement to the coarsest equitable partition finer than ``colors``."""
    n = len(colors)
    ncls = len(set(colors))
    while True:
        sig = [(colors[v], tuple(sorted(colors[u] for u in nbrs[v]))) for v in range(n)]
        rank = {s: i for i, s in enumerate(sorted(set(sig)))}
        colors = [rank[s] for s in sig]
        if len(rank) == ncls:
            return colors
        ncls = len(rank)


def _canon(adj, init):
    """Minimum adjacency code over the individualisation-refinement tree."""
    n = len(adj)
    nbrs = [bits(a) for a in adj]
    best = [None, None]

    def leaf(colors):
        pos = colors
        rows = [0] * n
        for v in range(n):
            r = 0
            for u in nbrs[v]:
                r |= 1 << pos[u]
            rows[pos[v]] = r
        code = tuple(rows)
        if best[0] is None or code < best[0]:
            best[0] = code
            best[1] = list(pos)

    def search(colors):
        colors = _refine(nbrs, colors)
        counts = {}
        for c in colors:
            counts[c] = counts.get(c, 0) + 1
        cells = [c for c, k in counts.items() if k > 1]
        if not cells:
            leaf(colors)
            return
        target = min(cells)
        cell = [v for v in range(n) if colors[v] == target]
        tried = []
        for v in cell:
            # twins (same neighbourhood apart from each other) give isomorphic subtrees
            if any((adj[u] & ~(1 << v)) == (adj[v] & ~(1 << u)) for u in tried):
                continue
            tried.append(v)
            new = [2 * c + (0 if w == v else 1) for w, c in enumerate(colors)]
            rank = {c: i for i, c in enumerate(sorted(set(new)))}
            search([rank[c] for c in new])

    rank = {c: i for i, c in enumerate(sorted(set(init)))}
    search([rank[c] for c in init])
    return best[0], best[1]


def _check_cap(n, cap):
    if cap is not None and n > cap:
        raise CapExceeded(f"{n} vertices exceeds the isomorphism cap {cap}")


def canonical_labeling(g, cap=DEFAULT_CAPS.iso):
    """(code, order) where order[i] is the vertex placed at canonical position i."""
    boundary = ()
    if isinstance(g, BoundariedGraph):
        boundary, g = g.boundary, g.graph
    n = g.number_of_nodes()
    _check_cap(n, cap)
    order, adj = to_masks(g)
    t = len(boundary)
    idx = {v: i for i, v in enumerate(order)}
    init = [t] * n
    for lab, v in enumerate(boundary):
        init[idx[v]] = lab
    if n == 0:
        return f"0:{t}:0", []
    rows, pos = _canon(adj, init)
    value = 0
    for i in range(n):
        value = (value << (n - i - 1)) | (rows[i] >> (i + 1))
    placed = [None] * n
    for v, p in enumerate(pos):
        placed[p] = order[v]
    return f"{n}:{t}:{value:x}", placed


def canonical_form(g, cap=DEFAULT_CAPS.iso):
    """Isomorphism-invariant string code (boundary labels fixed pointwise)."""
    return canonical_labeling(g, cap)[0]


def are_isomorphic(g1, g2, cap=DEFAULT_CAPS.iso):
    return canonical_form(g1, cap) == canonical_form(g2, cap)


def canonical_graph(g, cap=DEFAULT_CAPS.iso):
    """The canonical representative of g's class, on vertices 0..n-1.

    For boundaried graphs the boundary becomes 0..t-1 in label order.
    """
    code, placed = canonical_labeling(g, cap)
    base = g.graph if isinstance(g, BoundariedGraph) else g
    idx = {v: i for i, v in enumerate(placed)}
    out = make_graph(len(placed), [(idx[u], idx[v]) for u, v in base.edges()])
    if isinstance(g, BoundariedGraph):
        return BoundariedGraph(out, tuple(range(g.t)))
    return out


def graph_from_code(code):
    """Rebuild the canonical graph from a code produced by :func:`canonical_form`."""
    n_s, t_s, v_s = code.split(":")
    n, t, value = int(n_s), int(t_s), int(v_s, 16)
    g = make_graph(n)
    # upper-triangle bits were packed row by row, row i holding columns i+1..n-1
    shift = n * (n - 1) // 2
    for i in range(n):
        width = n - i - 1
        shift -= width
        row = (value >> shift) & ((1 << width) - 1)
        for j in range(width):
            if row >> j & 1:
                g.add_edge(i, i + 1 + j)
    if t:
        return BoundariedGraph(g, tuple(range(t)))
    return g


# ---------------------------------------------------------------- small graph catalogues

@lru_cache(maxsize=None)
def _atlas_by_size():
    out = {}
    for g in nx.graph_atlas_g():
        out.setdefault(g.number_of_nodes(), []).append(g)
    return out


@lru_cache(maxsize=None)
def graphs_on(n):
    """All graphs on exactly n vertices up to isomorphism, as canonical codes (sorted)."""
    if n <= 7:
        codes = {canonical_form(g) for g in _atlas_by_size().get(n, [])}
        return tuple(sorted(codes))
    seen = set()
    for code in graphs_on(n - 1):
        g = graph_from_code(code)
        for sub in range(1 << (n - 1)):
            h = g.copy()
            h.add_node(n - 1)
            h.add_edges_from((n - 1, u) for u in range(n - 1) if sub >> u & 1)
            seen.add(canonical_form(h, cap=max(n, DEFAULT_CAPS.iso)))
    return tuple(sorted(seen))


@lru_cache(maxsize=None)
def connected_catalog(h):
    """Canonical codes of all connected graphs on 1..h vertices, in canonical order."""
    out = []
    for n in range(1, h + 1):
        out.extend(c for c in graphs_on(n) if nx.is_connected(graph_from_code(c)))
    return tuple(out)


@lru_cache(maxsize=None)
def all_small_graphs(h):
    """Canonical codes of all graphs on 1..h vertices."""
    out = []
    for n in range(1, h + 1):
        out.extend(graphs_on(n))
    return tuple(out)
