"""Protrusion replacement: rooted-minor signatures, representatives and solution lifting.

A boundaried graph H is summarised by which rooted queries survive each small
deletion: for every query set R that some deletion (any boundary subset plus at
most d interior vertices) leaves realised, the least number of interior vertices
doing so.  Together with the folio of the interior this decides the class.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
import hashlib
import json
import logging
import os
import tempfile
import threading

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import CapExceeded, InvalidInput, LiftError
from .graph import BoundariedGraph, bits, canonical_form, graph_from_code, graphs_on, make_graph, to_masks
from .minors import RootedMinorQuery, _pattern_masks, compute_h_folio, is_minor_free, search_model
from .treewidth import treewidth

log = logging.getLogger(__name__)


class ReplacerSkip(CapExceeded):
    """The protrusion is outside what the replacer handles; callers keep it as is."""


# ---------------------------------------------------------------- query spaces

def label_partitions(r):
    """Partitions of every subset of labels 1..r, each as a tuple of frozensets."""
    out = []
    labels = list(range(1, r + 1))

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for p in partitions(rest):
            yield [[first]] + p
            for i in range(len(p)):
                yield p[:i] + [[first] + p[i]] + p[i + 1:]

    for size in range(r + 1):
        for sub in combinations(labels, size):
            for p in partitions(list(sub)):
                parts = tuple(sorted((frozenset(x) for x in p), key=lambda s: min(s)))
                out.append(parts)
    return out


def _query(pattern, parts):
    return RootedMinorQuery(pattern, parts, tuple(range(len(parts))))


@lru_cache(maxsize=None)
def _family_queries(family_codes, r):
    """Queries a split model of a family member can leave on the protrusion side."""
    found = {}
    for code in family_codes:
        f = graph_from_code(code)
        fv = sorted(f.nodes())
        fedges = [tuple(sorted(e)) for e in f.edges()]
        for parts in label_partitions(r):
            a = len(parts)
            for phi_a in product(fv, repeat=a):
                avail = [v for v in fv if v not in phi_a]
                for u in range(len(avail) + 1):
                    for unanch in combinations(avail, u):
                        if a + u == 0:
                            continue
                        phi = list(phi_a) + list(unanch)
                        n = len(phi)
                        # per family edge: no realisation here, or one piece pair realising it
                        options = []
                        for x, y in fedges:
                            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
                                     if {phi[i], phi[j]} == {x, y}]
                            options.append([None] + pairs)
                        for choice in product(*options):
                            edges = {c for c in choice if c is not None}
                            ok = True
                            for i in range(a, n):
                                for nb in f[phi[i]]:
                                    if not any(e for e in edges if i in e and phi[e[0] + e[1] - i] == nb):
                                        ok = False
                                        break
                                if not ok:
                                    break
                            if not ok:
                                continue
                            q = _query(make_graph(n, edges), parts)
                            found.setdefault(q.key(), q)
    return found


@lru_cache(maxsize=None)
def _full_queries(p, r):
    found = {}
    for n in range(1, p + 1):
        for code in graphs_on(n):
            pat = graph_from_code(code)
            for parts in label_partitions(r):
                if len(parts) > n:
                    continue
                for pl in combinations(range(n), len(parts)):
                    from itertools import permutations
                    for perm in permutations(pl):
                        q = RootedMinorQuery(pat, parts, perm)
                        found.setdefault(q.key(), q)
    return found


def _boundary_queries(r):
    found = {}
    for lab in range(1, r + 1):
        q = _query(make_graph(1), (frozenset([lab]),))
        found[q.key()] = q
    return found


@dataclass(frozen=True)
class EncoderSpace:
    r: int
    p: int
    h: int
    d: int
    mode: str
    family_codes: tuple
    queries: tuple = field(repr=False, compare=False)
    tw_bound: int = None
    caps: object = field(default=DEFAULT_CAPS, repr=False, compare=False)

    @classmethod
    def for_family(cls, family, r, d, h=None, mode="family", caps=DEFAULT_CAPS, tw_bound=None):
        codes = tuple(sorted(canonical_form(f, cap=None) for f in family))
        pmax = max(f.number_of_nodes() for f in family)
        h = h if h is not None else pmax
        if caps is not None:
            if r > caps.boundary:
                raise ReplacerSkip(f"boundary size {r} exceeds the cap {caps.boundary}")
            if d > caps.budget:
                raise ReplacerSkip(f"deletion budget {d} exceeds the cap {caps.budget}")
            if h > caps.pattern:
                raise ReplacerSkip(f"folio bound {h} exceeds the pattern cap {caps.pattern}")
        p = pmax + r
        if mode == "family":
            qs = dict(_family_queries(codes, r))
        elif mode == "full":
            if caps is not None and p > caps.query:
                raise ReplacerSkip(f"query size {p} exceeds the cap {caps.query}")
            qs = dict(_full_queries(p, r))
        else:
            raise InvalidInput(f"unknown query mode {mode!r}")
        qs.update(_boundary_queries(r))
        ordered = tuple(qs[k] for k in sorted(qs, key=repr))
        return cls(r, p, h, d, mode, codes, ordered, tw_bound, caps)

    def key(self):
        return f"{self.mode}|{','.join(self.family_codes)}|r{self.r}|p{self.p}|h{self.h}|d{self.d}"


# ---------------------------------------------------------------- signatures

@dataclass(frozen=True)
class Signature:
    f_map: dict
    folio: frozenset

    def digest(self):
        items = sorted((sorted(r), v) for r, v in self.f_map.items())
        blob = json.dumps([items, sorted(self.folio)])
        return hashlib.sha256(blob.encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Signature) and self.f_map == other.f_map and self.folio == other.folio

    def __hash__(self):
        return hash(self.digest())


def _check_caps(hg, space):
    caps = space.caps
    if hg.t != space.r:
        raise InvalidInput(f"boundary size {hg.t} differs from the space's r = {space.r}")
    if caps is not None and hg.n() > caps.replacer:
        raise ReplacerSkip(f"{hg.n()} vertices exceeds the replacer cap {caps.replacer}")


def strip_boundary_edges(hg):
    g = hg.graph.copy()
    b = list(hg.boundary)
    g.remove_edges_from((u, v) for i, u in enumerate(b) for v in b[i + 1:] if g.has_edge(u, v))
    return BoundariedGraph(g, hg.boundary)


def _query_data(space):
    """Per query: (pattern adjacency masks, [(pattern index, labels pinned to it)])."""
    data = getattr(space, "_qdata", None)
    if data is None:
        data = []
        for q in space.queries:
            porder, padj = _pattern_masks(q.pattern)
            pos = {v: i for i, v in enumerate(porder)}
            pins = [(pos[q.placement[j]], tuple(sorted(part))) for j, part in enumerate(q.anchor_partition)]
            data.append((padj, pins))
        object.__setattr__(space, "_qdata", data)
    return data


class _MaskHost:
    """Bitmask view of a boundaried graph for repeated rooted searches."""

    def __init__(self, hg):
        self.order, self.adj = to_masks(hg.graph)
        self.index = {v: i for i, v in enumerate(self.order)}
        self.full = (1 << len(self.order)) - 1
        self.label_mask = {i + 1: 1 << self.index[v] for i, v in enumerate(hg.boundary)}
        self.boundary_mask = 0
        for m in self.label_mask.values():
            self.boundary_mask |= m

    def mask(self, vertices):
        out = 0
        for v in vertices:
            out |= 1 << self.index[v]
        return out

    def vertices(self, mask):
        return frozenset(self.order[i] for i in bits(mask))

    def search(self, qd, dmask):
        """Witness mask of the query in the host minus dmask, or None."""
        padj, pins = qd
        anchors = [0] * len(padj)
        used = 0
        for a, labels in pins:
            for lab in labels:
                anchors[a] |= self.label_mask[lab]
        for m in anchors:
            used |= m
        if used & dmask:
            return None
        avail = self.full & ~dmask & ~(self.boundary_mask & ~used)
        if bin(avail).count("1") < len(padj):
            return None
        res = search_model(self.adj, avail, padj, anchors, symmetric=not pins)
        if res is None:
            return None
        w = 0
        for m in res:
            w |= m
        return w


def realized(hg, deleted, space, candidates=None):
    """Indices of queries realised by hg - deleted."""
    mh = _MaskHost(hg)
    qd = _query_data(space)
    dmask = mh.mask(deleted)
    idx = range(len(qd)) if candidates is None else candidates
    return frozenset(i for i in idx if mh.search(qd[i], dmask) is not None)


def _deletion_masks(mh, hg, d):
    interior = [mh.index[v] for v in sorted(hg.graph.nodes()) if v not in set(hg.boundary)]
    bidx = [mh.index[v] for v in hg.boundary]
    out = []
    for bsize in range(len(bidx) + 1):
        for bsub in combinations(bidx, bsize):
            bm = sum(1 << i for i in bsub)
            for isize in range(min(d, len(interior)) + 1):
                for isub in combinations(interior, isize):
                    out.append((bm, sum(1 << i for i in isub)))
    out.sort(key=lambda x: (bin(x[0] | x[1]).count("1"), x))
    return out


def realized_table(hg, space, d=None):
    """(boundary mask, interior mask) -> realised query indices.

    Realised sets only shrink as the deletion grows, and a witness that
    avoids the extra vertex is reused instead of searching again.
    """
    d = space.d if d is None else d
    mh = _MaskHost(hg)
    qd = _query_data(space)
    table, witness = {}, {}
    for bm, im in _deletion_masks(mh, hg, d):
        s = bm | im
        if not s:
            wit = {}
            for i in range(len(qd)):
                w = mh.search(qd[i], 0)
                if w is not None:
                    wit[i] = w
        else:
            subs = [(s & ~(1 << v), 1 << v) for v in bits(s)]
            cand = None
            for sub, _ in subs:
                r = witness[sub]
                cand = set(r) if cand is None else cand & set(r)
            wit = {}
            for q in sorted(cand):
                reuse = next((witness[sub][q] for sub, vb in subs if not witness[sub][q] & vb), None)
                if reuse is None:
                    reuse = mh.search(qd[q], s)
                if reuse is not None:
                    wit[q] = reuse
        witness[s] = wit
        table[(bm, im)] = frozenset(wit)
    return table


def signature_of(hg, space):
    hg = strip_boundary_edges(hg)
    _check_caps(hg, space)
    f_map = {}
    for (bm, im), r in realized_table(hg, space).items():
        cost = bin(im).count("1")
        if r not in f_map or cost < f_map[r]:
            f_map[r] = cost
    folio = compute_h_folio(hg.interior(), space.h, caps=None).members
    return Signature(f_map, folio)


def equivalent(h1, h2, space):
    if h1.t != h2.t:
        raise InvalidInput("boundary sizes differ")
    return signature_of(h1, space) == signature_of(h2, space)


# ---------------------------------------------------------------- representatives

_cache_lock = threading.Lock()
_memory_cache = {}


def _cache_path():
    root = os.environ.get("LKL_CACHE_DIR")
    if not root:
        return None
    os.makedirs(root, exist_ok=True)
    return os.path.join(root, "representatives.json")


def _cache_load():
    path = _cache_path()
    if path is None or not os.path.exists(path):
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError):
        log.warning("representative cache at %s is unreadable, ignoring it", path)
        return {}


def _cache_get(key):
    with _cache_lock:
        if key in _memory_cache:
            return _memory_cache[key]
        disk = _cache_load()
        if key in disk:
            _memory_cache[key] = disk[key]
            return disk[key]
    return None


def _cache_put(key, value):
    with _cache_lock:
        _memory_cache[key] = value
        path = _cache_path()
        if path is None:
            return
        data = _cache_load()
        data[key] = value
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, sort_keys=True)
        os.replace(tmp, path)


def clear_memory_cache():
    with _cache_lock:
        _memory_cache.clear()


def _from_code(code, t):
    g = graph_from_code(code)
    graph = g.graph if isinstance(g, BoundariedGraph) else g
    return BoundariedGraph(graph, tuple(range(t)))


def _extensions(c):
    """One more interior vertex attached to any subset of the existing vertices."""
    g = c.graph
    n = g.number_of_nodes()
    nodes = sorted(g.nodes())
    for mask in range(1 << n):
        h = g.copy()
        h.add_node(n)
        h.add_edges_from((n, nodes[i]) for i in range(n) if mask >> i & 1)
        yield BoundariedGraph(h, c.boundary)


def _boundary_profile(hg, space):
    """Realised query set for each boundary-only deletion, keyed by label subset."""
    mh = _MaskHost(hg)
    qd = _query_data(space)
    out = {}
    for size in range(hg.t + 1):
        for labs in combinations(range(1, hg.t + 1), size):
            dm = 0
            for lab in labs:
                dm |= mh.label_mask[lab]
            out[labs] = frozenset(i for i in range(len(qd)) if mh.search(qd[i], dm) is not None)
    return out


def _exceeds(cand, space, profile):
    """True when cand already realises a query H does not, for some boundary deletion."""
    mh = _MaskHost(cand)
    qd = _query_data(space)
    for labs, allowed in profile.items():
        dm = 0
        for lab in labs:
            dm |= mh.label_mask[lab]
        for i in range(len(qd)):
            if i not in allowed and mh.search(qd[i], dm) is not None:
                return True
    return False


def find_representative(hg, space):
    """Smallest equivalent boundaried graph, by canonical enumeration in increasing size.

    Returns hg itself when nothing smaller is equivalent (or nothing within the
    candidate cap is).
    """
    hg = strip_boundary_edges(hg)
    _check_caps(hg, space)
    sig = signature_of(hg, space)
    caps = space.caps
    # a fallback answer is only valid for callers that accept fallbacks
    limits = "" if caps is None else f"|c{caps.candidates}|v{caps.representative}|f{int(caps.identity_fallback)}"
    key = f"{space.key()}{limits}|{sig.digest()}"
    hit = _cache_get(key)
    if hit is not None:
        rep = _from_code(hit, hg.t)
        return rep if rep.n() < hg.n() else hg
    limit = hg.n() - 1
    if caps is not None and limit > caps.representative:
        limit = caps.representative
    profile = _boundary_profile(hg, space)
    tw_h = treewidth(hg.graph, caps=None)
    t = hg.t
    start = BoundariedGraph(make_graph(t), tuple(range(t)))
    level = {canonical_form(start, cap=None): start}
    size = t
    examined = 0
    budget = caps.candidates if caps is not None else None
    while size <= limit:
        for code in sorted(level):
            cand = level[code]
            if _boundary_profile(cand, space) == profile and signature_of(cand, space) == sig:
                _cache_put(key, code)
                log.debug("representative with %d vertices for a %d-vertex protrusion", cand.n(), hg.n())
                return cand
        if size == limit:
            break
        nxt = {}
        for code in sorted(level):
            for ext in _extensions(level[code]):
                ecode = canonical_form(ext, cap=None)
                if ecode in nxt:
                    continue
                nxt[ecode] = None
                examined += 1
                if budget is not None and examined > budget:
                    log.info("representative search stopped after %d candidates; keeping the protrusion", budget)
                    if not caps.identity_fallback:
                        raise CapExceeded("representative search exceeded the candidate budget")
                    _cache_put(key, canonical_form(hg, cap=None))
                    return hg
                # every filter below is monotone under adding vertices and edges
                if _exceeds(ext, space, profile):
                    continue
                if treewidth(ext.graph, caps=None) > tw_h:
                    continue
                if not compute_h_folio(ext.interior(), space.h, caps=None).members <= sig.folio:
                    continue
                nxt[ecode] = _from_code(ecode, t)
        level = {c: v for c, v in nxt.items() if v is not None}
        size += 1
    if caps is not None and not caps.identity_fallback and hg.n() - 1 > limit:
        raise CapExceeded("no representative within the candidate cap")
    log.info("no smaller representative within %d vertices; keeping the protrusion", limit)
    _cache_put(key, canonical_form(hg, cap=None))
    return hg


# ---------------------------------------------------------------- replacement

@dataclass
class LiftHandle:
    original: BoundariedGraph      # H on the original vertex ids, boundary edges stripped
    replacement: BoundariedGraph   # the stand-in on the new graph's vertex ids
    space: EncoderSpace
    graph_after: nx.Graph = None
    family: tuple = ()

    @property
    def d(self):
        return self.space.d

    def is_identity(self):
        return self.original is self.replacement


def replace_protrusion(g, x, space, boundary=None):
    """Swap the protrusion G[x] for its representative; returns (G', handle)."""
    x = set(x)
    if not x <= set(g.nodes()):
        raise InvalidInput("protrusion vertices must belong to the graph")
    true_boundary = {v for v in x if any(u not in x for u in g[v])}
    if boundary is None:
        boundary = tuple(sorted(true_boundary))
    boundary = tuple(boundary)
    if not true_boundary <= set(boundary) or not set(boundary) <= x:
        raise InvalidInput("boundary must contain every vertex of x with outside neighbours")
    if len(boundary) != space.r:
        raise InvalidInput(f"boundary has {len(boundary)} vertices, space expects {space.r}")
    if space.caps is not None and len(x) > space.caps.replacer:
        raise ReplacerSkip(f"{len(x)} vertices exceeds the replacer cap {space.caps.replacer}")
    if space.tw_bound is not None and treewidth(g.subgraph(x), caps=None) > space.tw_bound:
        raise InvalidInput(f"treewidth of the protrusion exceeds {space.tw_bound}")
    hg = strip_boundary_edges(BoundariedGraph(g.subgraph(x).copy(), boundary))
    family = tuple(graph_from_code(c) for c in space.family_codes)
    rep = find_representative(hg, space)
    if rep is hg or rep.n() >= hg.n():
        return g, LiftHandle(hg, hg, space, g, family)
    out = g.copy()
    out.remove_nodes_from(v for v in x if v not in set(boundary))
    start = max(g.nodes(), default=-1) + 1
    ident = {rep.boundary[i]: boundary[i] for i in range(len(boundary))}
    inner = sorted(v for v in rep.graph.nodes() if v not in set(rep.boundary))
    ident.update({v: start + j for j, v in enumerate(inner)})
    out.add_nodes_from(ident[v] for v in inner)
    out.add_edges_from((ident[u], ident[v]) for u, v in rep.graph.edges())
    placed = BoundariedGraph(nx.relabel_nodes(rep.graph, ident), boundary)
    return out, LiftHandle(hg, placed, space, out, family)


def lift_through_replacement(handle, s_prime, check=True):
    """Map a solution of the replaced graph to one of the original of no larger size."""
    s_prime = frozenset(s_prime)
    if check and handle.family:
        rest = handle.graph_after.copy()
        rest.remove_nodes_from(s_prime)
        if not is_minor_free(rest, handle.family, caps=None):
            raise LiftError("solution is not feasible for the replaced graph")
    if handle.is_identity():
        return s_prime
    rep, orig = handle.replacement, handle.original
    bset = set(rep.boundary)
    rep_inner = {v for v in rep.graph.nodes() if v not in bset}
    inside = s_prime & rep_inner
    # even with nothing deleted inside, the original must realise the same query set
    if len(inside) > handle.d:
        raise LiftError(f"{len(inside)} deletions inside the stand-in exceed the budget {handle.d}")
    b_del = s_prime & bset
    target = frozenset(realized(rep, b_del | inside, handle.space))
    orig_inner = sorted(v for v in orig.graph.nodes() if v not in bset)
    for size in range(len(inside) + 1):
        for sub in combinations(orig_inner, size):
            if frozenset(realized(orig, b_del | set(sub), handle.space)) == target:
                return (s_prime - rep_inner) | set(sub)
    raise LiftError("no deletion inside the original protrusion realises the same query set")


class CompressionLift:
    """Lift through a sequence of replacements; oversized solutions fall back to a feasible set."""

    def __init__(self, graph, k, handles, problem):
        self.graph = graph
        self.k = k
        self.handles = list(handles)
        self.problem = problem

    def __call__(self, s_prime):
        from .solvers import greedy_solution
        s = frozenset(s_prime)
        if len(s) > self.k:
            # capped value is k+1 either way; any feasible set of G will do
            return greedy_solution(self.problem, self.graph)
        for handle in reversed(self.handles):
            s = lift_through_replacement(handle, s, check=False)
        return s
