"""Packing/covering, the greedy multi-packing marker, decompositions with the dichotomy
property, solution normalisation and decomposition compression."""
from dataclasses import dataclass
import logging

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import InvalidInput, InvariantViolation
from .graph import canonical_form, connected_catalog, graph_from_code
from .minors import MinorModel, find_minor_model, first_model, is_minor, is_minor_free
from .protrusion import (MinorPacking, ProtrusionDecomposition, decomposition_from_cover,
                         make_nice_decomposition, neighborhood, product_with_packing)
from .treewidth import (lca_closure, make_binary_rooted, tree_components, tree_decomposition,
                        verify_tree_decomposition)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PackOrCoverResult:
    packing: tuple = None   # disjoint MinorModels
    cover: frozenset = None

    @property
    def is_packing(self):
        return self.packing is not None


def _as_pattern(pattern):
    return graph_from_code(pattern) if isinstance(pattern, str) else pattern


def _code(pattern):
    return pattern if isinstance(pattern, str) else canonical_form(pattern, cap=None)


# ---------------------------------------------------------------- packing or cover

def pack_or_cover(g, pattern, l, td):
    """l disjoint models of a connected pattern, or a set of <= (w+1)(l-1) vertices hitting all models.

    Repeatedly walks down from the root to a node whose subtree still holds a model
    but whose children's subtrees do not, harvests a model there and cuts at its bag.
    """
    pattern = _as_pattern(pattern)
    if pattern.number_of_nodes() and not nx.is_connected(pattern):
        raise InvalidInput("pack_or_cover needs a connected pattern")
    if not verify_tree_decomposition(g, td):
        raise InvalidInput("tree decomposition is not valid for the graph")
    below = td.below()
    ch = td.tree.children()
    cut, models = set(), []

    def holds(t):
        return is_minor(g.subgraph(below[t] - cut), pattern, caps=None)

    while len(models) < l:
        if not holds(td.root):
            return PackOrCoverResult(cover=frozenset(cut))
        t = td.root
        while True:
            nxt = next((c for c in ch[t] if holds(c)), None)
            if nxt is None:
                break
            t = nxt
        m = find_minor_model(g.subgraph(below[t] - cut), pattern, caps=None)
        models.append(m)
        cut |= td.bags[t]
    return PackOrCoverResult(packing=tuple(models))


# ---------------------------------------------------------------- multi packing

def _exclusive(td, comp, others_cache=None):
    """Vertices appearing only in bags of the node set comp."""
    inside = set()
    for t in comp:
        inside |= td.bags[t]
    outside = set()
    for t in td.nodes():
        if t not in comp:
            outside |= td.bags[t]
    return inside - outside


def multi_packing(g, patterns, k, h, td=None, initial_packings=None, catalog_size=None):
    """Nice decomposition of g with a (patterns, k+h)-minor packing, or None when the
    marking loop runs out of models (possible only below the full packing threshold).

    patterns: connected graphs or their codes.  initial_packings, when given, maps
    each pattern code to a list of disjoint vertex sets (models) used to check the
    remaining-packing invariant.
    """
    codes = sorted({_code(p) for p in patterns})
    c = k + h
    if td is None:
        td = tree_decomposition(g)
    if not verify_tree_decomposition(g, td):
        raise InvalidInput("tree decomposition is not valid for the graph")
    if not codes:
        parts = (frozenset(g.nodes()),) if g.number_of_nodes() else ()
        return ProtrusionDecomposition(frozenset(), parts, len(parts), max(td.width(), 0), True,
                                       MinorPacking({}, c))
    td = make_binary_rooted(td)
    tree = td.tree
    beta = max(td.width(), 0)
    ch = tree.children()
    depth = tree.depth()
    order = tree.preorder()
    pats = {code: graph_from_code(code) for code in codes}
    n_catalog = catalog_size if catalog_size is not None else len(connected_catalog(h))

    marked_m, marked_l = [], set()
    score = {code: 0 for code in codes}
    assigned = []  # (node set of component, code)

    def region(t):
        """Strict descendants of t outside subtrees of marked nodes, split by child."""
        comps = []
        for c0 in ch[t]:
            if c0 in marked_m or c0 in marked_l:
                continue
            comp, stack = set(), [c0]
            while stack:
                x = stack.pop()
                comp.add(x)
                stack.extend(y for y in ch[x] if y not in marked_m and y not in marked_l)
            comps.append(comp)
        return comps

    def under_marked(t):
        x = t
        while x is not None:
            if x in marked_m or x in marked_l:
                return True
            x = tree.parent[x]
        return False

    def root_component():
        if tree.root in marked_m or tree.root in marked_l:
            return set()
        comp, stack = set(), [tree.root]
        while stack:
            x = stack.pop()
            comp.add(x)
            stack.extend(y for y in ch[x] if y not in marked_m and y not in marked_l)
        return comp

    step = 0
    while any(score[cd] < c for cd in codes):
        open_codes = [cd for cd in codes if score[cd] < c]
        best = None
        for t in sorted(order, key=lambda x: -depth[x]):
            if under_marked(t):
                continue
            for comp in region(t):
                excl = _exclusive(td, comp)
                sub = g.subgraph(excl)
                hit = next((cd for cd in open_codes if is_minor(sub, pats[cd], caps=None)), None)
                if hit is not None:
                    best = (t, comp, hit)
                    break
            if best is not None:
                break
        if best is None:
            return None
        t, comp, hit = best
        # first scenario: an unmarked LCA of two marked nodes strictly below t
        t_hat = None
        for i, a in enumerate(marked_m):
            for b in marked_m[i + 1:]:
                x = tree.lca(a, b, depth)
                if x in marked_l or x in marked_m or x == t:
                    continue
                y = x
                while y is not None and y != t:
                    y = tree.parent[y]
                if y == t and (t_hat is None or depth[x] > depth[t_hat]):
                    t_hat = x
        if t_hat is not None:
            marked_l.add(t_hat)
        else:
            marked_m.append(t)
            assigned.append((frozenset(comp), hit))
            score[hit] += 1
        step += 1
        _check_marking(tree, marked_m, marked_l, score, step, ch)
        if initial_packings is not None:
            _check_remaining(td, initial_packings, score, c, beta, n_catalog, k, h, step, root_component())
    closure = lca_closure(tree, marked_m) | marked_l
    root = set()
    for t in closure:
        root |= td.bags[t]
    comps = tree_components(tree, closure)
    assigned_sets = {frozenset(cm): cd for cm, cd in assigned}
    parts, assign = [], {cd: set() for cd in codes}
    groups = {}
    for comp, nbrs in comps:
        key = frozenset(comp)
        vs = frozenset(_exclusive(td, comp))
        if key in assigned_sets:
            if not vs:
                raise InvariantViolation("assigned component lost its vertices")
            parts.append(vs)
            assign[assigned_sets[key]].add(len(parts))
            continue
        if len(nbrs) > 2:
            raise InvariantViolation("component of T - L with more than two neighbours")
        groups.setdefault(frozenset(nbrs), set()).update(vs)
    if len(assign) and any(len(v) != c for v in assign.values()):
        raise InvariantViolation("assigned components changed during the final closure")
    for key in sorted(groups, key=lambda s: sorted(map(repr, s))):
        if groups[key]:
            parts.append(frozenset(groups[key]))
    alpha = max(len(root), len(parts))
    return ProtrusionDecomposition(frozenset(root), tuple(parts), alpha, 2 * beta + 2, True,
                                   MinorPacking({cd: frozenset(v) for cd, v in assign.items()}, c))


def _check_marking(tree, marked_m, marked_l, score, step, ch):
    if len(marked_m) + len(marked_l) != step:
        raise InvariantViolation("marked node count differs from the step count")
    if not marked_l <= lca_closure(tree, marked_m):
        raise InvariantViolation("L is not inside the LCA closure of M")
    if sum(score.values()) != len(marked_m):
        raise InvariantViolation("score sum differs from |M|")
    removed = set(marked_m) | marked_l
    for comp, nbrs in tree_components(tree, removed):
        if tree.root not in comp and len(nbrs) > 2:
            raise InvariantViolation("non-root component with more than two marked neighbours")


def _check_remaining(td, initial_packings, score, c, beta, n_catalog, k, h, step, root_comp):
    excl = _exclusive(td, root_comp) if root_comp else set()
    need = 3 * (beta + 1) * (2 * n_catalog * (k + h) - step)
    for code, models in initial_packings.items():
        if score.get(code, c) >= c:
            continue
        inside = sum(1 for m in models if set(m) <= excl)
        if inside < need:
            raise InvariantViolation(f"only {inside} models of {code} left in the root component, need {need}")


# ---------------------------------------------------------------- dichotomy construction

def full_k_hat(beta, h, k):
    return 6 * (beta + 1) * len(connected_catalog(h)) * (k + h)


def construct_dichotomy(g, d, k, h, k_hat=None, caps=DEFAULT_CAPS):
    """Nice decomposition with the (k, h)-dichotomy property.

    k_hat is the packing size asked from pack_or_cover; None uses the full
    threshold 6(w+1)|catalog|(k+h).  When multi_packing cannot complete (only
    possible below that threshold) the remaining patterns are covered instead.
    """
    cur = make_nice_decomposition(g, d)
    catalog = list(connected_catalog(h))
    todo = list(catalog)

    def rest_of(dec):
        rest = g.subgraph(set(g.nodes()) - dec.root_bag).copy()
        return rest, tree_decomposition(rest, caps=caps)

    changed = True
    while changed and todo:
        changed = False
        rest, td = rest_of(cur)
        width = max(td.width(), 1)
        limit = k_hat if k_hat is not None else full_k_hat(width, h, k)
        for code in list(todo):
            res = pack_or_cover(rest, graph_from_code(code), limit, td)
            if res.is_packing:
                continue
            todo.remove(code)
            if res.cover:
                inner = decomposition_from_cover(rest, res.cover, td)
                cur = product_with_packing(g, cur, inner, None)
            changed = True
            break
    packing = MinorPacking({}, k + h)
    if todo:
        rest, td = rest_of(cur)
        inner = multi_packing(rest, todo, k, h, make_binary_rooted(td))
        while inner is None:
            # below the full threshold the marker can stall: cover the first pattern fully
            code = todo.pop(0)
            res = pack_or_cover(rest, graph_from_code(code), rest.number_of_nodes() + 1, td)
            if res.cover:
                cur = product_with_packing(g, cur, decomposition_from_cover(rest, res.cover, td), None)
                rest, td = rest_of(cur)
            todo = [cd for cd in todo if is_minor(rest, graph_from_code(cd), caps=None)]
            inner = multi_packing(rest, todo, k, h, make_binary_rooted(td)) if todo else None
            if not todo:
                break
        if inner is not None and todo:
            cur = product_with_packing(g, cur, inner, inner.packing)
            packing = cur.packing
    return ProtrusionDecomposition(cur.root_bag, cur.parts, max(cur.alpha, len(cur.root_bag), cur.ell),
                                   cur.beta, True, packing)


def dichotomy_problems(g, d, k, h):
    """Exhaustive check: each connected graph on <= h vertices is either absent from
    g - P0 or owns exactly k+h disjoint parts containing it."""
    out = []
    rest = g.subgraph(set(g.nodes()) - d.root_bag)
    pk = d.packing or MinorPacking({}, k + h)
    seen = set()
    for code in connected_catalog(h):
        f = graph_from_code(code)
        if not is_minor(rest, f, caps=None):
            continue
        idx = pk.assignment.get(code)
        if idx is None or len(idx) != k + h:
            out.append(f"{code} is a minor of G - P0 without k+h reserved parts")
            continue
        if seen & idx:
            out.append(f"{code} shares parts with another pattern")
        seen |= idx
        for i in idx:
            if not is_minor(g.subgraph(d.part(i)), f, caps=None):
                out.append(f"part {i} reserved for {code} does not contain it")
    return out


# ---------------------------------------------------------------- normalisation

def normalize_bound(d, h):
    return d.beta * (h * len(connected_catalog(h)) + 1)


def normalize_solution(g, d, packing, s, family, k, bound=None, caps=DEFAULT_CAPS):
    """Swap heavy part intersections for neighbourhoods of untouched reserve parts."""
    s = set(s)
    h = max(f.number_of_nodes() for f in family)
    if len(s) > k:
        raise InvalidInput("solution larger than k")
    h_star = g.copy()
    h_star.remove_nodes_from(s)
    if not is_minor_free(h_star, family, caps=None):
        raise InvalidInput("solution is not an F-deletion set")
    if packing is None:
        raise InvalidInput("normalisation needs the dichotomy packing")
    limit = normalize_bound(d, h) if bound is None else bound
    rest = g.subgraph(set(g.nodes()) - d.root_bag)
    present = [code for code in connected_catalog(h) if is_minor(rest, graph_from_code(code), caps=None)]
    changed = True
    while changed:
        changed = False
        for i in d.indices():
            heavy = s & d.part(i)
            if len(heavy) <= limit:
                continue
            reserve = set()
            for code in present:
                free = sorted(j for j in packing.assignment.get(code, ()) if not (s & d.part(j)))
                if len(free) < h:
                    raise InvariantViolation(f"pattern {code} lacks h untouched reserve parts")
                for j in free[:h]:
                    reserve |= neighborhood(g, d.part(j))
            new = (s - d.part(i)) | neighborhood(g, d.part(i)) | reserve
            if len(new) >= len(s):
                if bound is None:
                    raise InvariantViolation("swap did not shrink the solution on a nice decomposition")
                continue
            s = new
            changed = True
    return frozenset(s)


# ---------------------------------------------------------------- compression

def compress_decomposition(g, d, k, family, h=None, caps=DEFAULT_CAPS, k_hat=None, space_mode="family"):
    """Replace every part of a dichotomy decomposition by a small equivalent stand-in.

    Returns (G', lift) where lift maps an F-deletion set of G' to one of G.
    """
    from .replacer import CompressionLift, EncoderSpace, replace_protrusion, ReplacerSkip
    from .solvers import FDeletion
    h = h if h is not None else max(f.number_of_nodes() for f in family)
    hd = min(h, caps.pattern) if caps is not None else h
    dec = construct_dichotomy(g, d, k, hd, k_hat=k_hat, caps=caps)
    d_star = dec.beta * (hd * len(connected_catalog(hd)) + 1)
    budget = min(d_star, k)
    handles, skipped = [], []
    cur = g
    parts = [set(p) for p in dec.parts]
    if caps is not None and budget > caps.budget:
        skipped.append(("all", f"budget {budget} exceeds the cap {caps.budget}"))
        log.info("compress: budget %d over cap, identity", budget)
    else:
        for i, part in enumerate(parts):
            nb = neighborhood(cur, part)
            x = part | nb
            try:
                space = EncoderSpace.for_family(family, r=len(nb), d=budget, h=hd, mode=space_mode, caps=caps)
                cur, handle = replace_protrusion(cur, x, space, boundary=tuple(sorted(nb)))
            except ReplacerSkip as e:
                skipped.append((i + 1, str(e)))
                log.info("compress: part %d kept (%s)", i + 1, e)
                continue
            if not handle.is_identity():
                handles.append(handle)
    problem = FDeletion(family, caps)
    lift = CompressionLift(g, k, handles, problem)
    lift.decomposition = dec
    lift.skipped = skipped
    lift.budget = budget
    return cur, lift
