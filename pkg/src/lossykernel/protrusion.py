"""Protrusion decompositions: data model, checks, nice form, cover and product constructions.

Part indices are 1-based: index i names ``parts[i - 1]``, index 0 is the root bag.
"""
from dataclasses import dataclass, field, replace
import json

import networkx as nx

from .config import DEFAULT_CAPS
from .errors import InvalidInput
from .graph import canonical_form, graph_from_code
from .minors import is_minor
from .treewidth import lca_closure, tree_components, treewidth_at_most, verify_tree_decomposition


@dataclass(frozen=True)
class MinorPacking:
    """pattern code -> set of part indices, each part holding that pattern as a minor."""
    assignment: dict = field(default_factory=dict)
    c: int = 0

    def __post_init__(self):
        object.__setattr__(self, "assignment", {k: frozenset(v) for k, v in self.assignment.items()})

    def patterns(self):
        return sorted(self.assignment)

    def used(self):
        out = set()
        for idx in self.assignment.values():
            out |= idx
        return out


@dataclass(frozen=True)
class ProtrusionDecomposition:
    root_bag: frozenset
    parts: tuple
    alpha: int
    beta: int
    nice: bool = False
    packing: MinorPacking = None

    def __post_init__(self):
        object.__setattr__(self, "root_bag", frozenset(self.root_bag))
        object.__setattr__(self, "parts", tuple(frozenset(p) for p in self.parts))

    @property
    def ell(self):
        return len(self.parts)

    def part(self, i):
        if i == 0:
            return self.root_bag
        return self.parts[i - 1]

    def indices(self):
        return range(1, len(self.parts) + 1)

    def owner(self):
        """vertex -> index of the set containing it."""
        out = {v: 0 for v in self.root_bag}
        for i in self.indices():
            for v in self.part(i):
                out[v] = i
        return out


def trivial_decomposition(g):
    """P0 = V(G) and no parts."""
    return ProtrusionDecomposition(frozenset(g.nodes()), (), g.number_of_nodes(), 0, True)


def neighborhood(g, s):
    s = set(s)
    return {u for v in s for u in g[v] if u not in s}


def boundary(g, x):
    """Vertices of x with a neighbour outside x."""
    x = set(x)
    return {v for v in x if any(u not in x for u in g[v])}


# ---------------------------------------------------------------- checks

def validate(g, d, caps=DEFAULT_CAPS, check_packing=True):
    """List of violated conditions; empty means valid."""
    problems = []
    seen = set(d.root_bag)
    for i in d.indices():
        p = d.part(i)
        if not p:
            problems.append(f"part {i} is empty")
        if seen & p:
            problems.append(f"part {i} overlaps earlier sets")
        seen |= p
    if seen != set(g.nodes()):
        extra = seen - set(g.nodes())
        missing = set(g.nodes()) - seen
        if extra:
            problems.append(f"unknown vertices {sorted(extra)}")
        if missing:
            problems.append(f"uncovered vertices {sorted(missing)}")
    if max(len(d.root_bag), d.ell) > d.alpha:
        problems.append(f"max(|P0|, l) = {max(len(d.root_bag), d.ell)} exceeds alpha = {d.alpha}")
    for i in d.indices():
        p = d.part(i)
        nb = neighborhood(g, p)
        if not nb <= d.root_bag:
            problems.append(f"part {i} has neighbours {sorted(nb - d.root_bag)} outside the root bag")
        closed = p | nb
        if len(boundary(g, closed)) > d.beta:
            problems.append(f"part {i}: boundary of N[P] has {len(boundary(g, closed))} > beta vertices")
        if d.nice and len(nb) > d.beta:
            problems.append(f"part {i}: |N(P)| = {len(nb)} > beta although nice")
        if not treewidth_at_most(g.subgraph(closed), d.beta, caps=caps):
            problems.append(f"part {i}: treewidth of N[P] exceeds beta = {d.beta}")
    if check_packing and d.packing is not None:
        problems += packing_problems(g, d)
    return problems


def packing_problems(g, d):
    out = []
    pk = d.packing
    taken = {}
    for code, idx in pk.assignment.items():
        if len(idx) != pk.c:
            out.append(f"pattern {code} has {len(idx)} parts, expected {pk.c}")
        pattern = graph_from_code(code)
        for i in sorted(idx):
            if i < 1 or i > d.ell:
                out.append(f"pattern {code} refers to unknown part {i}")
                continue
            if i in taken:
                out.append(f"part {i} assigned to both {taken[i]} and {code}")
            taken[i] = code
            if not is_minor(g.subgraph(d.part(i)), pattern, caps=None):
                out.append(f"pattern {code} is not a minor of part {i}")
    return out


def is_valid(g, d, caps=DEFAULT_CAPS):
    return not validate(g, d, caps)


# ---------------------------------------------------------------- nice form

def make_nice_decomposition(g, d):
    """Move root vertices whose whole neighbourhood sits inside N[P_i] into P_i."""
    root = set(d.root_bag)
    parts = [set(p) for p in d.parts]
    for p in parts:
        closed = p | neighborhood(g, p)
        for v in sorted(closed - p):
            if v in root and all(u in closed for u in g[v]):
                root.discard(v)
                p.add(v)
    return replace(d, root_bag=frozenset(root), parts=tuple(frozenset(p) for p in parts), nice=True)


# ---------------------------------------------------------------- cover construction

def decomposition_from_cover(g, s, td):
    """Nice decomposition with s inside the root bag, built from the LCA closure of s's nodes."""
    if not verify_tree_decomposition(g, td):
        raise InvalidInput("tree decomposition is not valid for the graph")
    s = set(s)
    if not s <= set(g.nodes()):
        raise InvalidInput("cover vertices must belong to the graph")
    beta = max(td.width(), 1)
    if not s:
        parts = (frozenset(g.nodes()),) if g.number_of_nodes() else ()
        return ProtrusionDecomposition(frozenset(), parts, len(parts), 2 * (beta + 1), True)
    depth = td.tree.depth()
    chosen = []
    for v in sorted(s):
        holders = [t for t in td.nodes() if v in td.bags[t]]
        chosen.append(min(holders, key=lambda t: (depth[t], repr(t))))
    closure = lca_closure(td.tree, chosen)
    root = set()
    for t in closure:
        root |= td.bags[t]
    groups = {}
    for n_comp, (comp, nbrs) in enumerate(tree_components(td.tree, closure)):
        if len(nbrs) > 2:
            raise AssertionError("component of T - L with more than two neighbours")
        # two-neighbour components stay separate, one-neighbour ones group by that neighbour
        key = ("pair", n_comp) if len(nbrs) == 2 else ("single", next(iter(nbrs)))
        vs = set()
        for t in comp:
            vs |= td.bags[t]
        groups.setdefault(key, set()).update(vs - root)
    parts = [frozenset(p) for p in groups.values() if p]
    parts.sort(key=lambda p: min(p))
    alpha = 2 * (beta + 1) * len(s)
    return ProtrusionDecomposition(frozenset(root), tuple(parts), alpha, 2 * (beta + 1), True)


# ---------------------------------------------------------------- product

def _model_component(g, part, code):
    """The component of g[part] holding the pattern as a minor."""
    pattern = graph_from_code(code)
    for comp in sorted(nx.connected_components(g.subgraph(part)), key=min):
        if is_minor(g.subgraph(comp), pattern, caps=None):
            return frozenset(comp)
    raise InvalidInput(f"packing claims pattern {code} inside part without a model")


def product_with_packing(g, outer, inner, packing=None):
    """Refine outer by a decomposition of g - outer.P0, carrying inner's packing along."""
    packing = packing if packing is not None else inner.packing
    p0 = outer.root_bag
    rest = set(g.nodes()) - p0
    covered = set(inner.root_bag)
    for p in inner.parts:
        covered |= p
    if covered != rest:
        raise InvalidInput("inner decomposition must partition V(G) - P0")
    owner = outer.owner()
    assigned = {}
    if packing is not None:
        for code, idx in packing.assignment.items():
            for j in idx:
                assigned[j] = code
    # split parts so each is connected or carries no model
    pieces = []  # (vertex set, code or None, connected)
    for j in inner.indices():
        q = inner.part(j)
        comps = list(nx.connected_components(g.subgraph(q)))
        if j in assigned:
            m = _model_component(g, q, assigned[j])
            pieces.append((m, assigned[j]))
            if q - m:
                pieces.append((frozenset(q - m), None))
        else:
            pieces.append((frozenset(q), None))
    new_parts, new_assign = [], {}
    used = set()
    for q, code in pieces:
        if nx.is_connected(g.subgraph(q)):
            new_parts.append(frozenset(q))
            used |= q
            if code is not None:
                new_assign.setdefault(code, set()).add(len(new_parts))
            continue
        nb = neighborhood(g.subgraph(rest), q)
        touched = sorted({owner[v] for v in nb if owner[v] != 0})
        for i in touched:
            piece = q & outer.part(i)
            if piece:
                new_parts.append(frozenset(piece))
                used |= piece
    for i in outer.indices():
        left = outer.part(i) - inner.root_bag - used
        if left:
            new_parts.append(frozenset(left))
    alpha = outer.alpha + 2 * inner.alpha * max(inner.beta, 1)
    beta = outer.beta + inner.beta
    new_packing = None
    if packing is not None:
        new_packing = MinorPacking({c: frozenset(v) for c, v in new_assign.items()}, packing.c)
        for c in packing.assignment:
            new_packing.assignment.setdefault(c, frozenset())
    return ProtrusionDecomposition(p0 | inner.root_bag, tuple(new_parts), alpha, beta, True, new_packing)


# ---------------------------------------------------------------- export

def to_json(d):
    out = {
        "root_bag": sorted(d.root_bag),
        "parts": [sorted(p) for p in d.parts],
        "alpha": d.alpha,
        "beta": d.beta,
        "nice": d.nice,
        "packing": None,
    }
    if d.packing is not None:
        out["packing"] = {"c": d.packing.c,
                          "assignment": {code: sorted(idx) for code, idx in sorted(d.packing.assignment.items())}}
    return out


def from_json(obj):
    try:
        packing = None
        if obj.get("packing"):
            pk = obj["packing"]
            packing = MinorPacking({code: frozenset(idx) for code, idx in pk["assignment"].items()}, pk["c"])
        return ProtrusionDecomposition(frozenset(obj["root_bag"]), tuple(frozenset(p) for p in obj["parts"]),
                                       obj["alpha"], obj["beta"], obj.get("nice", False), packing)
    except (KeyError, TypeError, AttributeError) as e:
        raise InvalidInput(f"decomposition JSON does not match the schema: {e}") from None


def dumps(d):
    return json.dumps(to_json(d), sort_keys=True)


def to_dot(g, d):
    """DOT text with the root bag and every part as its own cluster."""
    lines = ["graph decomposition {", "  node [shape=circle];"]
    clusters = [("root", "P0", d.root_bag)] + [(f"part{i}", f"P{i}", d.part(i)) for i in d.indices()]
    for name, label, vs in clusters:
        lines.append(f"  subgraph cluster_{name} {{")
        lines.append(f'    label="{label}";')
        if name == "root":
            lines.append("    style=filled; color=lightgrey;")
        for v in sorted(vs):
            lines.append(f"    {v};")
        lines.append("  }")
    for u, v in sorted(tuple(sorted(e)) for e in g.edges()):
        lines.append(f"  {u} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pattern_code(pattern):
    return canonical_form(pattern, cap=None)
