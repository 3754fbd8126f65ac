"""Minor containment by dynamic programming over a nice tree decomposition.

A state at node t describes the part of a model living in the graph below t:
which pattern vertex each bag vertex belongs to (-1 for none), how the bag
vertices of one branch set are grouped by connectivity below t, which
pattern vertices are finished (all of their vertices forgotten) and which
pattern edges are already realised.  Exponential in width and pattern size,
linear in the number of nodes.
"""
from .treewidth import exact_tree_decomposition, make_nice


def _canon_groups(groups):
    relabel, out = {}, []
    for g in groups:
        if g < 0:
            out.append(-1)
        else:
            out.append(relabel.setdefault(g, len(relabel)))
    return tuple(out)


def _merge(groups, a_idx, b_idx):
    ga, gb = groups[a_idx], groups[b_idx]
    if ga == gb:
        return groups
    return [ga if g == gb else g for g in groups]


def _prune(states):
    """Keep, per (f, groups, closed), only edge masks not dominated by another."""
    by_key = {}
    for st, bp in states.items():
        by_key.setdefault(st[:3], []).append((st[3], st, bp))
    out = {}
    for items in by_key.values():
        items.sort(key=lambda x: -bin(x[0]).count("1"))
        kept = []
        for em, st, bp in items:
            if any(em | other == other for other in kept):
                continue
            kept.append(em)
            out[st] = bp
    return out


def dp_model(g, padj, anchors=None, td=None):
    """Branch sets {pattern index: set of host vertices} or None.

    g: host graph (already restricted to allowed vertices);
    padj: pattern adjacency masks; anchors: host vertex -> pattern index it
    must belong to.
    """
    k = len(padj)
    anchors = anchors or {}
    pedges = [(a, b) for a in range(k) for b in range(a + 1, k) if padj[a] >> b & 1]
    ebit = {}
    for i, (a, b) in enumerate(pedges):
        ebit[(a, b)] = ebit[(b, a)] = 1 << i
    inc = [0] * k
    for (a, b), bit in ebit.items():
        inc[a] |= bit
    full_closed = (1 << k) - 1
    full_edges = (1 << len(pedges)) - 1
    if k == 0:
        return {}
    if g.number_of_nodes() == 0:
        return None
    if td is None:
        td = make_nice(exact_tree_decomposition(g, caps=None))
    ch = td.tree.children()
    order = list(reversed(td.tree.preorder()))
    tables, alltab = {}, {}
    for t in order:
        bag = sorted(td.bags[t])
        kids = ch[t]
        states = {}
        if not kids:
            for v in bag:  # leaves are empty in nice form; tolerate otherwise
                raise ValueError("dp_model expects empty leaf bags")
            states[((), (), 0, 0)] = None
        elif len(kids) == 2:
            lt, rt = tables.pop(kids[0]), tables.pop(kids[1])
            right_by_f = {}
            for st in rt:
                right_by_f.setdefault(st[0], []).append(st)
            for ls in lt:
                f, lg, lc, le = ls
                for rs in right_by_f.get(f, ()):
                    _, rg, rc, re_ = rs
                    if lc & rc:
                        continue
                    groups = list(lg)
                    for i in range(len(f)):
                        for j in range(i + 1, len(f)):
                            if rg[i] >= 0 and rg[i] == rg[j]:
                                groups = _merge(groups, i, j)
                    st = (f, _canon_groups(groups), lc | rc, le | re_)
                    if st not in states:
                        states[st] = ("join", ls, rs)
        else:
            c = kids[0]
            cbag = sorted(td.bags[c])
            child = tables.pop(c)
            if len(bag) == len(cbag) + 1:
                v = next(x for x in bag if x not in td.bags[c])
                pos = bag.index(v)
                nbr_pos = [i for i, u in enumerate(cbag) if g.has_edge(u, v)]
                if v in anchors:
                    options = [anchors[v]]
                else:
                    options = [-1] + list(range(k))
                for cs in child:
                    f, grp, closed, em = cs
                    for a in options:
                        if a >= 0 and closed >> a & 1:
                            continue
                        nf = f[:pos] + (a,) + f[pos:]
                        if a < 0:
                            st = (nf, grp[:pos] + (-1,) + grp[pos:], closed, em)
                            if st not in states:
                                states[st] = ("intro", cs, v, a)
                            continue
                        groups = list(grp[:pos]) + [len(f) + 1] + list(grp[pos:])
                        nem = em
                        for i in nbr_pos:
                            j = i if i < pos else i + 1
                            b = f[i]
                            if b == a:
                                groups = _merge(groups, pos, j)
                            elif b >= 0 and (a, b) in ebit:
                                nem |= ebit[(a, b)]
                        st = (nf, _canon_groups(groups), closed, nem)
                        if st not in states:
                            states[st] = ("intro", cs, v, a)
            else:
                v = next(x for x in cbag if x not in td.bags[t])
                pos = cbag.index(v)
                for cs in child:
                    f, grp, closed, em = cs
                    a = f[pos]
                    nf = f[:pos] + f[pos + 1:]
                    ng = grp[:pos] + grp[pos + 1:]
                    if a >= 0:
                        alone = all(grp[i] != grp[pos] for i in range(len(f)) if i != pos)
                        if alone:
                            if any(x == a for x in nf):
                                continue  # a group of this branch set is cut off for good
                            if em & inc[a] != inc[a]:
                                continue  # edges at a can no longer be realised
                            closed |= 1 << a
                    st = (nf, _canon_groups(ng), closed, em)
                    if st not in states:
                        states[st] = ("forget", cs)
        tables[t] = alltab[t] = _prune(states)
    root = td.root
    goal = None
    for st in tables[root]:
        if st[2] == full_closed and st[3] == full_edges:
            goal = st
            break
    if goal is None:
        return None
    return _reconstruct(td, ch, alltab, goal, k)


def _reconstruct(td, ch, alltab, goal, k):
    sets = {a: set() for a in range(k)}
    stack = [(td.root, goal)]
    while stack:
        t, st = stack.pop()
        bp = alltab[t][st]
        if bp is None:
            continue
        kind = bp[0]
        kids = ch[t]
        if kind == "join":
            stack.append((kids[0], bp[1]))
            stack.append((kids[1], bp[2]))
        elif kind == "intro":
            _, cs, v, a = bp
            if a >= 0:
                sets[a].add(v)
            stack.append((kids[0], cs))
        else:
            stack.append((kids[0], bp[1]))
    return sets
