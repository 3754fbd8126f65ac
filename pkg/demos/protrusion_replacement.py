"""
Replacing a protrusion by a smaller equivalent one
==================================================

A long path hanging off a triangle looks the same to every solution with a
small budget as a much shorter stand-in.  We swap it, solve, and lift back.
"""

# %%
import networkx as nx

from lossykernel.graph import BoundariedGraph, complete
from lossykernel.replacer import (EncoderSpace, find_representative, lift_through_replacement,
                                  replace_protrusion, signature_of)
from lossykernel.solvers import FDeletion

K3 = [complete(3)]
g = complete(4)
nx.add_path(g, [3] + list(range(4, 14)))      # pendant path of 10 vertices off vertex 3
space = EncoderSpace.for_family(K3, r=1, d=1, h=3)
print(len(space.queries), "rooted queries in the space")

# %%
hg = BoundariedGraph(g.subgraph(range(3, 14)).copy(), (3,))
sig = signature_of(hg, space)
print("folio:", sorted(sig.folio))
print("deletion signature:", {tuple(sorted(r)): c for r, c in sig.f_map.items()})

# %%
rep = find_representative(hg, space)
print("representative:", rep.n(), "vertices, edges", sorted(rep.graph.edges()))

# %%
g2, handle = replace_protrusion(g, set(range(3, 14)), space, boundary=(3,))
problem = FDeletion(K3, None)
print(g.number_of_nodes(), "->", g2.number_of_nodes(), "vertices")
s2 = problem.solve(g2, 3)
s = lift_through_replacement(handle, s2)
print("solution on the small graph", sorted(s2), "lifted", sorted(s), "feasible", problem.is_solution(g, s))
