"""
Lossy kernel, step by step
==========================

Feedback vertex set (delete vertices until no triangle minor is left) on a
small planted instance.  We run the reduction stages by hand, then the driver.
"""

# %%
import random

import networkx as nx

from lossykernel.graph import complete
from lossykernel.harness import audit_kernel, planted_instance
from lossykernel.lifting import LiftChain
from lossykernel.pipeline import (PipelineConfig, apply_lrr1, apply_lrr2, build_flow_graph,
                                  build_near_protrusion, group_components)

K3 = [complete(3)]
rng = random.Random(4)
g = planted_instance(rng, 16, K3, 1, planted=3, attach=(3, 5))
k = 3
cfg = PipelineConfig(family=K3, eta=1)
print(g.number_of_nodes(), "vertices,", g.number_of_edges(), "edges")

# %%
# X is an optimum solution; Z cuts off poorly connected X-pairs
np_ = build_near_protrusion(g, k, cfg)
print("X =", sorted(np_.x), " Z =", sorted(np_.z))

# %%
# components of G - (X + Z) touching too many X-vertices force those vertices into the solution
chain = LiftChain()
g1, k1, np1, fired = apply_lrr1(g, k, np_, cfg, chain)
print("deleted by the first rule:", fired, " budget now", k1)

# %%
p0 = np1.x | np1.z
d = group_components(g1, p0, cfg)
flow = build_flow_graph(g1, p0, k1, cfg.eta)
print("parts:", [sorted(p) for p in d.parts])
print("flow edges added:", sorted(set(map(frozenset, flow.edges())) - set(map(frozenset, g1.edges()))))

# %%
g2, k2, d2, simp, non = apply_lrr2(g1, k1, d, flow, cfg, chain)
print(len(simp), "simplicial parts dropped;", g2.number_of_nodes(), "vertices left")
print("lift chain:", chain.rules(), "ratio bound", chain.ratio_bound())

# %%
# the driver does all of the above, asks an exact oracle once and lifts back
sol, report = audit_kernel(g, k, cfg)
print("solution", sorted(sol.vertices), "exact opt", report["exact_opt"], "capped ratio", report["capped_ratio"])
for stage in report["stages"]:
    print("  ", stage)
