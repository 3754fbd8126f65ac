"""
Rounds and ratios of the oracle protocol
========================================

Smaller epsilon buys a better ratio with more oracle rounds.  The oracle here
is exact, or deliberately padded to be a 2-approximation.
"""

# %%
from fractions import Fraction

from lossykernel.graph import complete, path
from lossykernel.harness import audit_protocol, random_instance
from lossykernel.pipeline import PipelineConfig, partition_root_bag, rounds_for
from lossykernel.solvers import TwDeletion, make_oracle

for eps in (Fraction(1), Fraction(1, 2), Fraction(1, 4)):
    print(f"eps={eps}: r={rounds_for(eps)}, at most {1 + rounds_for(eps)} oracle rounds")

# %%
# splitting a root bag: a path already has treewidth 1, so one piece takes all of it
cfg = PipelineConfig(family=[complete(3)], eta=1, epsilon=Fraction(1, 2))
oracle = make_oracle(TwDeletion(1, None))
parts, transcript = partition_root_bag(path(6), 2, cfg, oracle)
print([sorted(q) for q in parts], transcript["case"], oracle.calls, "calls")

# %%
rows = []
for seed in range(20):
    g, k = random_instance(seed, n_max=14, family=[complete(3)])
    for eps in (Fraction(1), Fraction(1, 2)):
        for beta in (1, 2):
            _, rep = audit_protocol(g, k, PipelineConfig(family=[complete(3)], eta=1, epsilon=eps),
                                    beta=beta, padding_seed=seed)
            rows.append((seed, str(eps), beta, rep["capped_ratio"], rep["bound"], rep["rounds"], rep["ok"]))

print("seed eps beta ratio bound rounds ok")
for row in rows[:16]:
    print(*row)
print("all within bound:", all(r[-1] for r in rows))
