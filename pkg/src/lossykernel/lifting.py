"""Solution-lifting steps recorded by the reduction rules."""
from dataclasses import dataclass, field
from fractions import Fraction


@dataclass
class LiftStep:
    rule: str
    ratio: Fraction
    lift: object  # callable: solution of the reduced instance -> solution of the previous one
    strict: bool = False  # strict steps take a max with the inner ratio instead of multiplying
    info: dict = field(default_factory=dict)


@dataclass
class LiftChain:
    steps: list = field(default_factory=list)

    def push(self, rule, ratio, lift, strict=False, **info):
        self.steps.append(LiftStep(rule, Fraction(ratio), lift, strict, info))

    def lift(self, s):
        s = frozenset(s)
        for step in reversed(self.steps):
            s = frozenset(step.lift(s))
        return s

    def ratio_bound(self, inner=1):
        """Guaranteed ratio after lifting a solution whose own ratio is at most inner."""
        out = Fraction(inner)
        for step in reversed(self.steps):
            out = max(step.ratio, out) if step.strict else step.ratio * out
        return out

    def rules(self):
        return [st.rule for st in self.steps]

    def summary(self):
        return [{"rule": st.rule, "ratio": str(st.ratio), **st.info} for st in self.steps]
