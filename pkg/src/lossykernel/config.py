"""Size limits for the exponential subroutines."""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Caps:
    iso: int = 10          # vertices for canonical forms / isomorphism
    solver: int = 25       # vertices for exact treewidth and deletion search
    pattern: int = 5       # vertices of a minor pattern
    replacer: int = 12     # vertices of a protrusion handed to the replacer
    representative: int = 8  # largest candidate tried when looking for a representative
    candidates: int = 2000   # candidate graphs examined per representative search
    boundary: int = 2      # boundary size r of a replaceable protrusion
    query: int = 4         # pattern size p of the full rooted query space
    budget: int = 3        # deletion budget d inside a protrusion
    identity_fallback: bool = True  # replacer: identity instead of an error when over caps

    def with_(self, **kw):
        return replace(self, **kw)


DEFAULT_CAPS = Caps()

PROFILES = {
    "default": DEFAULT_CAPS,
    "small": Caps(iso=9, solver=20, pattern=4, replacer=10, representative=6),
    "large": Caps(iso=12, solver=30, pattern=6, replacer=14, representative=9),
    "strict": Caps(identity_fallback=False),
}


def caps_profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown caps profile {name!r}; choose from {sorted(PROFILES)}") from None
