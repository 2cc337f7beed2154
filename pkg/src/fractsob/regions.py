"""Parameter regions (s, p) where W^{s,p} fails to be an algebra.

The exponent pair is written either as s or as alpha = 2s (the Laplacian has
order two, so alpha in (1, 2) corresponds to s in (1/2, 1)).  p ranges over
(1, inf] with p = inf represented by ``math.inf`` and D/p = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .geometry import IfsSpec

DEGREE = 2
SELECTORS = ("general", "sg", "vicsek", "embedding", "existence")
VICSEK_SEARCH_MAX = 200


@dataclass(frozen=True)
class RegionParams:
    """Exactly one of ``s`` and ``alpha`` given; p > 1 (inf allowed)."""

    p: float
    s: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if (self.s is None) == (self.alpha is None):
            raise ParameterError("give exactly one of s and alpha")
        if not (self.p > 1):
            raise ParameterError(f"p must be > 1, got {self.p}")
        if self.s is not None and not 0 < self.s < 1:
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")
        if self.alpha is not None and not 0 < self.alpha < DEGREE:
            raise ParameterError(f"alpha must lie in (0, 2), got {self.alpha}")

    @property
    def s_value(self) -> float:
        return self.s if self.s is not None else self.alpha / DEGREE

    @property
    def alpha_value(self) -> float:
        return self.alpha if self.alpha is not None else DEGREE * self.s

    @property
    def inv_p(self) -> float:
        return 0.0 if math.isinf(self.p) else 1.0 / self.p


def conversion(params: RegionParams) -> dict:
    return {"alpha": params.alpha_value, "s": params.s_value, "degr": DEGREE,
            "relation": "alpha = 2 s"}


def general_margin(D: float, s: float, inv_p: float) -> float:
    """s(D+1) - D/p - 2; positive inside the failure region."""
    return s * (D + 1) - D * inv_p - 2.0


def embedding_margin(D: float, s: float, inv_p: float) -> float:
    """s(D+1) - D/p; positive when W^{s,p} embeds in L^inf."""
    return s * (D + 1) - D * inv_p


def sg_margin(s: float, inv_p: float) -> float:
    """s log5 - (1/p) log3 - 2 log(5/3)."""
    return s * math.log(5) - inv_p * math.log(3) - 2 * math.log(5 / 3)


def vicsek_margin(s: float, inv_p: float, L: int, N: int) -> float:
    """s log((2^N L+1)(2L+1)) - (1/p) log(2^N L+1) - 2 log(2L+1)."""
    J = 2**N * L + 1
    k = 2 * L + 1
    return s * (math.log(J) + math.log(k)) - inv_p * math.log(J) - 2 * math.log(k)


def sg_threshold(p: float) -> float:
    """Smallest s in the SG failure inequality at exponent p (ignoring s > 1/2)."""
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return (2 * math.log(5 / 3) + inv_p * math.log(3)) / math.log(5)


def sg_alpha_interval(p: float) -> tuple[float, float]:
    """(max{1, 4log(5/3)/log5 + 2log3/(p log5)}, 2): alpha values where SG fails."""
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    lo = max(1.0, 4 * math.log(5 / 3) / math.log(5) + 2 * math.log(3) / math.log(5) * inv_p)
    return lo, 2.0


def sg_critical_p() -> float:
    """The SG interval of alpha values is non-empty exactly for p above this."""
    return math.log(3) / (2 * math.log(3) - math.log(5))


def vicsek_smallest_n(
    s: float, p: float, L: int = 1, n_min: int = 2, n_max: int = VICSEK_SEARCH_MAX
) -> int | None:
    """Smallest N in [n_min, n_max] with V(L, N) in the failure region, else None."""
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    for N in range(max(n_min, 2), n_max + 1):
        if vicsek_margin(s, inv_p, L, N) > 0:
            return N
    return None


def _family(spec: IfsSpec) -> tuple[str, dict]:
    return spec.name.split("(")[0], dict(spec.params)


def region_check(spec: IfsSpec, params: RegionParams, selector: str = "general") -> dict:
    """Evaluate one region inequality and report its margin.

    ``general``: s(D+1) > D/p + 2 with s in (1/2, 1).  ``sg`` and ``vicsek``:
    the same condition written in logarithms for the two families.
    ``embedding``: s(D+1) > D/p.  ``existence``: alpha in (1, 2) with
    alpha p > 2, answered by searching V(L, N) for the smallest N.
    """
    s, inv_p, D = params.s_value, params.inv_p, spec.D
    family, fp = _family(spec)
    in_s_range = 0.5 < s < 1.0
    out = {
        "selector": selector,
        "fractal": spec.name,
        "D": D,
        "s": s,
        "alpha": params.alpha_value,
        "p": "inf" if math.isinf(params.p) else params.p,
        "conversion": conversion(params),
        "s_in_half_open_unit": in_s_range,
        "embedding_margin": embedding_margin(D, s, inv_p),
        "embeds_in_linf": embedding_margin(D, s, inv_p) > 0,
    }
    if selector == "general":
        margin = general_margin(D, s, inv_p)
        out["threshold_s"] = (2.0 + D * inv_p) / (D + 1)
    elif selector == "sg":
        if family != "sg":
            raise ParameterError(f"selector 'sg' needs the gasket, got {spec.name}")
        margin = sg_margin(s, inv_p)
        out["threshold_s"] = sg_threshold(params.p)
        out["alpha_interval"] = list(sg_alpha_interval(params.p))
        out["critical_p"] = sg_critical_p()
    elif selector == "vicsek":
        if family != "vicsek":
            raise ParameterError(f"selector 'vicsek' needs a Vicsek set, got {spec.name}")
        margin = vicsek_margin(s, inv_p, fp["L"], fp["N"])
    elif selector == "embedding":
        margin = embedding_margin(D, s, inv_p)
        in_s_range = True
    elif selector == "existence":
        alpha = params.alpha_value
        L = fp.get("L", 1)
        # alpha p > 2 written as alpha > 2/p so that p = inf needs no special case
        ok = 1.0 < alpha < 2.0 and alpha > 2.0 * inv_p
        N = vicsek_smallest_n(s, params.p, L) if ok else None
        out["L"] = L
        out["smallest_N"] = N
        out["search_range"] = [2, VICSEK_SEARCH_MAX]
        margin = vicsek_margin(s, inv_p, L, N) if N is not None else -math.inf
        in_s_range = ok
    else:
        raise ParameterError(f"unknown selector {selector!r}; expected one of {SELECTORS}")
    out["margin"] = margin
    out["in_region"] = bool(margin > 0 and in_s_range)
    return out
