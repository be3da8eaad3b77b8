"""Predicted remainder bounds with all generic constants set to one.

Each bound is a small record: the quantity it controls (``R`` or ``R_I``), an
applicability test on the configuration and the formula itself.  Keys name
the regime and the extra hypotheses rather than where the estimate comes from.

Hypotheses are passed as a dict with boolean entries ``potential_nonzero``,
``gradient_nonzero``, ``level_nondegenerate``, ``below_lowest_level`` (as produced by
``field.check_nondegeneracy``) and optionally ``nu`` (a Diophantine modulus
estimate for the Landau lattice at ``hbar = mu h``).
"""
from dataclasses import dataclass
import math
from typing import Callable

from .field import REGIME_EPS

# exponent slack used for "mu <= h^(delta - 1)"
DELTA = 0.05
# superpolynomial estimates are reported with this power
SUPER_POWER = 4.0


def smoothness_at_least(ls, ref):
    """Lexicographic order on smoothness pairs (l, sigma)."""
    l, s = ls
    l0, s0 = ref
    return l > l0 or (l == l0 and s >= s0)


def smoothness_at_most(ls, ref):
    return smoothness_at_least(ref, ls)


@dataclass(frozen=True)
class Bound:
    key: str
    target: str                     # "R" or "R_I"
    applies: Callable
    value: Callable
    note: str = ""


def _lg(h):
    return abs(math.log(h))


def _finite(l):
    # an infinitely smooth potential is treated with a large finite order
    return 8.0 if math.isinf(l) else float(l)


def _ctx(h, mu, d, q, smooth, hyp):
    l, s = smooth
    return {"h": h, "mu": mu, "d": d, "q": q, "r": (d - q) // 2, "l": _finite(l), "s": float(s),
            "smooth": (l, s), "hyp": hyp, "lg": _lg(h), "hbar": mu * h}


def _nu(c):
    nu = c["hyp"].get("nu")
    return c["hbar"] if nu is None else float(nu)


def _weak_full_rank(c):
    h, mu, d, l, s, lg = c["h"], c["mu"], c["d"], c["l"], c["s"], c["lg"]
    return mu ** -1 * h ** (1 - d) + (mu * h * lg) ** l * lg ** -s * h ** -d


def _weak_partial_rank(c):
    h, mu, d, q = c["h"], c["mu"], c["d"], c["q"]
    return h ** (1 - d) + (mu * h) ** (q / 2 + 1) * h ** -d


def _weak_partial_rank_nondeg(c):
    h, mu, d, q, l, s, lg = c["h"], c["mu"], c["d"], c["q"], c["l"], c["s"], c["lg"]
    return h ** (1 - d) + (mu * h) ** (q / 2 + l) * lg ** (l - s) * h ** -d


def _strong_scale(c):
    h, mu, lg = c["h"], c["mu"], c["lg"]
    if mu <= 1.0 / (h * lg):
        return 1.0 / mu
    return math.sqrt(h * lg / mu)


def _strong_full_rank(c):
    h, mu, d, l, s, lg = c["h"], c["mu"], c["d"], c["l"], c["s"], c["lg"]
    eps = _strong_scale(c)
    return mu ** -1 * h ** (1 - d) + eps ** l * lg ** -s * h ** -d


def _strong_full_rank_averaged(c):
    h, mu, d, l, s, lg = c["h"], c["mu"], c["d"], c["l"], c["s"], c["lg"]
    eps = math.sqrt(h * lg / mu)
    return mu ** -1 * h ** (1 - d) + eps ** l * lg ** -s * h ** -d


def _strong_partial_rank(c):
    h, mu, d, q, l, s, lg = c["h"], c["mu"], c["d"], c["q"], c["l"], c["s"], c["lg"]
    if q == 2:
        return h ** (1 - d) + mu * h ** (2 * l / (l + 2) + 1 - d) * lg ** (-2 * s / (l + 2))
    return (h ** (1 - d) + mu * h ** (l / (l + 2) + 1 - d) * lg ** (-s / (l + 2))
            + mu ** (1 - l / 2) * h ** (1 - d) * lg ** (-s / 2))


def _strong_partial_rank_averaged(c):
    h, mu, d, l, s, lg = c["h"], c["mu"], c["d"], c["l"], c["s"], c["lg"]
    return h ** (1 - d) + mu * h ** (l / (l + 2) + 1 - d) * lg ** (-s / (l + 2))


def _lattice_weighted_generic(c):
    h, mu, d, q, l, s, lg = c["h"], c["mu"], c["d"], c["q"], c["l"], c["s"], c["lg"]
    nu = _nu(c)
    if q == 2:
        return h ** (1 - d) + nu * h ** (2 / 3 - d)
    return (h ** (1 - d) + mu ** (0.5 - l) * h ** (0.5 - d) * lg ** (0.5 - s)
            + nu * (h ** (1 / 3 - d) + mu ** (-l / 2) * h ** -d * lg ** (-s / 2)))


def _lattice_weighted_smooth(c):
    h, mu, d, q, l, s, lg = c["h"], c["mu"], c["d"], c["q"], c["l"], c["s"], c["lg"]
    nu = _nu(c)
    if q == 2:
        return h ** (1 - d) + nu * h ** (2 * l / (l + 2) - d) * lg ** (-2 * s / (l + 2))
    return (h ** (1 - d) + mu ** (0.5 - l) * h ** (0.5 - d) * lg ** (0.5 - s)
            + nu * (h ** (l / (l + 2) - d) * lg ** (-s / (l + 2))
                    + mu ** (-l / 2) * h ** -d * lg ** (-s / 2)))


def _superstrong_full_rank(c):
    h, mu, r = c["h"], c["mu"], c["r"]
    return mu ** (r - 1) * h ** (1 - r)


def _superstrong_partial_rank(c):
    h, mu, r, q, l, s, lg = c["h"], c["mu"], c["r"], c["q"], c["l"], c["s"], c["lg"]
    base = mu ** r * h ** (1 - r)
    if q >= 3 or c["hyp"].get("level_nondegenerate"):
        return base
    return base * (1 + h ** (-1 + l * q / (l + 2)) * lg ** (-s * q / (l + 2)))


def _below_bottom(c):
    h, mu, r = c["h"], c["mu"], c["r"]
    return mu ** r * h ** SUPER_POWER


def _weak(c):
    return c["mu"] <= REGIME_EPS / c["h"]


def _h(c, *names):
    return all(c["hyp"].get(n, False) for n in names)


BOUNDS = (
    Bound("weak_full_rank", "R",
          lambda c: c["q"] == 0 and smoothness_at_least(c["smooth"], (1, 2)) and _h(c, "potential_nonzero", "gradient_nonzero")
          and c["mu"] <= c["h"] ** (DELTA - 1),
          _weak_full_rank),
    Bound("weak_partial_rank", "R",
          lambda c: c["q"] >= 1 and _h(c, "potential_nonzero") and _weak(c)
          and smoothness_at_least(c["smooth"], (1, 2) if c["q"] == 1 else (1, 1)),
          _weak_partial_rank),
    Bound("weak_partial_rank_nondegenerate", "R",
          lambda c: c["q"] >= 1 and _h(c, "potential_nonzero", "gradient_nonzero") and _weak(c)
          and smoothness_at_least(c["smooth"], (1, 2) if c["q"] == 1 else (1, 1)),
          _weak_partial_rank_nondeg),
    Bound("strong_full_rank", "R",
          lambda c: c["q"] == 0 and smoothness_at_least(c["smooth"], (1, 2)) and _h(c, "potential_nonzero", "gradient_nonzero")
          and _weak(c),
          _strong_full_rank),
    Bound("strong_full_rank_averaged", "R_I",
          lambda c: c["q"] == 0 and c["r"] == 1 and smoothness_at_least(c["smooth"], (1, 2))
          and _h(c, "potential_nonzero", "gradient_nonzero") and _weak(c),
          _strong_full_rank_averaged),
    Bound("strong_partial_rank", "R",
          lambda c: c["q"] in (1, 2) and _h(c, "potential_nonzero") and c["mu"] <= 1.0 / c["h"]
          and (smoothness_at_least(c["smooth"], (1, 1)) if c["q"] == 2 else
               smoothness_at_least(c["smooth"], (1, 2)) and smoothness_at_most(c["smooth"], (2, 0))
               and c["mu"] >= (c["h"] * c["lg"]) ** -0.5),
          _strong_partial_rank),
    Bound("strong_partial_rank_averaged", "R_I",
          lambda c: c["d"] == 3 and c["q"] == 1 and smoothness_at_least(c["smooth"], (1, 2))
          and smoothness_at_most(c["smooth"], (2, 0)) and _h(c, "potential_nonzero")
          and (c["h"] * c["lg"]) ** (-1 / 3) <= c["mu"] <= 1.0 / c["h"],
          _strong_partial_rank_averaged),
    Bound("lattice_weighted_generic", "R",
          lambda c: c["r"] >= 2 and c["q"] in (1, 2) and _h(c, "potential_nonzero") and c["mu"] <= 1.0 / c["h"]
          and smoothness_at_least(c["smooth"], (1, 1) if c["q"] == 2 else (1, 2)),
          _lattice_weighted_generic),
    Bound("lattice_weighted_smooth", "R",
          lambda c: c["r"] >= 2 and c["q"] in (1, 2) and _h(c, "potential_nonzero") and c["mu"] <= 1.0 / c["h"]
          and smoothness_at_least(c["smooth"], (1, 1) if c["q"] == 2 else (1, 2)),
          _lattice_weighted_smooth),
    Bound("superstrong_full_rank", "R",
          lambda c: c["q"] == 0 and c["mu"] >= 1.0 / c["h"] and _h(c, "level_nondegenerate"),
          _superstrong_full_rank),
    Bound("superstrong_partial_rank", "R",
          lambda c: c["q"] >= 1 and c["mu"] >= 1.0 / c["h"],
          _superstrong_partial_rank),
    Bound("below_lowest_level", "R",
          lambda c: c["q"] >= 1 and c["mu"] >= 1.0 / c["h"] and _h(c, "below_lowest_level"),
          _below_bottom, note=f"superpolynomial; reported with h^{SUPER_POWER:g}"),
)


def applicable_bounds(h, mu, d, q, smoothness, hypotheses):
    """Bounds whose hypotheses hold for this configuration."""
    if not 0.0 < h < 1.0:
        return []
    c = _ctx(h, mu, d, q, smoothness, hypotheses)
    return [b for b in BOUNDS if b.applies(c)]


def evaluate_bounds(h, mu, d, q, smoothness, hypotheses):
    """``{key: (target, value)}`` for every applicable bound."""
    c = _ctx(h, mu, d, q, smoothness, hypotheses) if 0.0 < h < 1.0 else None
    out = {}
    for b in applicable_bounds(h, mu, d, q, smoothness, hypotheses):
        out[b.key] = (b.target, float(b.value(c)))
    return out


def bound_by_key(key):
    for b in BOUNDS:
        if b.key == key:
            return b
    raise KeyError(key)
