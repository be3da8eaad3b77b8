import math

import pytest

from magweyl.bounds import (BOUNDS, DELTA, SUPER_POWER, applicable_bounds, bound_by_key, evaluate_bounds,
                            smoothness_at_least, smoothness_at_most)

ALL = {"potential_nonzero": True, "gradient_nonzero": True, "level_nondegenerate": True, "below_lowest_level": True}
SMOOTH = (math.inf, 0.0)


def keys(h, mu, d, q, smooth=SMOOTH, hyp=ALL):
    return {b.key for b in applicable_bounds(h, mu, d, q, smooth, hyp)}


def test_keys_unique_and_targets():
    ks = [b.key for b in BOUNDS]
    assert len(ks) == len(set(ks))
    assert {b.target for b in BOUNDS} == {"R", "R_I"}
    with pytest.raises(KeyError):
        bound_by_key("nope")


def test_smoothness_order():
    assert smoothness_at_least((2, 0), (1, 2))
    assert smoothness_at_least((1, 2), (1, 2))
    assert not smoothness_at_least((1, 1), (1, 2))
    assert smoothness_at_most((1, 1), (1, 2))
    assert smoothness_at_least((math.inf, 0), (2, 5))


def test_weak_full_rank_value():
    h, mu = 0.02, 1.0
    lg = -math.log(h)
    expected = 1 / mu * h ** -1 + (mu * h * lg) ** 8 * h ** -2   # infinite smoothness taken as l = 8
    val = evaluate_bounds(h, mu, 2, 0, SMOOTH, ALL)["weak_full_rank"]
    assert val == ("R", pytest.approx(expected, rel=1e-14))


def test_weak_full_rank_upper_limit():
    h = 0.01
    assert "weak_full_rank" in keys(h, 0.99 * h ** (DELTA - 1), 2, 0)
    assert "weak_full_rank" not in keys(h, 1.01 * h ** (DELTA - 1), 2, 0)


def test_hypotheses_gate_bounds():
    none = {k: False for k in ALL}
    assert not keys(0.01, 10.0, 2, 0, hyp=none) & {"weak_full_rank", "strong_full_rank"}
    grad_only = dict(none, potential_nonzero=True)
    assert "strong_full_rank" not in keys(0.01, 10.0, 2, 0, hyp=grad_only)
    assert "weak_partial_rank" in keys(0.01, 10.0, 3, 1, hyp=grad_only)
    assert "weak_partial_rank_nondegenerate" not in keys(0.01, 10.0, 3, 1, hyp=grad_only)


def test_regime_split():
    h = 0.01
    weak = keys(h, 10.0, 2, 0)
    strong = keys(h, 0.45 / h, 2, 0)
    superstrong = keys(h, 10 / h, 2, 0)
    assert "strong_full_rank" in weak
    assert "superstrong_full_rank" in superstrong and "strong_full_rank" not in superstrong
    assert "strong_full_rank_averaged" in strong
    assert "below_lowest_level" in keys(h, 10 / h, 3, 1)
    assert "below_lowest_level" not in keys(h, 10 / h, 2, 0)


def test_averaged_only_for_one_plane():
    assert "strong_full_rank_averaged" in keys(0.01, 10.0, 2, 0)
    assert "strong_full_rank_averaged" not in keys(0.01, 10.0, 4, 0)


def test_strong_scale_switch():
    h = 0.01
    lg = -math.log(h)
    mu_lo = 0.5 / (h * lg)
    mu_hi = 0.45 / h
    lo = evaluate_bounds(h, mu_lo, 2, 0, (3, 0), ALL)["strong_full_rank"][1]
    hi = evaluate_bounds(h, mu_hi, 2, 0, (3, 0), ALL)["strong_full_rank"][1]
    assert lo == pytest.approx(1 / mu_lo * h ** -1 + mu_lo ** -3 * h ** -2)
    assert hi == pytest.approx(1 / mu_hi * h ** -1 + (h * lg / mu_hi) ** 1.5 * h ** -2)


def test_lattice_bounds_need_two_planes():
    assert "lattice_weighted_generic" in keys(0.01, 10.0, 5, 1)
    assert "lattice_weighted_generic" not in keys(0.01, 10.0, 3, 1)


def test_lattice_bound_uses_modulus():
    base = evaluate_bounds(0.01, 10.0, 6, 2, SMOOTH, ALL)["lattice_weighted_generic"][1]
    small = evaluate_bounds(0.01, 10.0, 6, 2, SMOOTH, dict(ALL, nu=1e-6))["lattice_weighted_generic"][1]
    assert small < base
    assert small == pytest.approx(0.01 ** -5 + 1e-6 * 0.01 ** (2 / 3 - 6))


def test_below_lowest_level_power():
    val = evaluate_bounds(0.01, 1000.0, 3, 1, SMOOTH, ALL)["below_lowest_level"][1]
    assert val == pytest.approx(1000.0 * 0.01 ** SUPER_POWER)


def test_outside_semiclassical_range():
    assert applicable_bounds(1.5, 1.0, 2, 0, SMOOTH, ALL) == []
    assert evaluate_bounds(1.5, 1.0, 2, 0, SMOOTH, ALL) == {}
