import json
import math

import numpy as np
import pytest

from magweyl.errors import OutOfRange, RegimeMixed, SpanTooSmall
from magweyl.experiments import (SweepPlan, Table, diophantine_study, emit, loglog_trend, predicted_exponent,
                                 record_columns, regenerate, remainder, scaling_fit, sidecar_path, sweep,
                                 sweep_study, verify_sidecar, weyl_limit_study)

STRIP = "(+ -0.5 (* 0.2 (sin (* 3.14159 x1))))"


# fits --------------------------------------------------------------------

def test_fit_exact_power_law():
    x = np.geomspace(1e-3, 1e-1, 8)
    fit = scaling_fit(x=x, y=3.0 / x, predicted=-1.0, n_boot=200)
    assert fit.slope == pytest.approx(-1.0, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.consistent and fit.span_decades == pytest.approx(2.0)


def test_fit_two_term_model_slope_between():
    x = np.geomspace(1e-3, 1e-1, 12)
    y = x ** -1 + 50 * x ** -0.5
    fit = scaling_fit(x=x, y=y, n_boot=200)
    assert -1.0 < fit.slope < -0.5
    assert fit.ci[0] <= fit.slope <= fit.ci[1]


def test_fit_noise_interval_covers_truth():
    rng = np.random.default_rng(0)
    x = np.geomspace(1e-3, 1e-1, 20)
    y = x ** 1.5 * np.exp(0.05 * rng.standard_normal(20))
    fit = scaling_fit(x=x, y=y, predicted=1.5)
    assert fit.consistent and fit.ci[1] - fit.ci[0] < 0.2


def test_fit_preconditions():
    x = np.geomspace(1e-3, 1e-1, 6)
    with pytest.raises(RegimeMixed):
        scaling_fit(x=x, y=x, regimes=["weak"] * 5 + ["strong"])
    with pytest.raises(SpanTooSmall):
        scaling_fit(x=x[:4], y=x[:4])
    with pytest.raises(SpanTooSmall):
        scaling_fit(x=np.linspace(0.01, 0.02, 6), y=np.ones(6))
    with pytest.raises(OutOfRange):
        loglog_trend([1, 2, 3], [1, 0, 1])


def test_trend_without_span_requirement():
    x = np.linspace(0.01, 0.02, 6)
    fit = loglog_trend(x, x ** 2, n_boot=100)
    assert fit.slope == pytest.approx(2.0) and fit.span_decades < 1


def test_predicted_exponent():
    assert predicted_exponent(2, 0, "weak") == 0.0
    assert predicted_exponent(3, 1, "strong") == -2.0
    assert predicted_exponent(2, 0, "ultrastrong") is None


# plans -------------------------------------------------------------------

def test_plan_roundtrip():
    plan = SweepPlan.fixed_hbar(0.2, [0.1, 0.08], potential=STRIP, L=1.0)
    d = json.loads(json.dumps(plan.to_dict()))
    assert d["smoothness"][0] == "inf"
    back = SweepPlan.from_dict(d)
    assert back == plan


def test_fixed_hbar_exact_flux():
    plan = SweepPlan.fixed_hbar(0.2, [0.1, 0.07, 0.05], L=1.25)
    for h, mu in plan.points:
        assert mu * h == pytest.approx(0.2)
        flux = mu * (2 * 1.25) ** 2 / (2 * math.pi * h)
        assert flux == pytest.approx(round(flux), abs=1e-9)


def test_power_family():
    plan = SweepPlan.power_family(0.5, [0.01, 0.04])
    assert plan.points == [(0.01, 10.0), (0.04, 5.0)]


def test_unknown_engine():
    with pytest.raises(OutOfRange):
        SweepPlan(points=[(0.1, 1.0)], engine="magic")


# remainders --------------------------------------------------------------

def test_zero_weight_gives_zero_remainder():
    plan = SweepPlan(points=[(0.1, 2.0)], potential="-0.5", psi_amplitude=0.0)
    r = remainder(plan.points[0], plan)
    assert r.count == 0.0 and r.weyl == 0.0 and r.R == 0.0


def test_constant_potential_remainder_vanishes():
    """Landau levels far from tau: the localized count equals the phase-space value."""
    plan = SweepPlan(points=[(0.1, 2.0)], potential="-0.5")
    r = remainder(plan.points[0], plan)
    assert r.engine == "sector"
    assert r.R < 1e-8
    assert r.hypotheses["potential_nonzero"] and not r.hypotheses["gradient_nonzero"]


@pytest.mark.slow
def test_sector_and_grid_engines_agree():
    recs = {}
    for eng in ("sector", "dense"):
        plan = SweepPlan(points=[(0.1, 2.0)], potential=STRIP, engine=eng, points_per_length=5)
        recs[eng] = remainder(plan.points[0], plan)
    assert recs["sector"].count == pytest.approx(recs["dense"].count, abs=1e-4)
    assert recs["sector"].weyl == recs["dense"].weyl
    assert recs["dense"].resolution > 4


def test_sector_engine_needs_strip_potential():
    plan = SweepPlan(points=[(0.1, 2.0)], potential="(* 0.1 x2)", engine="sector")
    with pytest.raises(OutOfRange):
        remainder(plan.points[0], plan)


def test_record_row_columns():
    plan = SweepPlan(points=[(0.1, 2.0)], potential="-0.5", psi_amplitude=0.0)
    row = remainder(plan.points[0], plan).row()
    assert list(row) == record_columns()
    assert "wall_time" not in row


@pytest.mark.slow
def test_parallel_sweep_matches_serial():
    kw = dict(potential="-0.5", L=1.0)
    serial = sweep(SweepPlan.fixed_hbar(0.2, [0.1, 0.08], **kw))
    par = sweep(SweepPlan.fixed_hbar(0.2, [0.1, 0.08], workers=2, **kw))
    assert [r.row() for r in serial] == [r.row() for r in par]
    assert [r.index for r in par] == [0, 1]


# tables and sidecars -----------------------------------------------------

def test_emit_and_verify_study(tmp_path):
    t = diophantine_study(fs=((1.0, 1.0),), hbars=(2.0 ** -7, 2.0 ** -8))
    paths = emit(t, str(tmp_path / "dio.csv"))
    side = json.loads(open(paths["sidecar"]).read())
    assert side["study"] == "diophantine" and side["n_rows"] == 2
    assert "plot" in paths and "using 3:4" in open(paths["plot"]).read()
    assert verify_sidecar(paths["csv"])
    assert regenerate(paths["sidecar"]).csv_text() == open(paths["csv"]).read()


def test_verify_detects_edit(tmp_path):
    t = diophantine_study(fs=((1.0,),), hbars=(2.0 ** -7,))
    p = str(tmp_path / "d.csv")
    emit(t, p, plot=False)
    lines = open(p).read().splitlines()
    cols = lines[1].split(",")
    cols[3] = repr(float(cols[3]) * (1 + 1e-15) + 1e-18)
    lines[1] = ",".join(cols)
    open(p, "w").write("\n".join(lines) + "\n")
    assert not verify_sidecar(p)


def test_sweep_sidecar_single_row(tmp_path):
    plan = SweepPlan(points=[(0.1, 2.0), (0.08, 2.5)], potential="-0.5", psi_amplitude=0.0)
    t = sweep_study(plan.to_dict())
    p = str(tmp_path / "s.csv")
    emit(t, p, plot=False)
    assert sidecar_path(p).endswith("s.json")
    assert verify_sidecar(p, index=1)
    assert "wall_time" in json.loads(open(sidecar_path(p)).read())["timing"]


def test_weyl_limit_study_table():
    t = weyl_limit_study(hbars=tuple(2.0 ** -k for k in range(3, 7)))
    assert {r["config"] for r in t.rows} == {"d2q0", "d3q1"}
    assert max(r["shift_delta"] for r in t.rows) < 1e-9
    assert set(t.summary["slopes"]) == {"d2q0", "d3q1"}


def test_table_cells():
    t = Table("x", ["a", "b", "c"], [{"a": 0.1, "b": True, "c": (1.0, 2.0)}], {})
    assert t.csv_text() == "a,b,c\n0.1,1,1.0 2.0\n"
