"""Exit criteria, one test (and one PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary under "acceptance criteria".
"""
import json
import math
import time

import numpy as np
import pytest

from magweyl.discrete import GridSpec, assemble, band_counting, band_reduce, landau_grid_error
from magweyl.dynamics import (PhaseState, cyclotron_period, drift_prediction, integrate, measure_drift,
                              orbit_radius, poisson_check)
from magweyl.experiments import (SweepPlan, emit, gap_study, loglog_trend, sweep, sweep_study, verify_sidecar,
                                 weyl_limit_study)
from magweyl.field import FieldConfig, field_invariants, semiclassical_scale
from magweyl.potential import Bump, PotentialField
from magweyl.spectral import (dense_counting, dense_local_counting, dense_spectrum, inertia_counting,
                              kpm_local_counting)
from magweyl.weyl import diophantine_modulus, localized_weyl, weyl_limit_check

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def landau_setup(flux, n, V=None, L=1.0):
    """mu = 1, f = 1 torus with exactly ``flux`` quanta: h = (2L)^2 / (2 pi flux)."""
    cfg = FieldConfig.from_frequencies([1.0])
    h = (2 * L) ** 2 / (2 * math.pi * flux)
    sc = semiclassical_scale(h, 1.0)
    op = assemble(V, cfg, sc, GridSpec(2, n, L, "torus", 2), snap=False)
    return cfg, sc, op


# 1 -----------------------------------------------------------------------

@pytest.mark.parametrize("flux,n", [(8, 64), (16, 96)])
def test_c01_landau_clusters(verdict, flux, n):
    t0 = time.perf_counter()
    cfg, sc, op = landau_setup(flux, n)
    e = dense_spectrum(op).eigenvalues
    elapsed = time.perf_counter() - t0
    hb = sc.hbar
    ok = op.meta["resolution_ratio"] >= 8 and elapsed < 60
    worst = 0.0
    sizes = []
    for a in range(4):
        pred = (2 * a + 1) * hb
        members = e[np.abs(e - pred) < hb]      # clusters are 2 hbar apart
        sizes.append(len(members))
        worst = max(worst, abs(members.mean() - pred) / pred)
        ok &= len(members) == flux and abs(members.mean() - pred) <= 0.02 * pred
    verdict(f"C1 Landau clusters N={flux}", ok,
            f"sizes {sizes}, worst mean error {worst:.2e}, l/dx {op.meta['resolution_ratio']:.1f}, {elapsed:.1f}s")


# 2 -----------------------------------------------------------------------

def test_c02_localized_count_matches_magnetic_weyl(verdict):
    t0 = time.perf_counter()
    v0 = 0.3
    cfg, sc, op = landau_setup(8, 64, V=v0)
    psi = Bump(radius=0.5)
    hb = sc.hbar
    taus = v0 + hb * np.linspace(0.5, 6.5, 10)        # jumps at 1, 3, 5 hbar
    local = dense_local_counting(op, taus, op.psi_weights(psi))
    weyl = np.array([localized_weyl(t, v0, psi, cfg, sc, n=256).value for t in taus])
    elapsed = time.perf_counter() - t0
    rel = np.where(weyl > 0, np.abs(local.values - weyl) / np.where(weyl > 0, weyl, 1), np.abs(local.values))
    ok = bool(np.all(rel <= 0.03)) and elapsed < 120
    verdict("C2 localized count vs magnetic Weyl", ok, f"max rel dev {rel.max():.2e}, {elapsed:.1f}s")


# 3 -----------------------------------------------------------------------

@pytest.mark.parametrize("q", [0, 1])
def test_c03_weyl_limit_slope(verdict, q):
    cfg = FieldConfig.from_frequencies([1.0], q=q)
    hbars = [2.0 ** -k for k in range(3, 9)]
    rep = weyl_limit_check(0.0, cfg, hbars, tau=1.0)
    ok = abs(rep.slope - 1.0) <= 0.15
    verdict(f"C3 Weyl limit d={cfg.d}", ok, f"slope {rep.slope:.3f} (target 1.0 +- 0.15)")


# 4 -----------------------------------------------------------------------

def test_c04_band_reduction(verdict):
    t0 = time.perf_counter()
    flux, n, order = 4, 24, 4
    cfg = FieldConfig.from_frequencies([1.0], q=1)
    h = 4 / (2 * math.pi * flux)
    sc = semiclassical_scale(h, 1.0, 3, 1)
    V = PotentialField.from_text("(^ x3 2)", 3)
    op = assemble(V, cfg, sc, GridSpec(3, n, 1.0, "torus", order), snap=False)
    taus = np.linspace(0.3, 1.5, 20)
    full = dense_counting(op, taus).values
    fam = band_reduce(V, cfg, sc, taus.max() + 0.5, grid1d=GridSpec(1, n, op.L, "torus", order))
    # a priori tolerance: twice the leading stencil shift of the highest Landau level in range
    a_max = int((taus.max() - sc.hbar) / (2 * sc.hbar)) + 1
    phi = sc.mu * op.spacing ** 2 / sc.h
    tol = 2 * float(landau_grid_error(a_max, sc.hbar, phi, order))
    lo = band_counting(fam, taus - tol, degeneracy=flux).values
    hi = band_counting(fam, taus + tol, degeneracy=flux).values
    elapsed = time.perf_counter() - t0
    ok = bool(np.all((lo <= full) & (full <= hi))) and elapsed < 300
    exact = band_counting(fam, taus, degeneracy=flux).values
    verdict("C4 band reduction vs full 3D", ok,
            f"tol {tol:.2e}, {int(np.sum(exact == full))}/20 identical, {elapsed:.1f}s")


# 5 -----------------------------------------------------------------------

@pytest.mark.parametrize("freqs", [[1.0], [1.0, 2.0]])
def test_c05_drift_law(verdict, freqs):
    cfg = FieldConfig.from_frequencies(freqs)
    d = cfg.d
    sc = semiclassical_scale(0.01, 10.0, d, 0)
    g = np.array([0.3, -0.2, 0.1, 0.25][:d])
    V = PotentialField.from_text("(+ " + " ".join(f"(* {gi} x{i + 1})" for i, gi in enumerate(g)) + ")", d)
    Tc = cyclotron_period(cfg, sc)
    x0 = np.zeros(d)
    tr = integrate(PhaseState(x0, 0.3 * np.ones(d)), V, cfg, sc, 25 * Tc)
    res = measure_drift(tr, cfg, sc)
    pred = drift_prediction(cfg, sc, g)
    rel = float(np.linalg.norm(res.velocity - pred) / np.linalg.norm(pred))
    verdict(f"C5 drift law d={d}", rel <= 1e-8, f"relative residual {rel:.2e}")


def test_c05_radius_scaling(verdict):
    cfg = FieldConfig.from_frequencies([1.0])
    P = np.array([0.4, 0.3])
    prods = []
    for mu in (5.0, 10.0, 20.0, 40.0):
        sc = semiclassical_scale(0.01, mu)
        x0 = np.array([0.1, -0.1])
        tr = integrate(PhaseState(x0, P + mu * cfg.jacobian @ x0), 0.0, cfg, sc, cyclotron_period(cfg, sc))
        prods.append(orbit_radius(tr, cfg) * mu)
    spread = (max(prods) - min(prods)) / np.mean(prods)
    verdict("C5 radius x mu constant", spread <= 1e-6, f"relative spread {spread:.2e}")


# 6 -----------------------------------------------------------------------

def test_c06_poisson_brackets(verdict):
    F4 = np.array([[0, 2, 0, 1], [-2, 0, 1, 0], [0, -1, 0, 3], [-1, 0, -3, 0]], dtype=float)
    configs = [FieldConfig.from_frequencies([1.0]), FieldConfig.from_frequencies([1.0, 2.0]),
               FieldConfig.from_frequencies([1.5], q=1), field_invariants(F4)]
    reps = [poisson_check(c, semiclassical_scale(0.1, 2.0, c.d, c.q)) for c in configs]
    signs = {r.sign for r in reps}
    px = all(r.px_zero for r in reps)
    xx = all(r.xx_holds for r in reps) and len(signs) == 1
    pp_claim = all(r.pp_holds_minus_s for r in reps)
    pp_same = all(r.pp_holds_same_sign for r in reps)
    verdict("C6 Poisson brackets", px and xx and pp_claim,
            f"{{p,X}}=0: {px}; {{X,X}}=s/mu beta with s={signs}: {xx}; {{p,p}}=-s/mu F: {pp_claim} "
            f"({{p,p}}=+s/mu F holds: {pp_same})")


# 7 -----------------------------------------------------------------------

def generic_torus(n):
    cfg = FieldConfig.from_frequencies([1.0])
    V = PotentialField.from_text("(+ (* 0.3 (cos (* 3 x1)) (sin (* 2 x2))) (* 0.1 x1 x2))", 2)
    return assemble(V, cfg, semiclassical_scale(0.1, 1.0), GridSpec(2, n, 1.0))


def test_c07_dense_vs_inertia(verdict):
    t0 = time.perf_counter()
    op = generic_torus(45)
    e = dense_spectrum(op, use_symmetry=False).eigenvalues
    taus = np.linspace(e[0] + 0.01, e[600], 20)
    a = dense_counting(op, taus, spectrum=None, use_symmetry=False).values
    b = inertia_counting(op, taus).values
    elapsed = time.perf_counter() - t0
    verdict("C7 dense vs inertia (dim 2025)", bool(np.array_equal(a, b)) and elapsed < 300,
            f"{int(np.sum(a == b))}/20 equal, {elapsed:.1f}s")


def test_c07_kpm(verdict):
    t0 = time.perf_counter()
    op = generic_torus(55)
    taus = np.linspace(0.1, 2.0, 20)
    res = kpm_local_counting(op, taus, n_moments=512, n_vectors=32, seed=0)
    dtau = res.resolution
    lo = inertia_counting(op, taus - dtau).values
    hi = inertia_counting(op, taus + dtau).values
    est, err = res.curve.values, res.curve.stderr
    ok = bool(np.all((est >= lo - 3 * err) & (est <= hi + 3 * err)))
    elapsed = time.perf_counter() - t0
    verdict("C7 KPM within 3 stderr + resolution (dim 3025)", ok and elapsed < 300,
            f"resolution {dtau:.3f}, max stderr {err.max():.2f}, {elapsed:.1f}s")


# 8 -----------------------------------------------------------------------

def test_c08_gaps_and_bottom(verdict):
    t = gap_study(hbars=(2.0, 4.0, 8.0), amp=0.15)
    s = t.summary
    ok = s["gaps_ok"] and s["centers_ok"] and s["bottom_count"] == 0.0
    widths = [r["gap_width"] - r["required_width"] for r in t.rows if r["gap_width"] != ""]
    verdict("C8 superstrong gaps and empty bottom", ok,
            f"min gap margin {min(widths):.3g}, count below bottom {s['bottom_count']}, "
            f"spectrum min {s['bottom_spectrum_min']:.3f}")


# 9 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def weak_sweep():
    """Fixed mu h = 0.02, d = 2, V = -1 + 0.3 sin(pi x1 / 2.5): all weak, nondegenerate."""
    hbar, L = 0.02, 2.5
    hs = [hbar / k for k in (1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)]
    plan = SweepPlan.fixed_hbar(hbar, hs, potential="(+ -1 (* 0.3 (sin (* (/ pi 2.5) x1))))", L=L,
                                engine="sector-plane")
    return sweep(plan)


def test_c09_no_growth(verdict, weak_sweep):
    recs = weak_sweep
    assert {r.regime for r in recs} == {"weak"}
    assert all(r.hypotheses["potential_nonzero"] and r.hypotheses["gradient_nonzero"] for r in recs)
    h = np.array([r.h for r in recs])
    R = np.array([abs(r.R_signed) for r in recs])
    # the whole weak window at fixed mu h is only 0.4 decades wide; trend without the span gate
    fit = loglog_trend(h, R * h, n_boot=2000, seed=0)
    verdict("C9 R h^(d-1) bounded (slope in [-0.5, 0.5])", -0.5 <= fit.slope <= 0.5,
            f"slope {fit.slope:.2f} CI [{fit.ci[0]:.2f}, {fit.ci[1]:.2f}] over h in [{h.min():.4f}, {h.max():.4f}]")


def test_c09_monotone(verdict, weak_sweep):
    recs = sorted(weak_sweep, key=lambda r: -r.h)[:5]
    R = np.array([max(abs(r.R_signed) - r.engine_error, 0.0) for r in recs])
    ok = bool(np.all(np.diff(R) < 0))          # decreasing as h decreases
    verdict("C9 R decreases with h over the largest 5 h", ok,
            "|R| = " + ", ".join(f"{v:.2e}" for v in R))


# 10 ----------------------------------------------------------------------

def test_c10_diophantine(verdict):
    c_lo, c_hi = 0.2, 1.0
    ratios = [diophantine_modulus((1.0, 1.0), 2.0 ** -k).nu / 2.0 ** -k for k in range(7, 11)]
    hb = 2.0 ** -10
    factor = diophantine_modulus((1.0, 1.0), hb).nu / max(diophantine_modulus((1.0, math.sqrt(2.0)), hb).nu, 1e-300)
    ok = all(c_lo <= r <= c_hi for r in ratios) and factor >= 5
    verdict("C10 Diophantine modulus", ok,
            "nu/hbar = " + ", ".join(f"{r:.3f}" for r in ratios) + f"; (1,1) vs (1,sqrt2) factor {factor:.3g}")


# 11 ----------------------------------------------------------------------

def test_c11_sidecar_reproduction(verdict, tmp_path):
    plan = SweepPlan.fixed_hbar(0.2, [0.1, 0.08], potential="(+ -0.5 (* 0.2 (sin (* 3.14159 x1))))")
    p1 = str(tmp_path / "sweep.csv")
    emit(sweep_study(plan.to_dict()), p1)
    p2 = str(tmp_path / "limit.csv")
    emit(weyl_limit_study(hbars=tuple(2.0 ** -k for k in range(3, 7))), p2)
    ok = verify_sidecar(p1) and verify_sidecar(p1, index=1) and verify_sidecar(p2)
    side = json.loads(open(str(tmp_path / "sweep.json")).read())
    verdict("C11 sidecar regeneration bit-identical", ok, f"{side['n_rows']} sweep rows + weyl-limit table")
