import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from magweyl.errors import LeftDomain, StepTooLarge, TooShort
from magweyl.dynamics import (PhaseState, cyclotron_period, drift_prediction, energy_shell_ensemble, fit_circle,
                              hamiltonian, integrate, max_step, measure_drift, orbit_radius, periodicity_probe,
                              poisson_check, slow_variables)
from magweyl.field import FieldConfig, field_invariants, semiclassical_scale
from magweyl.potential import PotentialField


def state(cfg, sc, x0, P):
    x0 = np.asarray(x0, float)
    return PhaseState(x0, np.asarray(P, float) + sc.mu * cfg.jacobian @ x0)


def reference_rhs(cfg, sc, V):
    """Hamilton's equations written out independently: x' = 2P, P' = 2 mu (J^T - J) P - grad V."""
    d = cfg.d
    F = cfg.jacobian.T - cfg.jacobian
    mu = sc.mu

    def rhs(t, z):
        x, P = z[:d], z[d:]
        g = np.zeros(d) if V is None else V.gradient(x[None, :])[0]
        return np.concatenate([2 * P, 2 * mu * F @ P - g])
    return rhs


def test_energy_conserved_quadratic(cfg2):
    sc = semiclassical_scale(0.1, 3.0)
    V = PotentialField.from_text("(+ (* 0.3 x1) (* 0.5 (^ x2 2)))", 2)
    tr = integrate(state(cfg2, sc, [0.1, 0.2], [0.4, -0.1]), V, cfg2, sc, 10.0, stride=7)
    assert tr.meta["method"] == "cayley"
    assert np.ptp(tr.energy) < 1e-12 * max(1.0, abs(tr.energy[0]))


def test_circle_radius_and_return(cfg2):
    sc = semiclassical_scale(0.1, 2.0)
    P = np.array([0.6, 0.0])
    T = cyclotron_period(cfg2, sc)
    assert T == pytest.approx(math.pi / 2.0)
    tr = integrate(state(cfg2, sc, [0.1, -0.2], P), 0.5, cfg2, sc, T, dt=T / 2000)
    assert orbit_radius(tr, cfg2) == pytest.approx(np.linalg.norm(P) / (sc.mu * 1.0), rel=1e-10)
    assert np.allclose(tr.x[-1], tr.x[0], atol=1e-5)
    X = slow_variables(tr.x, cfg2, sc, tr.xi)
    assert np.ptp(X, axis=0).max() < 1e-12


def test_fit_circle_exact():
    th = np.linspace(0, 5, 40)
    c, r = fit_circle(np.column_stack([1 + 2 * np.cos(th), -3 + 2 * np.sin(th)]))
    assert np.allclose(c, [1, -3]) and r == pytest.approx(2.0)


def test_general_potential_against_reference_integrator(cfg2):
    sc = semiclassical_scale(0.1, 1.0)
    V = PotentialField.from_text("(* 0.3 (sin (* 2 x1)) (cos x2))", 2)
    st = state(cfg2, sc, [0.1, 0.2], [0.3, 0.2])
    T = 2.0
    tr = integrate(st, V, cfg2, sc, T, dt=max_step(cfg2, sc) / 4)
    assert tr.meta["method"] == "midpoint-fixed-point"
    ref = solve_ivp(reference_rhs(cfg2, sc, V), (0, T), np.concatenate([st.x, [0.3, 0.2]]),
                    method="DOP853", rtol=1e-12, atol=1e-12)
    assert np.allclose(tr.x[-1], ref.y[:2, -1], atol=1e-4)
    assert np.ptp(tr.energy) < 1e-5


def test_affine_path_against_reference_integrator():
    cfg = FieldConfig.from_frequencies([1.0, 2.0])
    sc = semiclassical_scale(0.1, 1.5, 4, 0)
    V = PotentialField.from_text("(+ (* 0.2 x1 x3) (* 0.5 (^ x4 2)) (* -0.1 x2))", 4)
    st = state(cfg, sc, [0.1, 0.0, -0.1, 0.2], [0.2, 0.1, 0.0, -0.3])
    tr = integrate(st, V, cfg, sc, 1.0, dt=max_step(cfg, sc) / 8)
    ref = solve_ivp(reference_rhs(cfg, sc, V), (0, 1.0), np.concatenate([st.x, [0.2, 0.1, 0.0, -0.3]]),
                    method="DOP853", rtol=1e-12, atol=1e-12)
    assert np.allclose(tr.x[-1], ref.y[:4, -1], atol=1e-4)


@pytest.mark.parametrize("freqs", [[1.0], [1.0, 2.0]])
def test_linear_potential_drift(freqs):
    cfg = FieldConfig.from_frequencies(freqs)
    d = cfg.d
    sc = semiclassical_scale(0.01, 10.0, d, 0)
    g = np.array([0.3, -0.2, 0.1, 0.25][:d])
    V = PotentialField.from_text("(+ " + " ".join(f"(* {gi} x{i + 1})" for i, gi in enumerate(g)) + ")", d)
    Tc = cyclotron_period(cfg, sc)
    tr = integrate(state(cfg, sc, np.zeros(d), 0.3 * np.ones(d)), V, cfg, sc, 25 * Tc)
    res = measure_drift(tr, cfg, sc)
    F = cfg.jacobian.T - cfg.jacobian
    oracle = np.linalg.solve(F, g) / sc.mu      # time-averaged force balance
    assert np.allclose(res.velocity, oracle, atol=1e-10)
    assert np.allclose(drift_prediction(cfg, sc, g), oracle)
    assert res.residual < 1e-9


def test_drift_example_orientation():
    F = np.array([[0.0, 1.0], [-1.0, 0.0]])
    cfg = field_invariants(F)
    sc = semiclassical_scale(0.01, 10.0)
    v = drift_prediction(cfg, sc, [0.3, 0.0])
    assert np.allclose(v, np.linalg.solve(cfg.jacobian.T - cfg.jacobian, [0.3, 0.0]) / 10.0)
    assert np.linalg.norm(v) == pytest.approx(0.03)


def test_quadratic_drift_error_scaling(cfg2):
    """Relative deviation from the local drift law falls like mu^-2 (ratio about 4 per doubling)."""
    V = PotentialField.from_text("(+ (* 0.3 x1) (* 0.5 (^ x1 2)))", 2)
    devs = []
    for mu in (10.0, 20.0, 40.0):
        sc = semiclassical_scale(1 / mu, mu)
        Tc = cyclotron_period(cfg2, sc)
        tr = integrate(state(cfg2, sc, [0.2, 0.0], [0.1, 0.0]), V, cfg2, sc, 22 * Tc)
        res = measure_drift(tr, cfg2, sc)
        X = slow_variables(tr.x, cfg2, sc, tr.xi).mean(axis=0)
        pred = drift_prediction(cfg2, sc, V.gradient(X[None, :])[0])
        devs.append(np.linalg.norm(res.velocity - pred) / np.linalg.norm(pred))
    r1, r2 = devs[0] / devs[1], devs[1] / devs[2]
    assert r1 >= 1.8 and r2 >= 1.8
    assert r1 == pytest.approx(4.0, rel=0.05) and r2 == pytest.approx(4.0, rel=0.05)


def test_too_short_and_step_limits(cfg2):
    sc = semiclassical_scale(0.1, 1.0)
    st = state(cfg2, sc, [0, 0], [0.1, 0])
    with pytest.raises(StepTooLarge):
        integrate(st, None, cfg2, sc, 1.0, dt=2 * max_step(cfg2, sc))
    tr = integrate(st, None, cfg2, sc, 2 * cyclotron_period(cfg2, sc))
    with pytest.raises(TooShort):
        measure_drift(tr, cfg2, sc)


def test_left_domain(cfg2):
    sc = semiclassical_scale(0.1, 1.0)
    with pytest.raises(LeftDomain):
        integrate(state(cfg2, sc, [0, 0], [1.0, 0]), None, cfg2, sc, 3.0, domain=0.5)


def test_hamiltonian_value(cfg2):
    sc = semiclassical_scale(0.1, 2.0)
    x = np.array([0.3, -0.1])
    P = np.array([0.2, 0.5])
    assert hamiltonian(x, P + 2.0 * cfg2.jacobian @ x, 0.7, cfg2, sc) == pytest.approx(0.29 + 0.7)


# brackets ----------------------------------------------------------------

@pytest.mark.parametrize("freqs,q", [([1.0], 0), ([1.0, 2.0], 0), ([1.5], 1)])
def test_brackets(freqs, q):
    cfg = FieldConfig.from_frequencies(freqs, q)
    rep = poisson_check(cfg, semiclassical_scale(0.1, 2.0, cfg.d, q))
    assert rep.px_zero
    assert rep.xx_holds and rep.sign in (1, -1)
    # both brackets come with the same sign
    assert rep.pp_holds_same_sign
    assert rep.sign_pp == rep.sign == -1
    assert not rep.pp_holds_minus_s


def test_brackets_general_orientation():
    F = np.array([[0, 2, 0, 1], [-2, 0, 1, 0], [0, -1, 0, 3], [-1, 0, -3, 0]], dtype=float)
    cfg = field_invariants(F)
    rep = poisson_check(cfg, semiclassical_scale(0.1, 3.0, 4, 0))
    assert rep.px_zero and rep.xx_holds and rep.pp_holds_same_sign


# periodicity -------------------------------------------------------------

def test_periodicity_full_rank(cfg2):
    sc = semiclassical_scale(0.1, 2.0)
    ens = energy_shell_ensemble(0.0, cfg2, sc, 1.0, 8)
    assert all(abs(float(hamiltonian(s.x, s.xi, 0.0, cfg2, sc)) - 1.0) < 1e-12 for s in ens)
    assert periodicity_probe(0.0, cfg2, sc, ens, 5 * cyclotron_period(cfg2, sc), delta=1e-6) == 1.0


def test_periodicity_fails_along_kernel(cfg3):
    sc = semiclassical_scale(0.1, 2.0, 3, 1)
    ens = energy_shell_ensemble(0.0, cfg3, sc, 1.0, 8, kernel_min=0.3)
    assert periodicity_probe(0.0, cfg3, sc, ens, 5 * cyclotron_period(cfg3, sc), delta=1e-3) == 0.0
