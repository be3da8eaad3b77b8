"""Classical flow of H = |xi - mu A(x)|^2 + V(x) and its guiding-centre picture.

There is no factor 1/2 in H, so the cyclotron angular frequency is ``2 mu f``
and the orbit radius is ``|xi - mu A| / (mu f)``.

Integration is the implicit midpoint rule.  Quadratic potentials make the
vector field affine, and one step is then the exact Cayley map
``z' = (I - dt/2 M)^{-1} ((I + dt/2 M) z + dt b)``, iterated by a compiled
kernel.  Other potentials use a fixed-point solve per step.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np
import sympy

from . import kernels
from .errors import LeftDomain, SingularBlock, StepTooLarge, TooShort


@dataclass
class PhaseState:
    x: np.ndarray
    xi: np.ndarray
    t: float = 0.0
    energy: float = None


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray      # (n, d)
    xi: np.ndarray     # (n, d)
    energy: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def state(self, k):
        return PhaseState(self.x[k], self.xi[k], float(self.t[k]), float(self.energy[k]))


def _grad(V, x):
    if V is None or np.isscalar(V):
        return np.zeros_like(x)
    return V.gradient(x)


def _value(V, x):
    if V is None:
        return np.zeros(np.shape(x)[:-1])
    if np.isscalar(V):
        return np.full(np.shape(x)[:-1], float(V))
    return V(x)


def hamiltonian(x, xi, V, cfg, scale):
    x = np.asarray(x, dtype=float)
    P = np.asarray(xi, dtype=float) - scale.mu * x @ cfg.jacobian.T
    return np.sum(P * P, axis=-1) + _value(V, x)


def cyclotron_period(cfg, scale):
    """Period of the slowest cyclotron rotation, pi / (mu f_min)."""
    return math.pi / (scale.mu * float(np.min(cfg.f)))


def max_step(cfg, scale):
    return 1.0 / (2 * scale.mu * float(np.max(cfg.f))) / 20.0


def default_step(cfg, scale):
    return 1.0 / (2 * scale.mu * float(np.max(cfg.f))) / 40.0


def _affine_system(V, cfg, scale):
    """(M, b) with dz/dt = M z + b for quadratic V, or None."""
    d = cfg.d
    if V is None or np.isscalar(V):
        g, K = np.zeros(d), np.zeros((d, d))
    else:
        qf = V.quadratic_form()
        if qf is None:
            return None
        _, g, K = qf
    mu = scale.mu
    J = cfg.jacobian
    I = np.eye(d)
    M = np.block([[-2 * mu * J, 2 * I], [-2 * mu * mu * J.T @ J - K, 2 * mu * J.T]])
    b = np.concatenate([np.zeros(d), -g])
    return M, b


def integrate(initial, V, cfg, scale, T, dt=None, stride=1, domain=None, tol=1e-14, max_iter=100):
    """Implicit-midpoint trajectory sampled every ``stride`` steps."""
    dmax = max_step(cfg, scale)
    if dt is None:
        dt = default_step(cfg, scale)
    if dt > dmax * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:.3g} exceeds {dmax:.3g} (1/20 of the inverse cyclotron frequency)")
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    stride = max(1, min(int(stride), n_steps))
    d = cfg.d
    z0 = np.concatenate([np.asarray(initial.x, float), np.asarray(initial.xi, float)])
    aff = _affine_system(V, cfg, scale)
    if aff is not None:
        M, b = aff
        I = np.eye(2 * d)
        lhs = I - 0.5 * dt * M
        P = np.linalg.solve(lhs, I + 0.5 * dt * M)
        c = np.linalg.solve(lhs, dt * b)
        Z = kernels.propagate_affine(P, c, z0, n_steps, stride)
        method = "cayley"
    else:
        Z = _midpoint_general(z0, V, cfg, scale, dt, n_steps, stride, tol, max_iter)
        method = "midpoint-fixed-point"
    x, xi = Z[:, :d], Z[:, d:]
    L = domain if domain is not None else (getattr(V, "L", None) if getattr(V, "grid", None) is not None else None)
    if L is not None and np.any(np.abs(x) > L):
        raise LeftDomain(f"trajectory leaves [-{L}, {L}]^{d}")
    t = initial.t + dt * stride * np.arange(len(Z))
    E = hamiltonian(x, xi, V, cfg, scale)
    return Trajectory(t=t, x=x, xi=xi, energy=E, dt=dt,
                      meta={"method": method, "n_steps": n_steps, "stride": stride, "mu": scale.mu})


def _midpoint_general(z0, V, cfg, scale, dt, n_steps, stride, tol, max_iter):
    d = cfg.d
    mu = scale.mu
    J = cfg.jacobian

    def rhs(z):
        x, xi = z[:d], z[d:]
        P = xi - mu * J @ x
        return np.concatenate([2 * P, 2 * mu * J.T @ P - _grad(V, x[None, :])[0]])

    out = np.empty((n_steps // stride + 1, 2 * d))
    z = z0.copy()
    out[0] = z
    k = 1
    for step in range(1, n_steps + 1):
        w = z + dt * rhs(z)
        for _ in range(max_iter):
            w_new = z + dt * rhs(0.5 * (z + w))
            if np.max(np.abs(w_new - w)) <= tol * max(1.0, np.max(np.abs(w_new))):
                w = w_new
                break
            w = w_new
        z = w
        if step % stride == 0:
            out[k] = z
            k += 1
    return out


# ---------------------------------------------------------------------------
# guiding centre
# ---------------------------------------------------------------------------

def kinetic_momentum(x, xi, cfg, scale):
    """p = xi / mu - A(x)."""
    return np.asarray(xi, float) / scale.mu - np.asarray(x, float) @ cfg.jacobian.T


def slow_variables(state, cfg, scale, xi=None):
    """X = x - beta p with beta the inverse of F on its range (kernel coordinates unchanged)."""
    if xi is None:
        x, xi = state.x, state.xi
    else:
        x = state
    beta = cfg.beta
    if not np.all(np.isfinite(beta)):
        raise SingularBlock("F restricted to its range is singular")
    p = kinetic_momentum(x, xi, cfg, scale)
    return np.asarray(x, float) - p @ beta.T


def drift_prediction(cfg, scale, grad):
    """mu^{-1} F^{-1} grad V (inverse taken on the range of F)."""
    return cfg.beta @ np.asarray(grad, float) / scale.mu


@dataclass
class DriftResult:
    velocity: np.ndarray
    intercept: np.ndarray
    residual: float          # max |fit residual| / (|velocity| * fit window length)
    window: tuple
    n_periods: float


def measure_drift(traj, cfg, scale, min_periods=20):
    Tc = cyclotron_period(cfg, scale)
    span = traj.t[-1] - traj.t[0]
    if span < min_periods * Tc:
        raise TooShort(f"trajectory spans {span / Tc:.2f} cyclotron periods, need {min_periods}")
    X = slow_variables(traj.x, cfg, scale, traj.xi)
    keep = (traj.t >= traj.t[0] + Tc) & (traj.t <= traj.t[-1] - Tc)
    t = traj.t[keep]
    A = np.column_stack([np.ones_like(t), t - t[0]])
    coef, *_ = np.linalg.lstsq(A, X[keep], rcond=None)
    res = X[keep] - A @ coef
    v = coef[1]
    vn = np.linalg.norm(v)
    rmax = float(np.max(np.abs(res)))
    length = vn * (t[-1] - t[0])
    rel = rmax / length if length > 0 else rmax
    return DriftResult(velocity=v, intercept=coef[0], residual=rel, window=(float(t[0]), float(t[-1])),
                       n_periods=span / Tc)


def fit_circle(points):
    """Least-squares circle (centre, radius) through 2D points (algebraic fit)."""
    p = np.asarray(points, float)
    A = np.column_stack([2 * p, np.ones(len(p))])
    rhs = np.sum(p * p, axis=1)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    c = sol[:2]
    return c, float(math.sqrt(sol[2] + c @ c))


def orbit_radius(traj, cfg, plane=0):
    """Fitted radius of the projection onto the canonical plane ``plane``."""
    Q = cfg.basis
    y = traj.x @ Q
    pts = y[:, [plane, cfg.r + plane]]
    return fit_circle(pts)[1]


# ---------------------------------------------------------------------------
# exact Poisson brackets
# ---------------------------------------------------------------------------

def _rat(v):
    return sympy.Rational(Fraction(float(v)))


@dataclass
class BracketReport:
    sign: int                  # s with {X_j, X_k} = s mu^{-1} beta_jk
    sign_pp: int               # s' with {p_j, p_k} = s' mu^{-1} F_jk
    px_max: float              # max |{p_k, X_j}| (exact zero expected)
    xx_residual: float         # max |{X,X} - s mu^{-1} beta|
    pp_residual: float         # max |{p,p} - s' mu^{-1} F|
    pp_claim_residual: float   # max |{p,p} + s mu^{-1} F|  (the "-s" relation)
    indices: list
    coordinates: str
    brackets: dict = field(default_factory=dict)

    @property
    def px_zero(self):
        return self.px_max == 0.0

    @property
    def xx_holds(self):
        return self.xx_residual == 0.0

    @property
    def pp_holds_minus_s(self):
        return self.pp_claim_residual == 0.0

    @property
    def pp_holds_same_sign(self):
        return self.pp_residual == 0.0 and self.sign_pp == self.sign


def poisson_check(cfg, scale, points=None, n_points=3, seed=0):
    """Exact brackets of p_k = xi_k/mu - A_k and X = x - beta p.

    Convention ``{f, g} = sum_i (d_xi f d_x g - d_x f d_xi g)``.  Full-rank
    fields are handled in the original coordinates with rationalized entries;
    with a kernel the check runs in canonical coordinates on the rank block.
    """
    d, r = cfg.d, cfg.r
    if cfg.q == 0:
        J = sympy.Matrix(d, d, lambda i, j: _rat(cfg.jacobian[i, j]))
        coords = "original"
    else:
        fr = [_rat(v) for v in cfg.f]
        J = sympy.zeros(d, d)
        for m in range(r):
            J[r + m, m] = -fr[m]
        coords = "canonical"
    F = J.T - J
    idx = list(range(d)) if cfg.q == 0 else list(range(2 * r))
    Fb = F.extract(idx, idx)
    if Fb.det() == 0:
        raise SingularBlock("F restricted to its range is singular")
    beta = sympy.zeros(d, d)
    Bb = Fb.inv()
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            beta[i, j] = Bb[a, b]
    mu = _rat(scale.mu)
    xs = sympy.symbols(f"x1:{d + 1}")
    ks = sympy.symbols(f"k1:{d + 1}")
    xv = sympy.Matrix(xs)
    A = J * xv
    p = [ks[k] / mu - A[k] for k in range(d)]
    X = [xs[j] - sum(beta[j, k] * p[k] for k in range(d)) for j in range(d)]

    def br(f, g):
        return sympy.expand(sum(sympy.diff(f, ks[i]) * sympy.diff(g, xs[i])
                                - sympy.diff(f, xs[i]) * sympy.diff(g, ks[i]) for i in range(d)))

    rng = np.random.default_rng(seed)
    if points is None:
        points = rng.uniform(-1, 1, size=(n_points, 2 * d))
    subs_list = [{**{xs[i]: _rat(pt[i]) for i in range(d)}, **{ks[i]: _rat(pt[d + i]) for i in range(d)}}
                 for pt in points]

    def at_points(e):
        return [e.subs(s) for s in subs_list]

    px_max = 0
    xx, pp = {}, {}
    for j in idx:
        for k in idx:
            v = br(p[k], X[j])
            for val in at_points(v) + [v]:
                px_max = max(px_max, abs(val)) if val.is_number else math.inf
            if j < k:
                xx[(j, k)] = br(X[j], X[k])
                pp[(j, k)] = br(p[j], p[k])

    def sign_of(table, ref):
        s = None
        for (j, k), v in table.items():
            if ref[j, k] != 0:
                ratio = sympy.nsimplify(v / (ref[j, k] / mu))
                if ratio in (1, -1):
                    s = int(ratio) if s is None else s
                    if int(ratio) != s:
                        return 0
                else:
                    return 0
        return s if s is not None else 0

    s = sign_of(xx, beta)
    s_pp = sign_of(pp, F)

    def resid(table, ref, sgn):
        worst = 0
        for (j, k), v in table.items():
            for val in at_points(v - sgn * ref[j, k] / mu):
                worst = max(worst, abs(val))
        return float(worst)

    return BracketReport(sign=s, sign_pp=s_pp, px_max=float(px_max),
                         xx_residual=resid(xx, beta, s), pp_residual=resid(pp, F, s_pp),
                         pp_claim_residual=resid(pp, F, -s), indices=idx, coordinates=coords,
                         brackets={"XX": {f"{j},{k}": str(v) for (j, k), v in xx.items()},
                                   "pp": {f"{j},{k}": str(v) for (j, k), v in pp.items()}})


# ---------------------------------------------------------------------------
# ensembles and periodicity
# ---------------------------------------------------------------------------

def energy_shell_ensemble(V, cfg, scale, energy, n, seed=0, radius=0.25, kernel_min=0.0):
    """Initial states with H = energy: x uniform in a ball, kinetic momentum uniform on its sphere.

    ``kernel_min`` forces the kernel part of the kinetic momentum to have
    norm at least that value (when q >= 1).
    """
    rng = np.random.default_rng(seed)
    d = cfg.d
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 1000 * n:
            raise ValueError("could not sample the energy shell")
        x = rng.normal(size=d)
        x *= radius * rng.uniform() ** (1.0 / d) / np.linalg.norm(x)
        t = energy - float(_value(V, x[None, :])[0])
        if t <= 0:
            continue
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        P = math.sqrt(t) * u
        if cfg.q and kernel_min > 0:
            kern = (P @ cfg.basis)[2 * cfg.r:]
            if np.linalg.norm(kern) < kernel_min:
                continue
        xi = P + scale.mu * cfg.jacobian @ x
        out.append(PhaseState(x=x, xi=xi, t=0.0, energy=energy))
    return out


def periodicity_probe(V, cfg, scale, ensemble, T, delta=1e-3, dt=None):
    """Fraction of initial states whose slow variables return within delta after time T."""
    hits = 0
    for st in ensemble:
        tr = integrate(st, V, cfg, scale, T, dt=dt, stride=10**9)
        X0 = slow_variables(tr.x[0], cfg, scale, tr.xi[0])
        X1 = slow_variables(tr.x[-1], cfg, scale, tr.xi[-1])
        hits += int(np.linalg.norm(X1 - X0) <= delta)
    return hits / len(ensemble)
