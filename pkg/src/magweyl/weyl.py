"""Closed-form spectral quantities for constant magnetic fields.

Everything here is evaluated exactly from the Landau lattice
``E_alpha = hbar * sum_j (2 alpha_j + 1) f_j`` with ``hbar = mu*h``; no
eigenvalue problems are solved.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .errors import BudgetExceeded, CircleExitsDomain, EmptyAllowedRegion, GridTooCoarse, OutOfRange
from .potential import check_psi_support

COUNT_BUDGET = 1e9


def omega(k):
    """Volume of the unit ball in R^k (omega_0 = 1)."""
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


@dataclass(frozen=True)
class WeylNormalization:
    """Prefactor convention: ``physical`` (default) or ``bare``.

    ``physical`` is fixed by the exact constant-field density (Landau
    degeneracy mu f / (2 pi h) per unit area in 2D) and tends to the standard
    Weyl term as mu*h -> 0.  ``bare`` drops the (2 pi)^{-r} factor
    of the magnetic term and the (2 pi)^{-d} of the standard term.
    """
    mode: str = "physical"

    def __post_init__(self):
        if self.mode not in ("physical", "bare"):
            raise OutOfRange(f"unknown normalization {self.mode!r}")

    def magnetic_constant(self, r, q):
        if self.mode == "physical":
            return (2 * math.pi) ** (-(r + q)) * omega(q)
        return omega(q) * (2 * math.pi) ** (-q)

    def standard_constant(self, d):
        if self.mode == "physical":
            return (2 * math.pi) ** (-d) * omega(d)
        return omega(d)


def _norm(norm):
    if norm is None:
        return WeylNormalization()
    if isinstance(norm, str):
        return WeylNormalization(norm)
    return norm


# ---------------------------------------------------------------------------
# Landau lattice
# ---------------------------------------------------------------------------

@dataclass
class LandauLattice:
    f: np.ndarray
    hbar_eff: float
    e_cut: float
    energies: np.ndarray
    alphas: np.ndarray

    @property
    def ground(self):
        return self.hbar_eff * float(np.sum(self.f))

    def __len__(self):
        return len(self.energies)


def landau_levels(f, hbar, e_cut):
    """All Landau energies ``<= e_cut`` sorted ascending (ties by multi-index)."""
    f = np.asarray(f, dtype=float)
    est = _volume_estimate(f * hbar, e_cut)
    if est > COUNT_BUDGET:
        raise BudgetExceeded(f"about {est:.3g} Landau levels below {e_cut}")
    e, a = kernels.enumerate_levels(f * hbar, e_cut)
    order = np.lexsort(tuple(a.T[::-1]) + (e,)) if len(e) else np.zeros(0, dtype=int)
    return LandauLattice(f=f, hbar_eff=float(hbar), e_cut=float(e_cut), energies=e[order], alphas=a[order])


def _volume_estimate(f_scaled, s):
    r = len(f_scaled)
    if s <= 0:
        return 0.0
    return (s / 2.0) ** r / (math.factorial(r) * float(np.prod(f_scaled))) + 1.0


def _potential_values(V, x):
    if V is None:
        return np.zeros(np.asarray(x).shape[:-1]) if x is not None else 0.0
    if np.isscalar(V):
        if x is None:
            return float(V)
        return np.full(np.asarray(x).shape[:-1], float(V))
    if x is None:
        if not V.is_constant:
            raise OutOfRange("a point x is needed for a non-constant potential")
        return float(V(np.zeros(V.d)))
    return V(x)


def _level_sum(t, levels, q):
    """sum_alpha (t - E_alpha)_+^{q/2} for an array of t, exact truncation."""
    t = np.asarray(t, dtype=float)
    if q == 0:
        return np.searchsorted(levels, t, side="left").astype(float)
    flat = t.ravel()
    out = np.zeros(flat.shape)
    chunk = max(1, 2_000_000 // max(len(levels), 1))
    for lo in range(0, len(flat), chunk):
        diff = flat[lo:lo + chunk, None] - levels[None, :]
        out[lo:lo + chunk] = np.sum(np.maximum(diff, 0.0) ** (q / 2.0), axis=1)
    return out.reshape(t.shape)


def magnetic_weyl_density(tau, x, V, cfg, scale, norm=None):
    """Magnetic Weyl density at points x (shape (..., d)) or a constant potential (x=None).

    For ``q = 0`` the plus-power is the strict indicator ``t > 0`` so the
    density jumps up just after each ``tau = E_alpha + V(x)``.
    """
    norm = _norm(norm)
    v = _potential_values(V, x)
    hb = scale.hbar
    top = float(tau - np.min(v))
    if top <= hb * float(np.sum(cfg.f)):
        return np.zeros(np.shape(v)) if np.ndim(v) else 0.0
    lat = landau_levels(cfg.f, hb, top)
    s = _level_sum(tau - np.asarray(v), lat.energies, cfg.q)
    pref = (norm.magnetic_constant(cfg.r, cfg.q) * scale.mu ** cfg.r
            * scale.h ** (-cfg.d + cfg.r) * float(np.prod(cfg.f)))
    out = pref * s
    return float(out) if np.ndim(out) == 0 else out


def standard_weyl_density(tau, x, V, d, h, norm=None):
    norm = _norm(norm)
    v = np.asarray(_potential_values(V, x), dtype=float)
    t = np.maximum(tau - v, 0.0)
    out = norm.standard_constant(d) * h ** (-d) * t ** (d / 2.0)
    if d == 0:
        out = np.where(tau - v > 0, out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Weyl limit
# ---------------------------------------------------------------------------

@dataclass
class WeylLimitReport:
    hbars: np.ndarray
    deviations: np.ndarray        # window sup per hbar
    fixed_tau: np.ndarray         # deviation at tau itself
    max_deviation: float
    slope: float
    windowed: bool


def _loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _relative_deviation(taus, v, cfg, hbar):
    """|E^MW - E^W| / E^W for constant potential v at the energies taus (h cancels)."""
    lat = landau_levels(cfg.f, hbar, float(np.max(taus) - v))
    s = _level_sum(np.asarray(taus) - v, lat.energies, cfg.q)
    norm = WeylNormalization()
    emw = norm.magnetic_constant(cfg.r, cfg.q) * hbar ** cfg.r * float(np.prod(cfg.f)) * s
    ew = norm.standard_constant(cfg.d) * (np.asarray(taus) - v) ** (cfg.d / 2.0)
    return np.abs(emw - ew) / ew


def weyl_limit_check(V, cfg, hbars, tau=1.0, x=None, eps0=0.05, window=True, n_window=513):
    """Relative gap between the magnetic and standard Weyl densities as mu*h -> 0.

    The ratio depends on (h, mu) only through hbar = mu*h.  With ``window`` the
    per-hbar deviation is the sup over energies in ``[tau, tau + 2 f_min hbar]``
    (one Landau spacing), which removes accidental cancellations at a single
    energy; the fixed-tau value is reported alongside.
    """
    v = float(np.max(_potential_values(V, x))) if V is not None else 0.0
    if tau - v < eps0:
        raise EmptyAllowedRegion(f"tau - V = {tau - v:.3g} < {eps0}")
    hbars = np.asarray(hbars, dtype=float)
    fmin = float(np.min(cfg.f))
    dev, fixed = [], []
    for hb in hbars:
        fixed.append(float(_relative_deviation(np.array([tau]), v, cfg, hb)[0]))
        if not window:
            dev.append(fixed[-1])
            continue
        taus = np.linspace(tau, tau + 2 * fmin * hb, n_window)
        if cfg.q == 0:
            lat = landau_levels(cfg.f, hb, tau + 2 * fmin * hb - v)
            jumps = lat.energies[lat.energies + v >= tau] + v
            taus = np.concatenate([taus, jumps, np.nextafter(jumps, np.inf)])
        dev.append(float(np.max(_relative_deviation(taus, v, cfg, hb))))
    dev = np.array(dev)
    return WeylLimitReport(hbars=hbars, deviations=dev, fixed_tau=np.array(fixed),
                           max_deviation=float(dev.max()), slope=_loglog_slope(hbars, dev),
                           windowed=window)


# ---------------------------------------------------------------------------
# circular averages
# ---------------------------------------------------------------------------

def averaged_potential(V, x, rho, plane=None, n_points=64):
    """Mean of V over the circle of radius rho around x in a 2-plane.

    ``plane`` is a pair of orthonormal vectors (default: the first two
    coordinate axes).  The N-point trapezoid rule is exact for trigonometric
    polynomials of degree < N.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if plane is None:
        u = np.zeros(d)
        w = np.zeros(d)
        u[0], w[1] = 1.0, 1.0
    else:
        u, w = (np.asarray(p, dtype=float) for p in plane)
    if rho == 0:
        return float(V(x))
    L = getattr(V, "L", math.inf)
    reach = np.abs(x) + rho * np.sqrt(u * u + w * w)
    if np.any(reach > L + 1e-12):
        raise CircleExitsDomain(f"circle of radius {rho} around {x} leaves [-{L}, {L}]^{d}")
    th = 2 * math.pi * np.arange(n_points) / n_points
    pts = x + rho * (np.cos(th)[:, None] * u + np.sin(th)[:, None] * w)
    return float(np.mean(V(pts)))


def mw_corrected_density(tau, x, V, cfg, scale, norm=None, n_points=64):
    """Magnetic Weyl density with V(x) replaced by its cyclotron-circle average.

    The circle has radius ``sqrt(tau - V(x)) / (mu f)`` in the field plane;
    only rank-one fields (r = 1) are supported.
    """
    if cfg.r != 1:
        raise OutOfRange("the circle-averaged correction is implemented for r = 1 only")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    plane = (cfg.basis[:, 0], cfg.basis[:, 1])
    vx = V(x)
    out = np.zeros(len(x))
    for i in range(len(x)):
        t = tau - vx[i]
        rho = math.sqrt(t) / (scale.mu * cfg.f[0]) if t > 0 else 0.0
        W = averaged_potential(V, x[i], rho, plane, n_points) if rho > 0 else float(vx[i])
        out[i] = magnetic_weyl_density(tau, None, W, cfg, scale, norm)
    return out


# ---------------------------------------------------------------------------
# psi-localised quadrature
# ---------------------------------------------------------------------------

@dataclass
class LocalizedValue:
    value: float
    error_estimate: float
    n: int
    meta: dict = field(default_factory=dict)


def _midpoint_grid(d, n, R):
    h = 2 * R / n
    ax = -R + h * (np.arange(n) + 0.5)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
    return mesh.reshape(-1, d), h ** d


def integrate_weighted(func, psi, d, radius=0.5, n=64):
    """Midpoint tensor quadrature of ``func * psi`` over [-radius, radius]^d.

    The error estimate compares n with n/2 (Richardson, second order).
    """
    if n % 2:
        n += 1
    check_psi_support(psi, _midpoint_grid(d, 33, 2 * radius)[0], radius)

    def quad(m):
        pts, w = _midpoint_grid(d, m, radius)
        ps = psi(pts)
        nz = ps != 0
        if not np.any(nz):
            return 0.0
        vals = np.zeros(len(pts))
        vals[nz] = func(pts[nz])
        return float(np.sum(vals * ps) * w)

    fine = quad(n)
    coarse = quad(n // 2)
    err = abs(fine - coarse) / 3.0
    return LocalizedValue(value=fine, error_estimate=err, n=n)


def localized_weyl(tau, V, psi, cfg=None, scale=None, kind="magnetic", norm=None, n=64, radius=0.5):
    """Integral of a Weyl-type density times psi.

    ``kind`` selects the density: ``magnetic`` (E^MW), ``corrected`` (E^MW with
    circle-averaged potential) or ``standard`` (E^W, needs ``scale`` for h).
    """
    d = cfg.d if cfg is not None else V.d
    if kind == "magnetic":
        func = lambda p: magnetic_weyl_density(tau, p, V, cfg, scale, norm)  # noqa: E731
    elif kind == "corrected":
        func = lambda p: mw_corrected_density(tau, p, V, cfg, scale, norm)  # noqa: E731
    elif kind == "standard":
        func = lambda p: standard_weyl_density(tau, p, V, d, scale.h, norm)  # noqa: E731
    else:
        raise OutOfRange(f"unknown density kind {kind!r}")
    out = integrate_weighted(func, psi, d, radius, n)
    out.meta = {"tau": float(tau), "kind": kind, "norm": _norm(norm).mode}
    return out


def psi_marginal(psi, cfg, y1, n=128):
    """``Psi(y1) = integral of psi over the second canonical coordinate`` (d = 2).

    Gauss-Legendre in ``y2`` over the support of psi.
    """
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    R = float(psi.support_radius())
    if not math.isfinite(R):
        raise OutOfRange("psi must have compact support for a marginal")
    t, w = np.polynomial.legendre.leggauss(n)
    y2 = R * t
    y = np.zeros((len(y1), n, 2))
    y[..., 0] = y1[:, None]
    y[..., 1] = y2[None, :]
    vals = psi((y @ cfg.basis.T).reshape(-1, 2)).reshape(len(y1), n)
    return vals @ (R * w)


def strip_potential(V, cfg, period=None):
    """V along the first canonical coordinate, wrapped to [-period/2, period/2) if given."""
    def v1(y1):
        y1 = np.atleast_1d(np.asarray(y1, dtype=float))
        if period is not None:
            y1 = np.mod(y1 + period / 2, period) - period / 2
        y = np.zeros((len(y1), cfg.d))
        y[:, 0] = y1
        return np.asarray(_potential_values(V, y @ cfg.basis.T), dtype=float)
    return v1


def localized_weyl_strip(tau, V, psi, cfg, scale, kind="magnetic", norm=None, n_scan=4001, xtol=1e-14):
    """Localized E^MW (or its circle-averaged variant) for d = 2, V = V(y1), q = 0.

    Both densities are then piecewise constant in ``y1``.  Jumps are found on
    a scan of ``n_scan`` points and refined by bisection to ``xtol``; each
    constant piece is integrated exactly against the psi marginal.
    """
    from scipy import integrate

    if cfg.d != 2 or cfg.q != 0:
        raise OutOfRange("strip integration needs d = 2 with a full-rank field")
    if kind == "magnetic":
        dens = lambda p: np.atleast_1d(magnetic_weyl_density(tau, p, V, cfg, scale, norm))  # noqa: E731
    elif kind == "corrected":
        dens = lambda p: np.atleast_1d(mw_corrected_density(tau, p, V, cfg, scale, norm))  # noqa: E731
    else:
        raise OutOfRange(f"unknown density kind {kind!r}")
    R = float(psi.support_radius())
    check_psi_support(psi, _midpoint_grid(2, 33, 2 * R)[0], R)

    def at(y1):
        y = np.zeros((len(y1), 2))
        y[:, 0] = y1
        return dens(y @ cfg.basis.T)

    ys = np.linspace(-R, R, n_scan)
    ds = at(ys)
    cuts = [-R, R]
    for i in np.nonzero(ds[1:] != ds[:-1])[0]:
        a, b = ys[i], ys[i + 1]
        da = ds[i]
        while b - a > xtol:
            m = 0.5 * (a + b)
            if at(np.array([m]))[0] == da:
                a = m
            else:
                b = m
        cuts.append(0.5 * (a + b))
    cuts = np.unique(np.array(cuts))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    rho = at(mids)
    total, err = 0.0, 0.0
    for a, b, r in zip(cuts[:-1], cuts[1:], rho):
        if r == 0.0:
            continue
        val, e = integrate.quad(lambda z: psi_marginal(psi, cfg, z)[0], a, b,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        total += r * val
        err += r * e
    return LocalizedValue(value=total, error_estimate=err, n=len(cuts),
                          meta={"tau": float(tau), "kind": kind + "-strip", "norm": _norm(norm).mode})


# ---------------------------------------------------------------------------
# lattice counting and its Diophantine modulus
# ---------------------------------------------------------------------------

def lattice_count(hbar, tau, f, Vconst=0.0, reading="scaled"):
    """n(hbar, tau): number of multi-indices below tau.

    ``scaled`` (default): hbar * sum(2a+1) f + V < tau.
    ``hbar_potential``: sum(2a+1) f + V * hbar < tau.
    """
    f = np.asarray(f, dtype=float)
    if reading == "scaled":
        fs, s = f * hbar, tau - Vconst
    elif reading == "hbar_potential":
        fs, s = f, tau - Vconst * hbar
    else:
        raise OutOfRange(f"unknown reading {reading!r}")
    if s <= float(np.sum(fs)):
        return 0
    est = _volume_estimate(fs, s)
    if est > COUNT_BUDGET:
        raise BudgetExceeded(f"about {est:.3g} lattice points")
    return kernels.count_below(fs, s)


@dataclass
class DiophantineEstimate:
    nu: float
    hbar: float
    pair: tuple
    n_grid: int
    f: tuple


def diophantine_modulus(f, hbar, tau_window=None, delta=None):
    """Empirical modulus sup_{tau < tau'} [(n(tau') - n(tau)) hbar^r - (tau' - tau)]_+ on a grid."""
    f = np.asarray(f, dtype=float)
    r = len(f)
    if tau_window is None:
        tau_window = (float(f.min()) * hbar, 1.0)
    if delta is None:
        delta = hbar / 16.0
    if delta > hbar / 4.0:
        raise GridTooCoarse(f"spacing {delta} exceeds hbar/4")
    lo, hi = tau_window
    m = int(math.floor((hi - lo) / delta)) + 1
    taus = lo + delta * np.arange(m)
    lat = landau_levels(f, hbar, hi)
    counts = np.searchsorted(lat.energies, taus, side="left")
    g = counts * hbar ** r - taus
    run_min = np.minimum.accumulate(g)
    arg_min = np.zeros(m, dtype=np.int64)
    best = 0
    for i in range(1, m):  # index of the running minimum, needed only for the report
        if g[i] < g[best]:
            best = i
        arg_min[i] = best
    gain = np.empty(m)
    gain[0] = 0.0
    gain[1:] = g[1:] - run_min[:-1]
    j = int(np.argmax(gain))
    nu = max(0.0, float(gain[j]))
    i = int(arg_min[j - 1]) if j > 0 else 0
    return DiophantineEstimate(nu=nu, hbar=float(hbar), pair=(float(taus[i]), float(taus[j])),
                               n_grid=m, f=tuple(float(v) for v in f))


# ---------------------------------------------------------------------------
# counting curves
# ---------------------------------------------------------------------------

PROVENANCES = ("exact-oracle", "dense", "inertia", "kpm", "weyl", "magnetic-weyl", "band")


@dataclass
class CountingCurve:
    taus: np.ndarray
    values: np.ndarray
    provenance: str
    localization: str = None
    stderr: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.provenance not in PROVENANCES:
            raise OutOfRange(f"unknown provenance {self.provenance!r}")
        if np.any(np.diff(self.taus) < 0):
            raise OutOfRange("taus must be ascending")

    def is_monotone(self, tol=0.0):
        return bool(np.all(np.diff(self.values) >= -tol))

    def rows(self):
        err = self.stderr if self.stderr is not None else np.full(len(self.taus), np.nan)
        return [(float(t), float(v), float(e), self.provenance) for t, v, e in zip(self.taus, self.values, err)]


def magnetic_weyl_curve(taus, V, cfg, scale, x=None, norm=None):
    vals = [magnetic_weyl_density(t, x, V, cfg, scale, norm) for t in taus]
    return CountingCurve(np.asarray(taus), np.asarray(vals, dtype=float), "magnetic-weyl",
                         meta={"norm": _norm(norm).mode})


def standard_weyl_curve(taus, V, d, h, x=None, norm=None):
    vals = [standard_weyl_density(t, x, V, d, h, norm) for t in taus]
    return CountingCurve(np.asarray(taus), np.asarray(vals, dtype=float), "weyl",
                         meta={"norm": _norm(norm).mode})
