"""Constant magnetic field configurations, semiclassical scales and regime labels.

Conventions used throughout the package:

* the vector potential is linear, ``A(x) = J x``, and the field intensity is
  ``F_jk = d_j A_k - d_k A_j`` (so ``F = J^T - J``);
* canonical coordinates ``y = x @ Q`` put ``F`` in the block form
  ``F[m, r+m] = -f_m``, ``F[r+m, m] = +f_m`` with ``f`` descending and the
  ``q`` kernel directions last;
* the canonical gauge is ``A_{r+m}(y) = -f_m y_m`` with every other
  component zero.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
from scipy import ndimage

from .errors import (ComplexArithmeticFailure, EpsTooLargeForDomain, GridTooCoarse,
                     NotSkewSymmetric, OutOfRange, ZeroField)
from .potential import PotentialField

# threshold constants for regime labels
REGIME_C = 1.0
REGIME_EPS = 0.5
REGIMES = ("weak", "intermediate", "strong", "superstrong", "ultrastrong")

SKEW_TOL = 1e-12
SPECTRUM_TOL = 1e-10


def canonical_matrix(f, q=0):
    f = np.asarray(f, dtype=float)
    r = len(f)
    d = 2 * r + q
    F = np.zeros((d, d))
    for m in range(r):
        F[m, r + m] = -f[m]
        F[r + m, m] = f[m]
    return F


@dataclass(eq=False)
class FieldConfig:
    """Constant field in ``d`` dimensions with frequencies ``f`` (descending)."""
    d: int
    F: np.ndarray
    f: np.ndarray
    r: int
    q: int
    basis: np.ndarray  # orthogonal Q, columns = canonical axes in original coordinates
    canonical_F: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_frequencies(cls, f, q=0):
        return field_invariants(canonical_matrix(sorted(f, reverse=True), q))

    @property
    def is_canonical(self):
        return bool(np.array_equal(self.basis, np.eye(self.d)))

    def to_canonical(self, x):
        return np.asarray(x, dtype=float) @ self.basis

    def from_canonical(self, y):
        return np.asarray(y, dtype=float) @ self.basis.T

    @property
    def jacobian(self):
        """Matrix J of the linear gauge ``A(x) = J x`` in original coordinates."""
        Jc = np.zeros((self.d, self.d))
        for m in range(self.r):
            Jc[self.r + m, m] = -self.f[m]
        return self.basis @ Jc @ self.basis.T

    @property
    def beta(self):
        """Pseudo-inverse of F (the inverse on the rank-2r block)."""
        return np.linalg.pinv(self.F, rcond=1e-12)

    def describe(self):
        return {"d": self.d, "f": [float(v) for v in self.f], "r": self.r, "q": self.q,
                "F": np.asarray(self.F).tolist()}


def field_invariants(F):
    """Frequencies, rank and canonical basis of a skew-symmetric intensity matrix."""
    F = np.array(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise NotSkewSymmetric("F must be a square matrix")
    d = F.shape[0]
    scale = max(1.0, float(np.max(np.abs(F)))) if F.size else 1.0
    asym = np.max(np.abs(F + F.T)) if F.size else 0.0
    if asym > SKEW_TOL * scale:
        raise NotSkewSymmetric(f"|F + F^T| = {asym:.3g}")
    F = 0.5 * (F - F.T)

    try:
        T, Z = scipy.linalg.schur(F, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ComplexArithmeticFailure(str(exc)) from exc

    zero_tol = SPECTRUM_TOL * scale
    pairs, kernel = [], []
    i = 0
    while i < d:
        if i + 1 < d and abs(T[i + 1, i]) > zero_tol:
            u, v = Z[:, i], Z[:, i + 1]
            b = float(u @ F @ v)
            fm = math.sqrt(abs(T[i, i + 1] * T[i + 1, i]))
            if fm <= zero_tol:
                kernel += [u, v]
            elif b < 0:
                pairs.append((fm, u, v))
            else:
                pairs.append((fm, v, u))
            i += 2
        else:
            kernel.append(Z[:, i])
            i += 1
    if not pairs:
        raise ZeroField("F has no nonzero frequencies")
    pairs.sort(key=lambda p: -p[0])
    f = np.array([p[0] for p in pairs])
    r = len(f)
    q = d - 2 * r

    canon = canonical_matrix(f, q)
    if np.max(np.abs(F - canon)) <= SKEW_TOL * scale:
        Q = np.eye(d)
        f = np.array([-F[m, r + m] for m in range(r)])
        canon = canonical_matrix(f, q)
    else:
        cols = [p[1] for p in pairs] + [p[2] for p in pairs] + kernel
        Q = np.column_stack(cols)
        # refine the frequencies from the rotated matrix itself
        Fc = Q.T @ F @ Q
        f = np.array([-Fc[m, r + m] for m in range(r)])
        canon = canonical_matrix(f, q)
        if np.max(np.abs(Fc - canon)) > SPECTRUM_TOL * scale:
            raise ComplexArithmeticFailure("block reduction of F did not converge")

    ev = np.sort(np.abs(np.linalg.eigvals(F).imag))
    expect = np.sort(np.concatenate([f, f, np.zeros(q)]))
    if np.max(np.abs(ev - expect)) > SPECTRUM_TOL * scale:
        raise ComplexArithmeticFailure("spectrum of F does not match the extracted frequencies")
    return FieldConfig(d=d, F=F, f=f, r=r, q=q, basis=Q, canonical_F=canon)


# ---------------------------------------------------------------------------
# semiclassical scales
# ---------------------------------------------------------------------------

def regime_thresholds(h, d, q=0, C=REGIME_C, eps=REGIME_EPS):
    hl = h * abs(math.log(h))
    weak_exp = -1.0 / 3.0 if d == 2 else -0.5
    out = {
        "weak": C * hl ** weak_exp,
        "intermediate": C * hl ** -1.0,
        "strong": eps / h,
        "superstrong": C / h,
    }
    if q >= 1:
        out["mu_star1"] = h ** (-q / (q + 2.0))
    return out


def classify_regime(h, mu, d=2, q=0, C=REGIME_C, eps=REGIME_EPS):
    """Regime label and the thresholds used; the label is the first bound mu satisfies."""
    if not (0.0 < h < 1.0):
        raise OutOfRange(f"h must lie in (0, 1), got {h}")
    if mu < 1.0:
        raise OutOfRange(f"mu must be >= 1, got {mu}")
    th = regime_thresholds(h, d, q, C, eps)
    for name in REGIMES[:-1]:
        if mu <= th[name]:
            return name, th
    return "ultrastrong", th


@dataclass(frozen=True)
class SemiclassicalScale:
    h: float
    mu: float
    regime: str
    rho_bar1: float
    eps_weak: float
    thresholds: dict = field(default_factory=dict, compare=False)

    @property
    def hbar(self):
        """Effective Planck constant mu*h."""
        return self.mu * self.h

    def magnetic_length(self, f=1.0):
        return math.sqrt(self.h / (self.mu * f))


def semiclassical_scale(h, mu, d=2, q=0, C=REGIME_C):
    """Scale record; h = 1 is allowed but left unclassified (the thresholds need h < 1)."""
    if h == 1.0 and mu >= 1.0:
        regime, th = "unclassified", {}
    else:
        regime, th = classify_regime(h, mu, d, q, C)
    hl = h * abs(math.log(h))
    rho = C * max(1.0 / mu, math.sqrt(mu * hl))
    return SemiclassicalScale(h=float(h), mu=float(mu), regime=regime, rho_bar1=rho,
                              eps_weak=C * mu * hl, thresholds=th)


def gauge_potential(cfg, x):
    """Linear vector potential at points (..., d); canonical gauge in the stored basis."""
    x = np.asarray(x, dtype=float)
    return x @ cfg.jacobian.T


def gauge_curl(cfg):
    J = cfg.jacobian
    return J.T - J


# ---------------------------------------------------------------------------
# mollification and non-degeneracy
# ---------------------------------------------------------------------------

def mollify(V, eps, n=None):
    """Gaussian smoothing of V at length ``eps`` on its box grid.

    Expression potentials are first sampled; the result is a grid potential
    with linear interpolation (which keeps the output within the input range).
    """
    if eps <= 0:
        raise OutOfRange("eps must be positive")
    if eps > V.L / 4:
        raise EpsTooLargeForDomain(f"eps={eps} exceeds L/4={V.L / 4}")
    if V.grid is None:
        if n is None:
            n = int(math.ceil(8 * V.L / eps)) + 1
            n = max(n, 65)
            cap = int(4e6 ** (1.0 / V.d))
            n = min(n, cap)
        G = V.to_grid(n)
    else:
        G = V
    dx = 2 * G.L / (G.grid.shape[0] - 1)
    sm = ndimage.gaussian_filter(G.grid, sigma=eps / dx, mode="nearest", truncate=4.0)
    return PotentialField(d=V.d, L=G.L, grid=sm, smoothness=(math.inf, 0.0), interp_order=1,
                          name=f"mollify({V.describe()},{eps!r})")


@dataclass
class NondegeneracyReport:
    which: str
    holds: bool
    margin: float
    worst_point: np.ndarray
    eps0: float


def _ball_samples(d, n):
    ax = np.linspace(-1.0, 1.0, n)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return mesh[np.sum(mesh * mesh, axis=1) <= 1.0 + 1e-12]


def check_nondegeneracy(V, which, scale=None, cfg=None, eps0=0.05, n=None, tau=0.0):
    """Sampled check of one of the non-degeneracy conditions on the unit ball.

    ``potential_nonzero``: |V| >= eps0.  ``gradient_nonzero``: |grad V| >= eps0.
    ``level_nondegenerate``: |tau - V - E_alpha| + |grad V| >= eps0 for every Landau level
    E_alpha up to ``tau - min V + 1``.  ``below_lowest_level``: tau - V - sum(f) mu h <= -eps0.
    """
    if n is None:
        n = 65 if V.d <= 3 else 33
    if n < 32:
        raise GridTooCoarse(f"need at least 32 samples per axis, got {n}")
    if n % 2 == 0:
        n += 1  # keep the origin on the grid
    pts = _ball_samples(V.d, n)
    if which == "potential_nonzero":
        vals = np.abs(V(pts))
    elif which == "gradient_nonzero":
        vals = np.linalg.norm(V.gradient(pts), axis=-1)
    elif which in ("level_nondegenerate", "below_lowest_level"):
        if scale is None or cfg is None:
            raise OutOfRange(f"{which} needs scale and cfg")
        hb = scale.hbar
        v = V(pts)
        if which == "below_lowest_level":
            vals = -(tau - v - hb * float(np.sum(cfg.f)))
        else:
            from .kernels import enumerate_levels
            emax = tau - float(v.min()) + 1.0
            levels, _ = enumerate_levels(cfg.f * hb, emax)
            levels = np.union1d(levels, [hb * float(np.sum(cfg.f))])
            g = np.linalg.norm(V.gradient(pts), axis=-1)
            gap = np.min(np.abs(tau - v[:, None] - levels[None, :]), axis=1)
            vals = gap + g
    else:
        raise OutOfRange(f"unknown condition {which!r}")
    k = int(np.argmin(vals))
    margin = float(vals[k])
    return NondegeneracyReport(which=which, holds=margin >= eps0, margin=margin,
                               worst_point=pts[k], eps0=eps0)
