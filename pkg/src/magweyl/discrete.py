"""Finite-difference magnetic Schrodinger operators on a box.

The grid lives in the canonical coordinates ``y`` of the field (see
``field.py``); potentials are evaluated at ``x = Q y``.

Torus boundary: kinetic hops carry Peierls phases ``exp(-i mu/h A_a s dx)``
in the Landau gauge ``A_{r+m} = -f_m y_m``.  Hops along ``y_m`` that wrap
around the box pick up the compensating gauge phase ``exp(-/+ i mu 2L f_m
y_{r+m} / h)``, which makes every plaquette (including those that straddle the
seam) carry the same flux ``mu f dx^2 / h``.  This needs the total flux
``mu f_m (2L)^2 / (2 pi h)`` to be an integer, so L is snapped.

Dirichlet boundary: the operator is expanded as
``-h^2 Lap + 2 i mu h A.grad + mu^2 |A|^2 + V`` with central differences
(``div A = 0`` in this gauge) and zero boundary values.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.sparse as sp

from .errors import (FluxNotQuantizable, GridTooCoarse, IncompleteFamily, InvariantViolation,
                     NotSeparable, OutOfRange, ResolutionTooCoarse)
from .weyl import CountingCurve, landau_levels

# -d^2/dx^2 stencils (offset -> weight) and d/dx stencils (positive offsets)
LAPLACE = {2: {0: 2.0, 1: -1.0}, 4: {0: 2.5, 1: -4.0 / 3.0, 2: 1.0 / 12.0}}
FIRST = {2: {1: 0.5}, 4: {1: 2.0 / 3.0, 2: -1.0 / 12.0}}

MIN_POINTS = 16
RESOLUTION_WARN = 4.0
RESOLUTION_FAIL = 1.0
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    d: int
    n: int
    L: float
    boundary: str = "torus"
    order: int = 2

    def __post_init__(self):
        if self.boundary not in ("torus", "dirichlet"):
            raise OutOfRange(f"unknown boundary {self.boundary!r}")
        if self.order not in LAPLACE:
            raise OutOfRange("stencil order must be 2 or 4")
        if self.n < MIN_POINTS:
            raise GridTooCoarse(f"need n >= {MIN_POINTS} points per axis, got {self.n}")

    def spacing(self, L=None):
        L = self.L if L is None else L
        return 2 * L / self.n if self.boundary == "torus" else 2 * L / (self.n + 1)

    def axis(self, L=None):
        L = self.L if L is None else L
        dx = self.spacing(L)
        if self.boundary == "torus":
            return -L + dx * np.arange(self.n)
        return -L + dx * (np.arange(self.n) + 1)

    @property
    def size(self):
        return self.n ** self.d


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: sp.csr_matrix
    grid: GridSpec
    L: float            # box half-width actually used (after flux snapping)
    spacing: float
    points: np.ndarray  # site positions in original coordinates, shape (N, d)
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def cell_volume(self):
        return self.spacing ** self.grid.d

    def hermiticity_residual(self):
        M = self.matrix
        diff = abs(M - M.conj().T)
        num = diff.max() if diff.nnz else 0.0
        den = abs(M).max() if M.nnz else 1.0
        return float(num / den) if den else float(num)

    def psi_weights(self, psi):
        return np.asarray(psi(self.points), dtype=float)

    def to_dense(self):
        return self.matrix.toarray()

    def export_coo(self, path):
        """Write ``row col re im`` lines (0-based) for external cross-checks."""
        coo = self.matrix.tocoo()
        data = np.column_stack([coo.row, coo.col, coo.data.real, coo.data.imag])
        np.savetxt(path, data, fmt=["%d", "%d", "%.17g", "%.17g"],
                   header=f"dim {self.dim} nnz {coo.nnz}")


def flux_quantize(cfg, scale, L, tol=1e-9, max_rel_change=0.5):
    """Snap L so every plane carries an integer flux; returns (L, fluxes, record)."""
    f = np.asarray(cfg.f, dtype=float)
    base = scale.mu * (2 * L) ** 2 / (2 * math.pi * scale.h)
    target = base * f[0]
    start = max(1, int(round(target)))
    candidates = sorted(range(max(1, int(target * (1 - max_rel_change))),
                              int(target * (1 + max_rel_change)) + 2),
                        key=lambda k: (abs(k - target), k))
    if start not in candidates:
        candidates.insert(0, start)
    for n1 in candidates:
        fluxes = n1 * f / f[0]
        if np.all(np.abs(fluxes - np.round(fluxes)) <= tol * np.maximum(1.0, fluxes)) and np.all(np.round(fluxes) >= 1):
            fluxes = np.round(fluxes).astype(int)
            new_L = 0.5 * math.sqrt(2 * math.pi * scale.h * n1 / (scale.mu * f[0]))
            record = {"L_requested": float(L), "L": new_L, "flux": fluxes.tolist(),
                      "snapped": not math.isclose(new_L, L, rel_tol=1e-12)}
            return new_L, fluxes, record
    raise FluxNotQuantizable(f"no integer flux assignment near L={L} for f={f.tolist()}")


def landau_degeneracy(cfg, scale, L):
    """Number of states per Landau multi-index on the torus [-L, L]^d (product of fluxes)."""
    fl = scale.mu * np.asarray(cfg.f) * (2 * L) ** 2 / (2 * math.pi * scale.h)
    return float(np.prod(fl))


def landau_grid_error(alpha, hbar, phi, order=2):
    """Leading stencil shift of the discrete Landau level ``alpha`` (one field plane).

    ``phi = mu f dx^2 / h`` is the flux per plaquette.  Order 2 lowers the
    level by ``hbar ((2a+1)^2 + 1) phi / 16``; order 4 by
    ``hbar (4a^3 + 6a^2 + 8a + 3) phi^2 / 72`` (fourth and sixth oscillator
    moments).
    """
    a = np.asarray(alpha, dtype=float)
    if order == 2:
        return hbar * ((2 * a + 1) ** 2 + 1) * phi / 16.0
    return hbar * (4 * a ** 3 + 6 * a ** 2 + 8 * a + 3) * phi ** 2 / 72.0


def resolution_ratio(cfg, scale, spacing):
    if cfg is None:
        return math.inf
    ell = math.sqrt(scale.h / (scale.mu * float(np.max(cfg.f))))
    return ell / spacing


def _values(V, pts):
    if V is None:
        return np.zeros(len(pts))
    if np.isscalar(V):
        return np.full(len(pts), float(V))
    return np.asarray(V(pts), dtype=float)


def _describe(V):
    if V is None:
        return "0"
    if np.isscalar(V):
        return repr(float(V))
    return V.describe() if hasattr(V, "describe") else repr(V)


def assemble(V, cfg, scale, grid, gauge_shift=None, snap=True):
    """Hermitian sparse discretization of sum_j (h D_j - mu A_j)^2 + V.

    ``cfg=None`` gives the field-free operator.  ``gauge_shift`` adds a
    constant vector (canonical components) to A, i.e. a linear gauge change.
    """
    d, n, order = grid.d, grid.n, grid.order
    if cfg is not None and cfg.d != d:
        raise OutOfRange(f"grid dimension {d} does not match field dimension {cfg.d}")
    h, mu = scale.h, scale.mu
    L = grid.L
    flux = None
    if cfg is not None and grid.boundary == "torus":
        if snap:
            L, fl, flux = flux_quantize(cfg, scale, grid.L)
        else:
            fl = mu * np.asarray(cfg.f) * (2 * L) ** 2 / (2 * math.pi * h)
            if np.any(np.abs(fl - np.round(fl)) > 1e-9):
                raise FluxNotQuantizable(f"flux {fl.tolist()} is not integer and snapping is off")
            flux = {"L_requested": float(L), "L": float(L), "flux": np.round(fl).astype(int).tolist(),
                    "snapped": False}
    dx = grid.spacing(L)
    ratio = resolution_ratio(cfg, scale, dx)
    warn = []
    if ratio < RESOLUTION_FAIL:
        raise ResolutionTooCoarse(f"magnetic length / spacing = {ratio:.3g} < {RESOLUTION_FAIL}")
    if ratio < RESOLUTION_WARN:
        msg = f"magnetic length / spacing = {ratio:.3g} < {RESOLUTION_WARN}"
        warn.append(msg)
        warnings.warn(msg, stacklevel=2)

    ax = grid.axis(L)
    shape = (n,) * d
    idx = np.indices(shape).reshape(d, -1).T
    y = ax[idx]
    N = len(y)
    strides = np.array([n ** (d - 1 - a) for a in range(d)])
    site = np.arange(N)

    r = 0 if cfg is None else cfg.r
    f = np.zeros(0) if cfg is None else np.asarray(cfg.f, dtype=float)
    Q = np.eye(d) if cfg is None else cfg.basis
    A = np.zeros((N, d))
    for m in range(r):
        A[:, r + m] = -f[m] * y[:, m]
    if gauge_shift is not None:
        A += np.asarray(gauge_shift, dtype=float)

    x = y @ Q.T
    diag = _values(V, x).astype(complex)
    lap = LAPLACE[order]
    kin = h * h / (dx * dx)
    diag += d * lap[0] * kin
    rows, cols, vals = [site], [site], [diag]

    for a in range(d):
        k = idx[:, a]
        for s_abs, w in lap.items():
            if s_abs == 0:
                continue
            for s in (s_abs, -s_abs):
                kn = k + s
                if grid.boundary == "torus":
                    wrap = np.floor_divide(kn, n)
                    kn = kn - wrap * n
                    theta = -mu / h * A[:, a] * s * dx
                    if a < r:
                        theta = theta - mu * 2 * L * f[a] * y[:, r + a] * wrap / h
                    val = w * kin * np.exp(1j * theta)
                    nb = site + (kn - k) * strides[a]
                    rows.append(site)
                    cols.append(nb)
                    vals.append(val)
                else:
                    ok = (kn >= 0) & (kn < n)
                    nb = site[ok] + s * strides[a]
                    sign = 1.0 if s > 0 else -1.0
                    dcoef = FIRST[order][s_abs] * sign / dx
                    val = w * kin + 2j * mu * h * A[ok, a] * dcoef
                    rows.append(site[ok])
                    cols.append(nb)
                    vals.append(val.astype(complex))
    if grid.boundary == "dirichlet":
        vals[0] = vals[0] + mu * mu * np.sum(A * A, axis=1)

    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    M.sum_duplicates()
    op = DiscreteOperator(matrix=M, grid=grid, L=float(L), spacing=float(dx), points=x, meta={
        "cfg": None if cfg is None else cfg.describe(),
        "h": float(h), "mu": float(mu),
        "regime": getattr(scale, "regime", None),
        "V": _describe(V),
        "flux": flux,
        "gauge_shift": None if gauge_shift is None else [float(v) for v in gauge_shift],
        "resolution_ratio": float(ratio),
        "warnings": warn,
        "r": r,
    })
    res = op.hermiticity_residual()
    op.meta["hermiticity_residual"] = res
    if res > HERMITIAN_TOL:
        raise InvariantViolation(f"assembled matrix is not Hermitian (residual {res:.3g})")
    return op


# ---------------------------------------------------------------------------
# Landau band reduction for potentials of the kernel coordinates only
# ---------------------------------------------------------------------------

class _KernelRestriction:
    """V as a function of the q kernel coordinates (other canonical coordinates at 0)."""

    def __init__(self, V, cfg):
        self.V, self.cfg = V, cfg
        self.d = cfg.q
        self.L = getattr(V, "L", 1.0)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        y = np.zeros(z.shape[:-1] + (self.cfg.d,))
        y[..., 2 * self.cfg.r:] = z
        return self.V(y @ self.cfg.basis.T)

    def describe(self):
        return f"restrict[{_describe(self.V)}]"


@dataclass
class BandFamily:
    levels: object          # LandauLattice, shifts E_alpha
    e_cut: float
    q: int
    v_min: float
    base: DiscreteOperator = None
    base_eigs: np.ndarray = None
    v0: float = None        # constant potential when q = 0

    def __len__(self):
        return len(self.levels.energies)

    def potentials(self):
        """V_alpha: scalars for q = 0, (E_alpha, base) pairs otherwise."""
        if self.q == 0:
            return self.levels.energies + self.v0
        return [(float(e), self.base) for e in self.levels.energies]


def band_reduce(V, cfg, scale, e_cut, grid1d=None, tol=1e-10):
    """Family of kernel-direction operators A_alpha = -h^2 Lap + V + E_alpha."""
    kernel_axes = list(range(2 * cfg.r, cfg.d))
    if V is not None and not np.isscalar(V):
        if not V.depends_only_on(kernel_axes, basis=cfg.basis, tol=tol):
            raise NotSeparable("potential depends on field-plane coordinates")
    if cfg.q == 0:
        v0 = float(_values(V, np.zeros((1, cfg.d)))[0])
        lat = landau_levels(cfg.f, scale.hbar, e_cut - v0)
        return BandFamily(levels=lat, e_cut=float(e_cut), q=0, v_min=v0, v0=v0)
    if grid1d is None or grid1d.d != cfg.q:
        raise OutOfRange(f"band_reduce needs a {cfg.q}-dimensional kernel grid")
    Vk = _KernelRestriction(V, cfg) if (V is not None and not np.isscalar(V)) else V
    base = assemble(Vk, None, scale, grid1d)
    eigs = np.linalg.eigvalsh(base.to_dense())
    v_min = float(np.min(_values(Vk, base.points)))
    lat = landau_levels(cfg.f, scale.hbar, e_cut - v_min)
    return BandFamily(levels=lat, e_cut=float(e_cut), q=cfg.q, v_min=v_min, base=base, base_eigs=eigs)


def band_counting(family, taus, degeneracy=1.0):
    """N(tau) = degeneracy * sum_alpha #{eigenvalues of A_alpha <= tau}."""
    taus = np.asarray(taus, dtype=float)
    if len(taus) and taus.max() > family.e_cut + 1e-12:
        raise IncompleteFamily(f"tau up to {taus.max()} but the family stops at {family.e_cut}")
    E = family.levels.energies
    counts = np.zeros(len(taus))
    if family.q == 0:
        counts = np.searchsorted(E + family.v0, taus, side="right").astype(float)
    else:
        for e in E:
            counts += np.searchsorted(family.base_eigs, taus - e, side="right")
    return CountingCurve(taus, degeneracy * counts, "band",
                         meta={"n_bands": len(E), "degeneracy": float(degeneracy)})
