"""Eigenvalue counting engines: dense, inertia (sparse LDL^H) and KPM.

Counting convention everywhere: ``N(tau) = #{lambda <= tau}``.
"""
from dataclasses import dataclass, field
import math
import time

import numpy as np
import scipy.interpolate
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from . import kernels
from .errors import (DimensionTooLarge, FactorizationBreakdown, MomentOverflow, NonFiniteMoment,
                     NotSeparable, OutOfRange)
from .weyl import CountingCurve, psi_marginal, strip_potential

DENSE_CAP = 6000
TIE_SHIFT = 1e-10


def _matrix(op):
    return op.matrix if hasattr(op, "matrix") else sp.csr_matrix(op)


def _grid_shape(op):
    g = getattr(op, "grid", None)
    if g is None or g.boundary != "torus":
        return None
    return (g.n,) * g.d


# ---------------------------------------------------------------------------
# translation-symmetry block reduction
# ---------------------------------------------------------------------------

@dataclass
class SymmetryReduction:
    """Unitary change of basis by a DFT along ``axes`` and the resulting blocks.

    ``Hp`` is ``U^H M U`` in the same multi-index layout as M (axes in
    ``axes`` now hold momenta); ``blocks`` lists index arrays of decoupled
    diagonal blocks.
    """
    shape: tuple
    axes: tuple
    Hp: sp.csr_matrix
    blocks: list

    def to_site(self, c):
        """U c: momentum-basis vectors (columns) -> site basis."""
        c = np.asarray(c)
        k = c.shape[1] if c.ndim == 2 else None
        arr = c.reshape(self.shape + ((k,) if k else ()))
        out = np.fft.ifftn(arr, axes=self.axes)
        out = out * math.sqrt(np.prod([self.shape[a] for a in self.axes]))
        return out.reshape(c.shape)

    def to_momentum(self, x):
        x = np.asarray(x)
        k = x.shape[1] if x.ndim == 2 else None
        arr = x.reshape(self.shape + ((k,) if k else ()))
        out = np.fft.fftn(arr, axes=self.axes) / math.sqrt(np.prod([self.shape[a] for a in self.axes]))
        return out.reshape(x.shape)


def _pure_phase_transform(M, shape, axes, tol):
    """Try to express M in the DFT basis along ``axes``; None if M is not covariant."""
    d = len(shape)
    n = shape[0]
    axes = tuple(axes)
    other = tuple(a for a in range(d) if a not in axes)
    coo = M.tocoo()
    R = np.array(np.unravel_index(coo.row, shape)).T
    C = np.array(np.unravel_index(coo.col, shape)).T
    v = coo.data
    t = R[:, axes]
    delta = np.mod(C[:, axes] - R[:, axes], n)
    key = np.column_stack([R[:, other], C[:, other], delta])
    groups, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    size = n ** len(axes)
    if np.any(counts != size):
        return None
    tflat = np.ravel_multi_index(tuple(t.T), (n,) * len(axes))
    G = np.zeros((len(groups), size), dtype=complex)
    G[inv, tflat] = v
    a0 = G[:, 0]
    scale = max(np.abs(v).max(), 1e-300)
    if np.any(np.abs(a0) <= tol * scale):
        return None
    c = np.zeros((len(groups), len(axes)), dtype=np.int64)
    for i in range(len(axes)):
        e = [0] * len(axes)
        e[i] = 1
        ratio = G[:, np.ravel_multi_index(tuple(e), (n,) * len(axes))] / a0
        c[:, i] = np.mod(np.round(np.angle(ratio) * n / (2 * math.pi)).astype(np.int64), n)
    tgrid = np.array(np.unravel_index(np.arange(size), (n,) * len(axes))).T
    pred = a0[:, None] * np.exp(2j * math.pi * (c @ tgrid.T) / n)
    if np.max(np.abs(pred - G)) > tol * scale:
        return None
    # H'[(o, m), (o', m - c)] = a exp(2 pi i (m - c).delta / n)
    o_row = groups[:, :len(other)]
    o_col = groups[:, len(other):2 * len(other)]
    dl = groups[:, 2 * len(other):]
    m = tgrid  # every momentum
    rows, cols, vals = [], [], []
    for gi in range(len(groups)):
        mc = np.mod(m - c[gi], n)
        val = a0[gi] * np.exp(2j * math.pi * (mc @ dl[gi]) / n)
        ri = np.zeros((size, d), dtype=np.int64)
        ci = np.zeros((size, d), dtype=np.int64)
        ri[:, list(other)] = o_row[gi]
        ci[:, list(other)] = o_col[gi]
        ri[:, list(axes)] = m
        ci[:, list(axes)] = mc
        rows.append(np.ravel_multi_index(tuple(ri.T), shape))
        cols.append(np.ravel_multi_index(tuple(ci.T), shape))
        vals.append(val)
    N = M.shape[0]
    Hp = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    Hp.sum_duplicates()
    return Hp


def symmetry_reduce(op, tol=1e-12, check_tol=1e-10, seed=0):
    """Block-diagonalize a torus operator by DFTs along translation-covariant axes.

    Returns None when no axis qualifies or the FFT consistency check fails.
    """
    shape = _grid_shape(op)
    if shape is None:
        return None
    M = _matrix(op)
    good = [a for a in range(len(shape)) if _pure_phase_transform(M, shape, (a,), tol) is not None]
    if not good:
        return None
    for axes in (tuple(good), (good[0],)):
        Hp = _pure_phase_transform(M, shape, axes, tol)
        if Hp is None:
            continue
        red = SymmetryReduction(shape=shape, axes=axes, Hp=Hp, blocks=[])
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
        lhs = M @ red.to_site(c)
        rhs = red.to_site(Hp @ c)
        if np.max(np.abs(lhs - rhs)) > check_tol * max(1.0, np.abs(lhs).max()):
            continue
        ncomp, labels = csgraph.connected_components(abs(Hp) + abs(Hp).T, directed=False)
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
        red.blocks = [order[bounds[i]:bounds[i + 1]] for i in range(ncomp)]
        return red
    return None


# ---------------------------------------------------------------------------
# dense engine
# ---------------------------------------------------------------------------

@dataclass
class DenseSpectrum:
    eigenvalues: np.ndarray
    meta: dict = field(default_factory=dict)
    vectors: np.ndarray = None   # site-basis eigenvectors (columns), if requested


def dense_spectrum(op, cap=DENSE_CAP, use_symmetry=True, vectors_below=None):
    """All eigenvalues, via symmetry blocks when the grid allows it.

    ``cap`` bounds the largest matrix handed to the dense eigensolver.  With
    ``vectors_below`` the eigenvectors of eigenvalues <= that value are
    returned in the site basis.
    """
    t0 = time.perf_counter()
    M = _matrix(op)
    red = symmetry_reduce(op) if use_symmetry else None
    blocks = red.blocks if red is not None else [np.arange(M.shape[0])]
    largest = max(len(b) for b in blocks)
    if largest > cap:
        raise DimensionTooLarge(f"dense block of size {largest} exceeds cap {cap}")
    H = red.Hp if red is not None else M
    H = H.tocsr()
    evals, vecs = [], []
    for b in blocks:
        sub = H[b][:, b].toarray()
        if vectors_below is None:
            evals.append(scipy.linalg.eigvalsh(sub, check_finite=False))
            continue
        w, v = scipy.linalg.eigh(sub, check_finite=False)
        evals.append(w)
        keep = w <= vectors_below
        if np.any(keep):
            full = np.zeros((M.shape[0], int(keep.sum())), dtype=complex)
            full[b] = v[:, keep]
            vecs.append((w[keep], full))
    ev = np.sort(np.concatenate(evals))
    meta = {"engine": "dense", "dim": int(M.shape[0]), "n_blocks": len(blocks), "largest_block": int(largest),
            "symmetry_axes": list(red.axes) if red is not None else [],
            "time_s": time.perf_counter() - t0}
    out = DenseSpectrum(eigenvalues=ev, meta=meta)
    if vectors_below is not None:
        if vecs:
            w = np.concatenate([x[0] for x in vecs])
            V = np.concatenate([x[1] for x in vecs], axis=1)
            if red is not None:
                V = red.to_site(V)
            order = np.argsort(w, kind="stable")
            out.vectors = V[:, order]
            out.meta["vector_eigenvalues"] = w[order]
        else:
            out.vectors = np.zeros((M.shape[0], 0), dtype=complex)
            out.meta["vector_eigenvalues"] = np.zeros(0)
    return out


def dense_counting(op, taus, cap=DENSE_CAP, use_symmetry=True, spectrum=None):
    taus = np.asarray(taus, dtype=float)
    spec = spectrum if spectrum is not None else dense_spectrum(op, cap, use_symmetry)
    vals = np.searchsorted(spec.eigenvalues, taus, side="right")
    return CountingCurve(taus, vals.astype(float), "dense", meta=dict(spec.meta))


def dense_local_counting(op, taus, psi_weights, cap=DENSE_CAP, use_symmetry=True):
    """sum_{lambda <= tau} sum_x psi(x) |v_lambda(x)|^2 from a full eigendecomposition."""
    taus = np.asarray(taus, dtype=float)
    w = np.asarray(psi_weights, dtype=float)
    spec = dense_spectrum(op, cap, use_symmetry, vectors_below=float(taus.max()))
    lam = spec.meta["vector_eigenvalues"]
    weight = np.real(np.einsum("i,ij,ij->j", w, spec.vectors.conj(), spec.vectors)) if len(lam) else np.zeros(0)
    csum = np.concatenate([[0.0], np.cumsum(weight)])
    vals = csum[np.searchsorted(lam, taus, side="right")]
    meta = {k: v for k, v in spec.meta.items() if k != "vector_eigenvalues"}
    return CountingCurve(taus, vals, "dense", localization="psi", meta=meta)


# ---------------------------------------------------------------------------
# inertia engine
# ---------------------------------------------------------------------------

def _negative_count_dense(A):
    _, D, _ = scipy.linalg.ldl(A, hermitian=True)
    return int(np.sum(np.linalg.eigvalsh(D) < 0))


def count_below(M, tau, pivot_tol=1e-13):
    """#{lambda < tau} from a sparse symmetric-mode LU of M - tau I (Sylvester inertia).

    Raises FactorizationBreakdown on a tiny pivot or a non-symmetric permutation.
    """
    N = M.shape[0]
    A = (M - tau * sp.identity(N, dtype=M.dtype, format="csc")).tocsc()
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise FactorizationBreakdown(str(exc)) from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationBreakdown("factorization used a non-symmetric permutation")
    dU = lu.U.diagonal()
    scale = max(abs(M).max(), abs(tau), 1.0)
    # pivots of a Hermitian LDL^H are real; rounding leaves a small imaginary
    # part, and the sign is trusted only when the real part clearly dominates
    ambiguous = np.abs(dU.real) <= np.maximum(pivot_tol * scale, 10.0 * np.abs(dU.imag))
    if np.any(ambiguous):
        raise FactorizationBreakdown("tiny or ill-determined pivot")
    return int(np.sum(dU.real < 0))


def _count_le(M, tau, record, dense_cap):
    """#{lambda <= tau}: ties are pushed to inclusion by a 1e-10 shift."""
    for shift in (0.0, TIE_SHIFT, 2 * TIE_SHIFT):
        try:
            c = count_below(M, tau + shift)
            if shift:
                record.append({"tau": float(tau), "shift": shift})
            if shift == 0.0:
                # a strict count; exact ties at tau would be missed, so confirm
                # against the count just above
                c_up = count_below(M, tau + TIE_SHIFT)
                if c_up != c:
                    record.append({"tau": float(tau), "shift": TIE_SHIFT})
                    return c_up
            return c
        except FactorizationBreakdown:
            continue
    if M.shape[0] <= dense_cap:
        record.append({"tau": float(tau), "fallback": "dense-ldl"})
        A = M.toarray() - (tau + TIE_SHIFT) * np.eye(M.shape[0])
        return _negative_count_dense(A)
    raise FactorizationBreakdown(f"inertia count failed at tau={tau}")


def inertia_counting(op, taus, dense_cap=DENSE_CAP):
    t0 = time.perf_counter()
    M = _matrix(op).tocsc()
    taus = np.asarray(taus, dtype=float)
    record = []
    vals = np.array([_count_le(M, t, record, dense_cap) for t in taus], dtype=float)
    return CountingCurve(taus, vals, "inertia", meta={"engine": "inertia", "perturbations": record,
                                                      "time_s": time.perf_counter() - t0})


# ---------------------------------------------------------------------------
# KPM engine
# ---------------------------------------------------------------------------

@dataclass
class TraceEstimate:
    value: float
    stderr: float
    n_vectors: int
    n_moments: int
    kernel: str
    tau: float = None


@dataclass
class KPMResult:
    estimates: list
    curve: CountingCurve
    bounds: tuple
    resolution: float
    seed: int
    meta: dict = field(default_factory=dict)


def spectral_bounds(M, n_iter=30, pad=0.01, pad_unconverged=0.05, seed=0):
    """(lo, hi, converged) from power iterations on M and on M - lambda_dominant."""
    rng = np.random.default_rng([seed, 2**31 - 1])
    N = M.shape[0]

    def power(A, shift=0.0):
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        x /= np.linalg.norm(x)
        lam, prev = 0.0, None
        for _ in range(n_iter):
            y = A @ x - shift * x
            nrm = np.linalg.norm(y)
            if nrm == 0:
                return shift, True
            lam, prev = float(np.real(np.vdot(x, y))), lam
            x = y / nrm
        conv = prev is not None and abs(lam - prev) <= 1e-3 * max(abs(lam), 1e-12)
        return lam + shift, conv

    l1, c1 = power(M)
    l2, c2 = power(M, l1)
    lo, hi = min(l1, l2), max(l1, l2)
    conv = c1 and c2
    width = max(hi - lo, 1e-12)
    p = pad if conv else pad_unconverged
    return lo - p * width, hi + p * width, conv


def gershgorin_bounds(M):
    M = M.tocsr()
    diag = M.diagonal().real
    radius = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def jackson_kernel(n_moments):
    N = n_moments
    n = np.arange(N)
    q = math.pi / (N + 1)
    return ((N - n + 1) * np.cos(q * n) + np.sin(q * n) / math.tan(q)) / (N + 1)


def step_coefficients(t, n_moments):
    """Chebyshev coefficients of 1_{x <= t} on [-1, 1]."""
    t = min(max(t, -1.0), 1.0)
    a = math.acos(t)
    n = np.arange(1, n_moments)
    c = np.empty(n_moments)
    c[0] = (math.pi - a) / math.pi
    c[1:] = -2.0 * np.sin(n * a) / (n * math.pi)
    return c


def probe_vectors(weights, n_vectors, seed):
    """Rows ``sqrt(w) * r_j`` with Rademacher r_j drawn from rng([seed, j])."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise OutOfRange("psi weights must be non-negative")
    sw = np.sqrt(w)
    Z = np.empty((n_vectors, len(w)), dtype=complex)
    for j in range(n_vectors):
        r = np.random.default_rng([seed, j]).integers(0, 2, size=len(w)) * 2.0 - 1.0
        Z[j] = sw * r
    return Z


def kpm_moments(M, lo, hi, Z, n_moments):
    a = (hi - lo) / 2.0
    b = (hi + lo) / 2.0
    mom = kernels.chebyshev_moments(M, a, b, Z, n_moments)
    if not np.all(np.isfinite(mom)):
        raise NonFiniteMoment("non-finite Chebyshev moment")
    return mom


def _overflowed(mom):
    mu0 = mom[:, :1]
    return bool(np.any(np.abs(mom) > mu0 * (1 + 1e-6) + 1e-300))


def kpm_local_counting(op, taus, psi_weights=None, n_moments=256, n_vectors=32, seed=0,
                       kernel="jackson", bounds=None):
    """Stochastic estimate of trace(Psi 1_{A <= tau}) for each tau."""
    t0 = time.perf_counter()
    M = _matrix(op).tocsr()
    N = M.shape[0]
    taus = np.asarray(taus, dtype=float)
    w = np.ones(N) if psi_weights is None else np.asarray(psi_weights, dtype=float)
    Z = probe_vectors(w, n_vectors, seed)
    attempts = []
    if bounds is not None:
        attempts.append(("given", tuple(bounds)))
    else:
        lo, hi, conv = spectral_bounds(M, seed=seed)
        attempts.append(("power", (lo, hi)))
        width = hi - lo
        attempts.append(("power-5%", (lo - 0.04 * width, hi + 0.04 * width)))
        attempts.append(("gershgorin", gershgorin_bounds(M)))
    mom = None
    for label, (lo, hi) in attempts:
        mom = kpm_moments(M, lo, hi, Z, n_moments)
        if not _overflowed(mom):
            break
    else:
        raise MomentOverflow("Chebyshev moments exceed mu_0: spectral bounds too tight")
    g = jackson_kernel(n_moments) if kernel == "jackson" else np.ones(n_moments)
    a = (hi - lo) / 2.0
    b = (hi + lo) / 2.0
    ests, vals, errs = [], [], []
    for t in taus:
        c = g * step_coefficients((t - b) / a, n_moments)
        per = mom @ c
        val = float(per.mean())
        err = float(per.std(ddof=1) / math.sqrt(n_vectors)) if n_vectors > 1 else float("nan")
        ests.append(TraceEstimate(val, err, n_vectors, n_moments, kernel, float(t)))
        vals.append(val)
        errs.append(err)
    resolution = math.pi * (hi - lo) / n_moments
    curve = CountingCurve(taus, np.array(vals), "kpm", localization=None if psi_weights is None else "psi",
                          stderr=np.array(errs),
                          meta={"engine": "kpm", "seed": seed, "n_vectors": n_vectors, "n_moments": n_moments,
                                "bounds": [lo, hi], "bounds_source": label, "kernel": kernel,
                                "resolution": resolution, "time_s": time.perf_counter() - t0})
    return KPMResult(estimates=ests, curve=curve, bounds=(lo, hi), resolution=resolution, seed=seed,
                     meta=curve.meta)


def jackson_smoothed_count(eigenvalues, taus, lo, hi, n_moments, weights=None):
    """Deterministic KPM step for a known spectrum (exact moments)."""
    lam = np.asarray(eigenvalues, dtype=float)
    w = np.ones(len(lam)) if weights is None else np.asarray(weights, dtype=float)
    a = (hi - lo) / 2.0
    b = (hi + lo) / 2.0
    x = (lam - b) / a
    T = np.cos(np.outer(np.arange(n_moments), np.arccos(np.clip(x, -1, 1))))
    mom = T @ w
    g = jackson_kernel(n_moments)
    return np.array([float(mom @ (g * step_coefficients((t - b) / a, n_moments))) for t in taus])


# ---------------------------------------------------------------------------
# gap detection
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    intervals: list           # (lo, hi) spectrum-free intervals, refined
    cluster_centers: list
    cluster_widths: list
    cluster_counts: list
    verified: bool
    taus: np.ndarray = None
    counts: np.ndarray = None
    meta: dict = field(default_factory=dict)


def gap_scan(op, window, resolution, refine_tol=None, min_width=None):
    """Spectrum-free intervals inside ``window`` from inertia counts on a tau grid.

    Cluster edges are refined by bisection on counts to ``refine_tol``
    (default resolution/256).  Every reported gap is re-checked at its
    midpoint.
    """
    M = _matrix(op).tocsc()
    lo, hi = map(float, window)
    if hi <= lo or resolution <= 0:
        raise OutOfRange("need lo < hi and resolution > 0")
    refine_tol = resolution / 256 if refine_tol is None else refine_tol
    m = int(math.ceil((hi - lo) / resolution)) + 1
    taus = np.linspace(lo, hi, m)
    record = []
    cnt = np.array([_count_le(M, t, record, DENSE_CAP) for t in taus])

    def count(t):
        return _count_le(M, t, record, DENSE_CAP)

    def first_above(a, b, c0):
        # smallest tau in (a, b] with count > c0, to within refine_tol
        while b - a > refine_tol:
            mid = 0.5 * (a + b)
            if count(mid) > c0:
                b = mid
            else:
                a = mid
        return b

    # flat runs of the count; each run sits inside a spectrum-free interval
    runs = []
    start = 0
    for i in range(1, m + 1):
        if i == m or cnt[i] != cnt[start]:
            runs.append((start, i - 1))
            start = i
    refined = []
    for s, e in runs:
        c = int(cnt[s])
        g_lo = first_above(taus[s - 1], taus[s], c - 1) if s > 0 else lo
        g_hi = first_above(taus[e], taus[e + 1], c) if e < m - 1 else hi
        refined.append((g_lo, g_hi, c))
    min_width = resolution if min_width is None else min_width
    kept = [g for g in refined if g[1] - g[0] > min_width]
    verified = all(count(0.5 * (a + b)) == c for a, b, c in kept)
    centers, widths, counts = [], [], []
    for (a0, b0, c0), (a1, b1, c1) in zip(kept[:-1], kept[1:]):
        centers.append(0.5 * (b0 + a1))
        widths.append(a1 - b0)
        counts.append(c1 - c0)
    return GapReport(intervals=[(a, b) for a, b, _ in kept], cluster_centers=centers, cluster_widths=widths,
                     cluster_counts=counts, verified=verified, taus=taus, counts=cnt,
                     meta={"resolution": resolution, "refine_tol": refine_tol, "perturbations": record})


# ---------------------------------------------------------------------------
# Landau-gauge sectors for strip potentials
# ---------------------------------------------------------------------------

def hermite_functions(K, t):
    """Normalized Hermite functions phi_0..phi_{K-1} at points t (three-term recurrence)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((K, len(t)))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * t * t)
    if K > 1:
        out[1] = math.sqrt(2.0) * t * out[0]
    for n in range(1, K - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * t * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


class _SectorSolver:
    """Dense Hermite-basis diagonalization of one Landau-gauge sector."""

    def __init__(self, v1, psi_fn, f, scale, K, dt, tail, wrap=None):
        self.v1, self.psi_fn, self.wrap = v1, psi_fn, wrap
        self.hb = scale.hbar * f
        self.ell = math.sqrt(scale.h / (scale.mu * f))
        T = math.sqrt(2 * K + 1) + tail
        self.dt = dt
        self.t = np.arange(-T, T + 0.5 * dt, dt)
        self.phi = hermite_functions(K, self.t)
        self.E0 = self.hb * (2 * np.arange(K) + 1)
        self.K = K
        self.calls = 0

    def __call__(self, x0, top=None, vectors=True):
        self.calls += 1
        x = x0 + self.ell * self.t
        H = (self.phi * self.v1(x)) @ self.phi.T * self.dt
        H[np.diag_indices(self.K)] += self.E0
        if not vectors:
            return np.linalg.eigvalsh(H), None
        e, c = np.linalg.eigh(H)
        keep = np.ones(self.K, dtype=bool) if top is None else e <= top
        e = e[keep]
        if self.psi_fn is None:
            return e, np.ones(len(e))
        xp = x if self.wrap is None else np.mod(x + self.wrap, 2 * self.wrap) - self.wrap
        u = c[:, keep].T @ self.phi
        return e, (u * u) @ self.psi_fn(xp) * self.dt


def _sector_pass(solver, centers, L, taus):
    top = float(np.max(taus))
    lam, wt = [], []
    for x0 in centers:
        e, w = solver(x0, top)
        if len(e):
            lam.append(e)
            wt.append(w if solver.psi_fn is None else w / (2 * L))
    if not lam:
        return np.zeros(len(taus))
    lam = np.concatenate(lam)
    wt = np.concatenate(wt)
    order = np.argsort(lam, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(wt[order])])
    return csum[np.searchsorted(lam[order], taus, side="right")]


def _plane_pass(solver, reach, density, taus, n_gauss=10, xtol=1e-13):
    """density * integral over centers x0 of sum_{E_n(x0) <= tau} w_n(x0).

    Level crossings E_n(x0) = tau are located on a scan of step ell/8 and
    refined by root finding; each constant-count piece is integrated with
    composite Gauss-Legendre on cells no longer than ell/2.
    """
    from scipy import optimize

    ell = solver.ell
    xs = np.linspace(-reach, reach, int(math.ceil(2 * reach / (ell / 8))) + 1)
    E = np.array([solver(x, vectors=False)[0] for x in xs])
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    out = []
    for tau in taus:
        cuts = [-reach, reach]
        S = E - tau
        for n in range(E.shape[1]):
            sn = S[:, n]
            for i in np.nonzero(sn[:-1] * sn[1:] < 0)[0]:
                cuts.append(optimize.brentq(lambda z: solver(z, vectors=False)[0][n] - tau,
                                            xs[i], xs[i + 1], xtol=xtol))
        cuts = np.unique(np.array(cuts))
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = max(1, int(math.ceil((b - a) / (ell / 2))))
            edges = np.linspace(a, b, m + 1)
            for c0, c1 in zip(edges[:-1], edges[1:]):
                half = 0.5 * (c1 - c0)
                for xg, wg in zip(0.5 * (c0 + c1) + half * gx, half * gw):
                    e, w = solver(xg, tau)
                    total += wg * float(np.sum(w))
        out.append(density * total)
    return np.array(out)


def sector_counting(V, cfg, scale, L, taus, psi=None, basis_margin=40, dt=0.05, tail=10.0,
                    check=True, snap=True, mode="torus"):
    """Counting function of the flux-quantized torus operator for V = V(y1), d = 2.

    In the Landau gauge the torus operator splits into N one-dimensional
    sectors ``(h D)^2 + (mu f)^2 (y1 - x0)^2 + V(y1)`` with centers
    ``x0 = 2 L j / N`` (mod 2L).  Each sector is diagonalized densely in a
    Hermite basis centred at x0 (spectral accuracy), so no grid error enters.
    With ``psi`` the result is the localized count ``sum psi |u|^2``.

    ``mode="plane"`` replaces the sum over the N centers by the integral
    over all real x0 (density ``mu f / (2 pi h)`` per unit length), i.e. the
    same operator on the whole plane; V is then evaluated without wrapping
    and psi is required.  ``check`` repeats the computation with a larger basis and finer
    quadrature and reports the difference as ``meta['engine_error']``.
    """
    from .discrete import flux_quantize

    t0 = time.perf_counter()
    if cfg.d != 2:
        raise NotSeparable("sector counting needs d = 2")
    if hasattr(V, "depends_only_on") and not V.depends_only_on([0], basis=cfg.basis):
        raise NotSeparable("V must depend only on the first canonical coordinate")
    taus = np.asarray(taus, dtype=float)
    if mode not in ("torus", "plane"):
        raise OutOfRange(f"unknown sector mode {mode!r}")
    if snap and mode == "torus":
        L, flux, record = flux_quantize(cfg, scale, L)
    else:
        record = {"L": float(L), "snapped": False}
    f = float(cfg.f[0])
    N = int(round(scale.mu * f * (2 * L) ** 2 / (2 * math.pi * scale.h)))
    v1 = strip_potential(V, cfg, period=2 * L)
    vmin = float(np.min(v1(np.linspace(-L, L, 4097))))
    K = int(max(0.0, float(taus.max()) - vmin) / (2 * scale.hbar * f)) + 1 + basis_margin
    centers = np.mod(2 * L * np.arange(N) / N + L, 2 * L) - L
    psi_fn = None
    if psi is not None:
        R = float(psi.support_radius())
        ell = math.sqrt(scale.h / (scale.mu * f))
        reach = R + (math.sqrt(2 * (K + basis_margin) + 1) + tail) * ell
        if mode == "plane" and hasattr(V, "L") and reach + R > V.L and getattr(V, "grid", None) is not None:
            raise OutOfRange("plane mode evaluates V beyond its sampled box")
        dist = np.abs(centers)
        if reach < L:
            centers = centers[np.minimum(dist, 2 * L - dist) <= reach]

        # the marginal is smooth and compactly supported: tabulate once
        nodes = np.linspace(-R, R, 8193)
        table = scipy.interpolate.CubicSpline(nodes, psi_marginal(psi, cfg, nodes))

        def psi_fn(x):
            out = np.zeros(len(x))
            inside = np.abs(x) < R
            if np.any(inside):
                out[inside] = table(x[inside])
            return out

    if mode == "plane":
        if psi_fn is None:
            raise OutOfRange("the plane count is infinite without a localizing psi")
        v_plane = strip_potential(V, cfg)
        density = scale.mu * f / (2 * math.pi * scale.h)

        def run(Kx, dtx, ng):
            sol = _SectorSolver(v_plane, psi_fn, f, scale, Kx, dtx, tail)
            return _plane_pass(sol, reach, density, taus, n_gauss=ng), sol.calls
        vals, calls = run(K, dt, 10)
        meta = {"engine": "sector-plane", "basis": K, "dt": dt, "reach": reach, "solves": calls}
        if check:
            alt, _ = run(K + basis_margin, 0.7 * dt, 14)
            meta["engine_error"] = np.abs(alt - vals)
    else:
        def run(Kx, dtx):
            return _sector_pass(_SectorSolver(v1, psi_fn, f, scale, Kx, dtx, tail, wrap=L), centers, L, taus)
        vals = run(K, dt)
        meta = {"engine": "sector", "sectors": N, "sectors_used": len(centers), "basis": K, "dt": dt,
                "flux": record, "L": float(L)}
        if check:
            meta["engine_error"] = np.abs(run(K + basis_margin, 0.7 * dt) - vals)
    meta["time_s"] = time.perf_counter() - t0
    return CountingCurve(taus, vals, "dense", localization=None if psi is None else "psi", meta=meta)
