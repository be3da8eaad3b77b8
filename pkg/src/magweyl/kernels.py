"""Hot inner loops.

Every kernel exists twice: a loop version compiled with numba (``*_nb``) and a
vectorized numpy/scipy version (``*_np``).  The public wrappers pick one based
on ``_accel.NUMBA_ENABLED``; both are importable so tests and the benchmark
can compare them directly.
"""
import math

import numpy as np

from ._accel import NUMBA_ENABLED, optional_njit, prange


# ---------------------------------------------------------------------------
# Landau lattice enumeration
# ---------------------------------------------------------------------------

@optional_njit(cache=True)
def _count_below_nb(f, s):
    # #{alpha >= 0 : sum_j (2 alpha_j + 1) f_j < s}; f already multiplied by hbar
    r = f.shape[0]
    e = 0.0
    for j in range(r):
        e += f[j]
    if e >= s:
        return 0
    last = f[r - 1]
    alpha = np.zeros(r, np.int64)
    total = 0
    while True:
        total += int(math.ceil((s - e) / (2.0 * last)))
        j = r - 2
        while j >= 0:
            alpha[j] += 1
            e += 2.0 * f[j]
            if e < s:
                break
            e -= 2.0 * f[j] * alpha[j]
            alpha[j] = 0
            j -= 1
        if j < 0:
            break
    return total


def _partial_levels_np(f, emax, inclusive=True):
    """All (energy, alpha) combos over the coordinates of ``f`` with energy <= emax."""
    r = len(f)
    energies = np.zeros(1)
    alphas = np.zeros((1, 0), dtype=np.int64)
    tail = np.concatenate([np.cumsum(f[::-1])[::-1], [0.0]])
    for j in range(r):
        budget = emax - energies - tail[j + 1]
        amax = np.floor((budget / f[j] - 1.0) / 2.0).astype(np.int64)
        amax = np.maximum(amax, -1)
        reps = amax + 1
        keep = reps > 0
        energies, alphas, reps, amax = energies[keep], alphas[keep], reps[keep], amax[keep]
        idx = np.repeat(np.arange(len(energies)), reps)
        offs = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
        energies = energies[idx] + (2 * offs + 1) * f[j]
        alphas = np.column_stack([alphas[idx], offs])
    if inclusive:
        mask = energies <= emax
    else:
        mask = energies < emax
    return energies[mask], alphas[mask]


def _count_below_np(f, s):
    f = np.asarray(f, dtype=float)
    if f.sum() >= s:
        return 0
    if len(f) == 1:
        return int(math.ceil((s - f[0]) / (2.0 * f[0])))
    head, _ = _partial_levels_np(f[:-1], s - f[-1], inclusive=False)
    rem = s - head - f[-1]
    rem = rem[rem > 0]
    return int(np.ceil(rem / (2.0 * f[-1])).sum())


@optional_njit(cache=True)
def _enumerate_levels_nb(f, emax):
    r = f.shape[0]
    e0 = 0.0
    for j in range(r):
        e0 += f[j]
    if e0 > emax:
        return np.zeros(0), np.zeros((0, r), np.int64)
    # first pass counts, second pass fills
    out_e = np.zeros(0)
    out_a = np.zeros((0, r), np.int64)
    for fill in range(2):
        alpha = np.zeros(r, np.int64)
        e = e0
        k = 0
        while True:
            if fill == 1:
                out_e[k] = e
                for j in range(r):
                    out_a[k, j] = alpha[j]
            k += 1
            j = r - 1
            while j >= 0:
                alpha[j] += 1
                e += 2.0 * f[j]
                if e <= emax:
                    break
                e -= 2.0 * f[j] * alpha[j]
                alpha[j] = 0
                j -= 1
            if j < 0:
                break
        if fill == 0:
            out_e = np.zeros(k)
            out_a = np.zeros((k, r), np.int64)
    return out_e, out_a


def count_below(f_scaled, s):
    f_scaled = np.ascontiguousarray(f_scaled, dtype=float)
    if NUMBA_ENABLED:
        return int(_count_below_nb(f_scaled, float(s)))
    return _count_below_np(f_scaled, float(s))


def enumerate_levels(f_scaled, emax):
    """Unsorted Landau energies ``sum (2a+1) f`` <= emax with their multi-indices."""
    f_scaled = np.ascontiguousarray(f_scaled, dtype=float)
    if NUMBA_ENABLED:
        return _enumerate_levels_nb(f_scaled, float(emax))
    return _partial_levels_np(f_scaled, float(emax))


# ---------------------------------------------------------------------------
# Chebyshev moments of a sparse Hermitian matrix
# ---------------------------------------------------------------------------

@optional_njit(cache=True)
def _csr_shifted_matvec(indptr, indices, data, x, a, b, out):
    n = x.shape[0]
    for i in range(n):
        acc = 0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = (acc - b * x[i]) / a


@optional_njit(cache=True)
def _vdot_real(x, y):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i].real * y[i].real + x[i].imag * y[i].imag
    return acc


@optional_njit(cache=True, parallel=True)
def _cheb_moments_nb(indptr, indices, data, a, b, Z, n_moments):
    n_vec = Z.shape[0]
    n = Z.shape[1]
    out = np.zeros((n_vec, n_moments))
    for v in prange(n_vec):
        z = Z[v]
        t0 = z.copy()
        t1 = np.empty(n, np.complex128)
        t2 = np.empty(n, np.complex128)
        out[v, 0] = _vdot_real(z, t0)
        if n_moments > 1:
            _csr_shifted_matvec(indptr, indices, data, t0, a, b, t1)
            out[v, 1] = _vdot_real(z, t1)
        for m in range(2, n_moments):
            _csr_shifted_matvec(indptr, indices, data, t1, a, b, t2)
            for i in range(n):
                t2[i] = 2.0 * t2[i] - t0[i]
            out[v, m] = _vdot_real(z, t2)
            t0, t1, t2 = t1, t2, t0
    return out


def _cheb_moments_np(matrix, a, b, Z, n_moments):
    R = np.ascontiguousarray(Z.T)
    out = np.zeros((Z.shape[0], n_moments))
    t0 = R
    out[:, 0] = np.einsum("ij,ij->j", R.conj(), t0).real
    if n_moments == 1:
        return out
    t1 = (matrix @ t0 - b * t0) / a
    out[:, 1] = np.einsum("ij,ij->j", R.conj(), t1).real
    for m in range(2, n_moments):
        t2 = 2.0 * (matrix @ t1 - b * t1) / a - t0
        out[:, m] = np.einsum("ij,ij->j", R.conj(), t2).real
        t0, t1 = t1, t2
    return out


def chebyshev_moments(matrix, a, b, Z, n_moments):
    """Per-probe moments ``Re z^H T_m((A - b)/a) z`` for the rows ``z`` of ``Z``.

    Each probe runs its own recursion and writes its own output row, so the
    result does not depend on thread scheduling.
    """
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    if NUMBA_ENABLED:
        csr = matrix.tocsr()
        return _cheb_moments_nb(csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
                                csr.data.astype(np.complex128), float(a), float(b), Z, int(n_moments))
    return _cheb_moments_np(matrix.tocsr(), float(a), float(b), Z, int(n_moments))


# ---------------------------------------------------------------------------
# Affine stepping z <- P z + c (implicit midpoint for linear fields)
# ---------------------------------------------------------------------------

@optional_njit(cache=True)
def _propagate_affine_nb(P, c, z0, n_steps, stride):
    m = z0.shape[0]
    n_out = n_steps // stride + 1
    out = np.empty((n_out, m))
    z = z0.copy()
    tmp = np.empty(m)
    out[0] = z
    k = 1
    for step in range(1, n_steps + 1):
        for i in range(m):
            acc = c[i]
            for j in range(m):
                acc += P[i, j] * z[j]
            tmp[i] = acc
        for i in range(m):
            z[i] = tmp[i]
        if step % stride == 0:
            out[k] = z
            k += 1
    return out


def _propagate_affine_np(P, c, z0, n_steps, stride):
    n_out = n_steps // stride + 1
    out = np.empty((n_out, z0.shape[0]))
    z = z0.copy()
    out[0] = z
    k = 1
    for step in range(1, n_steps + 1):
        z = P @ z + c
        if step % stride == 0:
            out[k] = z
            k += 1
    return out


def propagate_affine(P, c, z0, n_steps, stride=1):
    P = np.ascontiguousarray(P, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    z0 = np.ascontiguousarray(z0, dtype=float)
    if NUMBA_ENABLED:
        return _propagate_affine_nb(P, c, z0, int(n_steps), int(stride))
    return _propagate_affine_np(P, c, z0, int(n_steps), int(stride))
