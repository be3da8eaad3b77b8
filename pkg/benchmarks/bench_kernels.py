"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Both versions are called directly, so the switch in ``MAGWEYL_DISABLE_NUMBA``
does not matter here (with it set, the ``_nb`` functions run as plain Python
and the comparison shows the interpreter cost instead).  Results are checked
for agreement before any timing is reported.
"""
import argparse
import math
import time

import numpy as np

from magweyl import kernels
from magweyl._accel import NUMBA_ENABLED
from magweyl.discrete import GridSpec, assemble
from magweyl.field import FieldConfig, semiclassical_scale
from magweyl.potential import PotentialField


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def case_levels(quick):
    f = np.array([1.0, math.sqrt(2.0), math.sqrt(3.0)]) * (2e-2 if quick else 1e-2)
    s = 1.0
    a = kernels._count_below_nb(f, s)
    b = kernels._count_below_np(f, s)
    assert a == b, (a, b)
    return f"count_below r=3 ({a} levels)", lambda: kernels._count_below_nb(f, s), \
        lambda: kernels._count_below_np(f, s)


def case_enumerate(quick):
    f = np.array([1.0, math.sqrt(2.0)]) * (4e-3 if quick else 1e-3)
    e1, _ = kernels._enumerate_levels_nb(f, 1.0)
    e2, _ = kernels._partial_levels_np(f, 1.0)
    assert np.allclose(np.sort(e1), np.sort(e2))
    return f"enumerate_levels r=2 ({len(e1)} levels)", lambda: kernels._enumerate_levels_nb(f, 1.0), \
        lambda: kernels._partial_levels_np(f, 1.0)


def case_chebyshev(quick):
    n = 32 if quick else 64
    cfg = FieldConfig.from_frequencies([1.0])
    scale = semiclassical_scale(0.1, 1.0)
    V = PotentialField.from_text("(* 0.3 (cos (* 3 x1)) (sin (* 2 x2)))", 2)
    op = assemble(V, cfg, scale, GridSpec(2, n, 1.0, "torus", 2))
    M = op.matrix.tocsr()
    rng = np.random.default_rng(0)
    Z = rng.choice([-1.0, 1.0], size=(8, M.shape[0])).astype(complex)
    a = float(abs(M).sum(axis=1).max()) * 0.5 + 1.0
    b = 0.0
    m = 64 if quick else 256
    args_nb = (M.indptr.astype(np.int64), M.indices.astype(np.int64), M.data.astype(np.complex128), a, b, Z, m)
    r1 = kernels._cheb_moments_nb(*args_nb)
    r2 = kernels._cheb_moments_np(M, a, b, Z, m)
    assert np.allclose(r1, r2, rtol=1e-9, atol=1e-9)
    return f"chebyshev_moments dim={M.shape[0]} moments={m}", lambda: kernels._cheb_moments_nb(*args_nb), \
        lambda: kernels._cheb_moments_np(M, a, b, Z, m)


def case_affine(quick):
    rng = np.random.default_rng(1)
    P = np.eye(4) + 1e-3 * rng.standard_normal((4, 4))
    c = 1e-3 * rng.standard_normal(4)
    z0 = rng.standard_normal(4)
    n = 20000 if quick else 200000
    r1 = kernels._propagate_affine_nb(P, c, z0, n, 10)
    r2 = kernels._propagate_affine_np(P, c, z0, n, 10)
    assert np.allclose(r1, r2, rtol=1e-10, atol=1e-10)
    return f"propagate_affine steps={n}", lambda: kernels._propagate_affine_nb(P, c, z0, n, 10), \
        lambda: kernels._propagate_affine_np(P, c, z0, n, 10)


CASES = (case_levels, case_enumerate, case_chebyshev, case_affine)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="small sizes (smoke run)")
    args = ap.parse_args(argv)
    print(f"numba enabled: {NUMBA_ENABLED}")
    print(f"{'kernel':48s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s}")
    for case in CASES:
        label, fast, ref = case(args.quick)
        t_nb = best_of(fast, args.repeat)
        t_np = best_of(ref, args.repeat)
        print(f"{label:48s} {t_nb:11.4g} {t_np:11.4g} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
