import json
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from magweyl import kernels


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4), st.floats(0.0, 4.0))
def test_count_below_variants_agree(f, s):
    f = np.array(f)
    assert kernels._count_below_nb(f, s) == kernels._count_below_np(f, s)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 1.0), min_size=1, max_size=3), st.floats(0.0, 4.0))
def test_enumerate_variants_agree(f, emax):
    f = np.array(f)
    e1, a1 = kernels._enumerate_levels_nb(f, emax)
    e2, a2 = kernels._partial_levels_np(f, emax)
    k1, k2 = np.lexsort(a1.T), np.lexsort(a2.T)
    assert np.array_equal(a1[k1], a2[k2])
    assert np.allclose(e1[k1], e2[k2])
    assert np.allclose(e1, (2 * a1 + 1) @ f)
    # counts: strict vs inclusive bookkeeping
    assert kernels._count_below_np(f, emax) == int(np.sum(e2 < emax))


def test_chebyshev_variants_agree():
    rng = np.random.default_rng(3)
    A = sp.random(60, 60, density=0.1, random_state=4, dtype=complex)
    A = (A + A.conj().T).tocsr()
    Z = rng.standard_normal((3, 60)) + 0j
    a = float(abs(A).sum(axis=1).max()) + 1
    r1 = kernels._cheb_moments_nb(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                                  A.data.astype(np.complex128), a, 0.0, Z, 20)
    r2 = kernels._cheb_moments_np(A, a, 0.0, Z, 20)
    # oracle: moments z^H T_k(A/a) z from a dense eigendecomposition
    w, U = np.linalg.eigh(A.toarray())
    c = Z.conj() @ U
    T = np.cos(np.outer(np.arange(20), np.arccos(w / a)))
    ref = (np.abs(c) ** 2) @ T.T
    assert np.allclose(r1, ref, atol=1e-10) and np.allclose(r2, ref, atol=1e-10)


def test_affine_variants_agree():
    rng = np.random.default_rng(1)
    P = np.eye(4) + 1e-2 * rng.standard_normal((4, 4))
    c = 1e-2 * rng.standard_normal(4)
    z0 = rng.standard_normal(4)
    r1 = kernels._propagate_affine_nb(P, c, z0, 50, 7)
    r2 = kernels._propagate_affine_np(P, c, z0, 50, 7)
    z, ref = z0.copy(), [z0.copy()]
    for k in range(1, 51):
        z = P @ z + c
        if k % 7 == 0:
            ref.append(z.copy())
    assert np.allclose(r1, ref) and np.allclose(r2, ref)


SNIPPET = """
import json, numpy as np
from magweyl._accel import NUMBA_ENABLED
from magweyl.weyl import lattice_count, landau_levels
lat = landau_levels([1.0, 1.3], 0.05, 2.0)
print(json.dumps({"numba": NUMBA_ENABLED, "count": lattice_count(0.05, 2.0, [1.0, 1.3]),
                  "levels": lat.energies.tolist()}))
"""


@pytest.mark.parametrize("flag", ["0", "1"])
def test_env_flag_selects_backend(flag):
    env = dict(os.environ, MAGWEYL_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    res = json.loads(out.stdout.strip().splitlines()[-1])
    assert res["numba"] is (flag == "0")
    lat_count = sum(1 for e in res["levels"] if e < 2.0)
    assert res["count"] == lat_count
