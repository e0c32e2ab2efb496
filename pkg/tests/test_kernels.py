import os
import subprocess
import sys

import numpy as np
import pytest

from convexflow import _kernels_py, kernels
from convexflow.spectral import _ZERO_KEY, pack


def _inputs(rng, m1, m2, K=3):
    k1 = np.unique(pack(rng.integers(-K, K + 1, (m1, 3))))
    k2 = np.unique(pack(rng.integers(-K, K + 1, (m2, 3))))
    c1 = rng.standard_normal((len(k1), 3)) + 1j * rng.standard_normal((len(k1), 3))
    c2 = rng.standard_normal((len(k2), 3)) + 1j * rng.standard_normal((len(k2), 3))
    return k1, c1, k2, c2


def _brute(k1, c1, k2, c2, plan, weight, nout):
    out = {}
    for i, a in enumerate(k1):
        for j, b in enumerate(k2):
            key = int(a) + int(b) - int(_ZERO_KEY)
            row = out.setdefault(key, np.zeros(nout, complex))
            for (o, p, q), w in zip(plan, weight):
                row[o] += w * c1[i, p] * c2[j, q]
    keys = np.array(sorted(out), np.int64)
    return keys, np.array([out[k] for k in keys])


# dot product plan: out0 = sum_i f_i g_i, with a weighted extra row
PLAN = np.array([[0, 0, 0], [0, 1, 1], [0, 2, 2], [1, 0, 1]], np.intc)
WEIGHT = np.array([1, 1, 1, 2 - 1j], complex)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_matches_brute_force(rng, backend):
    if backend == "cython" and kernels.BACKEND != "cython":
        pytest.skip("compiled extension not built")
    k1, c1, k2, c2 = _inputs(rng, 15, 11)
    keys, vals = kernels.sparse_convolve(k1, c1, k2, c2, PLAN, WEIGHT, 2, _ZERO_KEY,
                                         len(k1) * len(k2), backend=backend)
    bk, bv = _brute(k1, c1, k2, c2, PLAN, WEIGHT, 2)
    assert np.array_equal(keys, bk)
    assert np.allclose(vals, bv, atol=1e-13)


def test_backends_identical(rng):
    if kernels.BACKEND != "cython":
        pytest.skip("compiled extension not built")
    k1, c1, k2, c2 = _inputs(rng, 200, 150, K=6)
    args = (k1, c1, k2, c2, PLAN, WEIGHT, 2, _ZERO_KEY, len(k1) * len(k2))
    pk, pv = kernels.sparse_convolve(*args, backend="python")
    ck, cv = kernels.sparse_convolve(*args, backend="cython")
    assert np.array_equal(pk, ck)
    assert np.allclose(pv, cv, rtol=0, atol=1e-12)


def test_python_chunking(rng, monkeypatch):
    k1, c1, k2, c2 = _inputs(rng, 40, 30)
    args = (k1, c1, k2, c2, PLAN, WEIGHT, 2, _ZERO_KEY, len(k1) * len(k2))
    whole = _kernels_py.sparse_convolve(*args)
    monkeypatch.setattr(_kernels_py, "_CHUNK", 50)
    parts = _kernels_py.sparse_convolve(*args)
    assert np.array_equal(whole[0], parts[0])
    assert np.allclose(whole[1], parts[1], atol=1e-13)


def test_empty_inputs():
    e = np.empty(0, np.int64)
    keys, vals = kernels.sparse_convolve(e, np.zeros((0, 3), complex), e,
                                         np.zeros((0, 3), complex), PLAN, WEIGHT, 2,
                                         _ZERO_KEY, 0)
    assert len(keys) == 0 and vals.shape[0] == 0


def test_env_forces_python():
    code = "from convexflow import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, CONVEXFLOW_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
