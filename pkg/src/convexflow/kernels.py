"""Backend selection for the sparse convolution kernel.

The compiled extension is used when importable; ``CONVEXFLOW_BACKEND=python``
forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.sparse_convolve
if os.environ.get("CONVEXFLOW_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
        _impl = _kernels.sparse_convolve
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        pass


def sparse_convolve(k1, c1, k2, c2, plan, weight, nout, zero_key, max_out,
                    backend=None):
    """Dispatch to the selected backend and return rows sorted by key."""
    impl = _impl
    if backend == "python":
        impl = _kernels_py.sparse_convolve
    elif backend == "cython":
        from . import _kernels
        impl = _kernels.sparse_convolve
    plan = np.ascontiguousarray(plan, dtype=np.intc)
    weight = np.ascontiguousarray(weight, dtype=np.complex128)
    keys, vals = impl(np.ascontiguousarray(k1, np.int64),
                      np.ascontiguousarray(c1, np.complex128),
                      np.ascontiguousarray(k2, np.int64),
                      np.ascontiguousarray(c2, np.complex128),
                      plan, weight, int(nout), np.int64(zero_key), int(max_out))
    keys = np.asarray(keys)
    vals = np.asarray(vals)
    order = np.argsort(keys, kind="stable")
    return keys[order], vals[order]
