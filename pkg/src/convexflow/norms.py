"""L^p, Orlicz L(log L)^alpha and C^N measurements of spectral fields.

All integrals use the normalised measure on the torus (total mass 1).
Pointwise magnitudes are Euclidean for vectors and Frobenius for tensors.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .spectral import Grid, derivative, fast_odd, synthesize

_config = {"oversample": 4, "max_grid": 257}


def set_norm_grid(oversample=None, max_grid=None):
    if oversample is not None:
        _config["oversample"] = int(oversample)
    if max_grid is not None:
        _config["max_grid"] = int(max_grid)


def default_grid(f, factor=None):
    """Oversampled grid for ``f``, capped at the configured maximum size.

    The cap never goes below 2K + 1, so exactness for p = 2 is kept.
    """
    factor = _config["oversample"] if factor is None else factor
    K = max(f.bandwidth, 1)
    n = fast_odd(factor * K + 1)
    n = min(n, max(_config["max_grid"], fast_odd(2 * K + 1)))
    return Grid(n)


def pointwise_magnitude(f, g):
    """|f(x)| at grid nodes (Frobenius for tensors)."""
    if f.rank == "scalar":
        return np.abs(synthesize(f, g))
    sq = None
    for c in range(f.ncomp):
        comp = f.component(c)
        if comp.nmodes == 0:
            continue
        v = np.abs(synthesize(comp, g))
        v *= v
        if f.rank == "tensor_sym" and c >= 3:
            v *= 2.0
        if sq is None:
            sq = v
        else:
            sq += v
    if sq is None:
        return np.zeros((g.n,) * 3)
    return np.sqrt(sq, out=sq)


def parseval_l2(f):
    """Exact L2 norm from the coefficients."""
    sq = np.abs(f.coeffs) ** 2
    if f.rank == "tensor_sym":
        return float(np.sqrt(sq[:, :3].sum() + 2.0 * sq[:, 3:].sum()))
    return float(np.sqrt(sq.sum()))


def lp_from_values(mag, p):
    if np.isinf(p):
        return float(mag.max())
    if p == 1:
        return float(mag.mean())
    return float(np.mean(mag ** p) ** (1.0 / p))


def lp_norm(f, p, g=None):
    """L^p norm by quadrature on ``g`` (default: oversampled grid)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if f.nmodes == 0:
        return 0.0
    g = default_grid(f) if g is None else g
    return lp_from_values(pointwise_magnitude(f, g), p)


@dataclass
class NormEstimate:
    value: float
    refined: float
    grid: int

    @property
    def error(self):
        return abs(self.value - self.refined)


def lp_norm_refined(f, p):
    """Value at oversampling 4 together with the value at oversampling 8."""
    g4 = default_grid(f, 4)
    g8 = default_grid(f, 8)
    return NormEstimate(lp_norm(f, p, g4), lp_norm(f, p, g8), g4.n)


def young_A(s, alpha):
    """A(s) = s log^alpha(2 + s)."""
    return s * np.log(2.0 + s) ** alpha


def luxemburg_from_values(mag, alpha):
    mag = np.asarray(mag, dtype=float).ravel()
    top = mag.max() if mag.size else 0.0
    if top == 0.0:
        return 0.0
    if alpha == 0:
        return float(mag.mean())

    def phi(loglam):
        return float(np.mean(young_A(mag / math.exp(loglam), alpha))) - 1.0

    lo = math.log(mag.mean()) - 1.0
    while phi(lo) < 0:
        lo -= 1.0
    hi = math.log(top) + 1.0
    while phi(hi) > 0:
        hi += 1.0
    root = brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(root)


def luxemburg_norm(f, alpha, g=None):
    """inf{lam > 0 : mean A(|f|/lam) <= 1} for A(s) = s log^alpha(2 + s)."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if f.nmodes == 0:
        return 0.0
    g = default_grid(f) if g is None else g
    return luxemburg_from_values(pointwise_magnitude(f, g), alpha)


def multi_indices(order):
    return [a for a in itertools.product(range(order + 1), repeat=3) if sum(a) == order]


def spatial_derivative(f, alpha):
    out = f
    for axis, m in enumerate(alpha):
        if m:
            out = derivative(out, axis, m)
    return out


def holder_seminorm(tf, n, g=None, max_order=6):
    """max over samples, nodes and mixed derivatives of total order <= n.

    Time derivatives come from stored jets, or finite differences when a
    jet order is missing.
    """
    if n > max_order:
        raise ValueError(f"order {n} exceeds configured maximum {max_order}")
    best = 0.0
    for i in range(len(tf)):
        for mt in range(n + 1):
            base = tf.derivative(i, mt)
            if base.nmodes == 0:
                continue
            grid = default_grid(base) if g is None else g
            for ms in range(n - mt + 1):
                for alpha in multi_indices(ms):
                    d = spatial_derivative(base, alpha)
                    if d.nmodes == 0:
                        continue
                    vals = np.abs(synthesize(d, grid))
                    best = max(best, float(vals.max()))
    return best


def gradient_tensor_norm(f, order, p, g):
    """L^p norm of |nabla^order f| with the Frobenius norm on the tensor."""
    if order == 0:
        return lp_norm(f, p, g)
    acc = 0.0
    for alpha in multi_indices(order):
        w = math.factorial(order) / np.prod([math.factorial(a) for a in alpha])
        vals = synthesize(spatial_derivative(f, alpha), g)
        acc = acc + w * np.abs(vals) ** 2
    mag = np.sqrt(acc)
    if mag.ndim == 4:
        mag = np.sqrt((mag ** 2).sum(axis=0))
    return lp_from_values(mag, p)


def sup_in_time(tf, fn):
    """L^inf_t of a per-sample functional."""
    return max((fn(f) for f in tf.samples), default=0.0)
