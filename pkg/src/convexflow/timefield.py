"""Time-sampled fields.

Each sample stores a jet ``[f, d_t f, d_t^2 f, ...]``.  Jets carried by
construction (building blocks, bump profiles, and everything assembled
from them by exact Leibniz products) give exact time derivatives; when a
requested order is missing, a fourth-order finite difference over the
neighbouring samples is used instead.
"""
import math

import numpy as np

from .errors import OutOfTimeRange, RankMismatch
from .spectral import SpectralField


class TimeField:
    """Ordered samples of a field together with their time jets.

    Parameters
    ----------
    times : sequence of float, strictly increasing
    jets : list of lists of SpectralField
        ``jets[i][m]`` is the m-th time derivative at ``times[i]``.
    support : (float, float) or None
        Closed time interval outside of which the field vanishes, when known
        analytically.
    """

    def __init__(self, times, jets, support=None):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or len(times) != len(jets):
            raise ValueError("times and jets must have matching length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time samples must be strictly increasing")
        jets = [list(j) if isinstance(j, (list, tuple)) else [j] for j in jets]
        ranks = {j[0].rank for j in jets}
        if len(ranks) > 1:
            raise RankMismatch("all samples must share a rank")
        self.times = times
        self.jets = jets
        self.support = None if support is None else (float(support[0]), float(support[1]))

    @classmethod
    def constant_in_time(cls, field, times, order=1):
        zero = SpectralField.zeros(field.rank, field.real)
        return cls(times, [[field] + [zero] * order for _ in times])

    @property
    def rank(self):
        return self.jets[0][0].rank

    @property
    def order(self):
        """Highest derivative order available exactly at every sample."""
        return min(len(j) for j in self.jets) - 1

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        return [j[0] for j in self.jets]

    def value(self, i):
        return self.jets[i][0]

    def index(self, t, atol=1e-12):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol * max(1.0, abs(t)):
            raise OutOfTimeRange(f"t={t} is not a sample time")
        return i

    def at(self, t):
        return self.value(self.index(t))

    def derivative(self, i, m=1):
        """``m``-th time derivative at sample ``i``: exact jet if stored."""
        if m < len(self.jets[i]):
            return self.jets[i][m]
        return fd_derivative(self, self.times[i], m)

    def truncate(self, order):
        return TimeField(self.times, [j[:order + 1] for j in self.jets], self.support)

    def map(self, fn):
        """Apply a linear, time-independent operator to every jet entry."""
        return TimeField(self.times, [[fn(f) for f in j] for j in self.jets], self.support)

    def __add__(self, other):
        if not np.array_equal(self.times, other.times):
            raise ValueError("time grids differ")
        jets = []
        for a, b in zip(self.jets, other.jets):
            n = min(len(a), len(b))
            jets.append([a[m] + b[m] for m in range(n)])
        return TimeField(self.times, jets, _hull(self.support, other.support))

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, s):
        return TimeField(self.times, [[f * s for f in j] for j in self.jets], self.support)

    def time_support(self, threshold=1e-13):
        """Explicit support if known, else the hull of nonzero samples widened by
        one sample spacing on each side (clipped to the sample range)."""
        if self.support is not None:
            return self.support
        nz = [i for i, j in enumerate(self.jets) if j[0].max_abs() > threshold]
        if not nz:
            return None
        lo, hi = nz[0], nz[-1]
        t = self.times
        return (t[max(lo - 1, 0)], t[min(hi + 1, len(t) - 1)])


def _hull(a, b):
    if a is None or b is None:
        return None
    return (min(a[0], b[0]), max(a[1], b[1]))


def fd_weights(nodes, x0, m):
    """Weights of the degree-(len(nodes)-1) Lagrange derivative of order m."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    V = np.vander(nodes - x0, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[m] = math.factorial(m)
    return np.linalg.solve(V, rhs)


def fd_derivative(tf, t, m=1, stencil=5):
    """Finite-difference time derivative from the nearest ``stencil`` samples."""
    times = tf.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise OutOfTimeRange(f"t={t} outside [{times[0]}, {times[-1]}]")
    if len(times) < stencil:
        raise OutOfTimeRange("not enough samples for a finite difference")
    i = int(np.argmin(np.abs(times - t)))
    lo = min(max(i - stencil // 2, 0), len(times) - stencil)
    idx = range(lo, lo + stencil)
    w = fd_weights(times[lo:lo + stencil], t, m)
    out = None
    for wi, j in zip(w, idx):
        term = tf.value(j) * wi
        out = term if out is None else out + term
    return out


def time_derivative(tf, t, order=1):
    """d^order/dt^order of ``tf`` at time ``t`` (exact when jets allow)."""
    if t < tf.times[0] - 1e-12 or t > tf.times[-1] + 1e-12:
        raise OutOfTimeRange(f"t={t} outside [{tf.times[0]}, {tf.times[-1]}]")
    try:
        i = tf.index(t)
    except OutOfTimeRange:
        return fd_derivative(tf, t, order)
    return tf.derivative(i, order)


class PolyBump:
    """phi(t) = (1 - s^2)^power on |s| < 1 with s mapping [t0, t1] to [-1, 1]."""

    def __init__(self, t0, t1, power=4, height=1.0):
        self.t0, self.t1, self.power, self.height = float(t0), float(t1), int(power), float(height)
        base = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** self.power
        self._polys = [base * self.height]
        for _ in range(self.power * 2 + 1):
            self._polys.append(self._polys[-1].deriv())

    @property
    def support(self):
        return (self.t0, self.t1)

    def __call__(self, t, m=0):
        t = np.asarray(t, dtype=float)
        c = 2.0 / (self.t1 - self.t0)
        s = (2.0 * t - self.t0 - self.t1) / (self.t1 - self.t0)
        if m >= len(self._polys):
            return np.zeros_like(t)
        val = self._polys[m](s) * c ** m
        return np.where(np.abs(s) < 1.0, val, 0.0)
