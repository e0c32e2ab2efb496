"""Band-limited fields on the 3-torus and their exact spectral calculus.

A :class:`SpectralField` stores a finite map from integer frequencies
``k`` to complex coefficients, one column per component.  Keys are packed
into sorted ``int64`` values so merges and lookups are vectorised.

Grid nodes are ``x_j = -pi + 2 pi j / n`` with ``n`` odd, hence
``exp(i k x_j) = (-1)^k exp(2 pi i k j / n)``; the sign factor is applied
in :func:`synthesize` and :func:`analyze`.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import GridTooSmall, RankMismatch

NCOMP = {"scalar": 1, "vector": 3, "tensor_sym": 6, "tensor": 9}
SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

_BIAS = 1 << 20
_ZERO_KEY = (_BIAS << 42) | (_BIAS << 21) | _BIAS

_state = {"workers": 1, "threshold": 1e-14}


def set_threads(n):
    """Set the worker count used by FFTs (results do not depend on it)."""
    _state["workers"] = max(1, int(n))


def set_threshold(rel):
    """Relative magnitude below which dense-route coefficients are dropped."""
    _state["threshold"] = float(rel)


def get_threshold():
    return _state["threshold"]


def pack(modes):
    m = np.asarray(modes, dtype=np.int64).reshape(-1, 3)
    if m.size and np.abs(m).max() >= _BIAS:
        raise ValueError("frequency out of packable range")
    return ((m[:, 0] + _BIAS) << 42) | ((m[:, 1] + _BIAS) << 21) | (m[:, 2] + _BIAS)


def unpack(keys):
    keys = np.asarray(keys, dtype=np.int64)
    out = np.empty((len(keys), 3), dtype=np.int64)
    out[:, 0] = (keys >> 42) - _BIAS
    out[:, 1] = ((keys >> 21) & ((1 << 21) - 1)) - _BIAS
    out[:, 2] = (keys & ((1 << 21) - 1)) - _BIAS
    return out


def sym_index(i, j):
    """Column of entry (i, j) in the 6-component symmetric layout."""
    i, j = min(i, j), max(i, j)
    return SYM_PAIRS.index((i, j))


def fast_odd(m):
    """Smallest odd 7-smooth integer >= m."""
    n = max(1, int(m))
    if n % 2 == 0:
        n += 1
    while True:
        r = n
        for p in (3, 5, 7):
            while r % p == 0:
                r //= p
        if r == 1:
            return n
        n += 2


class SpectralField:
    """Immutable band-limited field: sorted packed keys and coefficients.

    Parameters
    ----------
    keys : int64 array (M,)
        Packed frequencies, strictly increasing.
    coeffs : complex array (M, C)
    rank : {'scalar', 'vector', 'tensor_sym', 'tensor'}
    real : bool
        Whether the field represents a real-valued function.
    """

    __slots__ = ("keys", "coeffs", "rank", "real", "_modes")

    def __init__(self, keys, coeffs, rank, real=True):
        if rank not in NCOMP:
            raise RankMismatch(f"unknown rank {rank!r}")
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if coeffs.shape[1] != NCOMP[rank]:
            raise RankMismatch(f"{rank} needs {NCOMP[rank]} components")
        self.keys = np.asarray(keys, dtype=np.int64)
        self.coeffs = coeffs
        self.rank = rank
        self.real = bool(real)
        self._modes = None

    # construction -----------------------------------------------------
    @classmethod
    def from_modes(cls, modes, coeffs, rank="scalar", real=True):
        """Build from (possibly repeated, unsorted) modes; duplicates add."""
        keys = pack(modes)
        coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(len(keys), -1)
        uniq, inv = np.unique(keys, return_inverse=True)
        out = np.zeros((len(uniq), coeffs.shape[1]), np.complex128)
        np.add.at(out, inv, coeffs)
        return cls(uniq, out, rank, real)._drop_zeros()

    @classmethod
    def from_dict(cls, mapping, rank="scalar", real=True):
        modes = list(mapping.keys())
        vals = [np.atleast_1d(np.asarray(v, dtype=np.complex128)) for v in mapping.values()]
        if not modes:
            return cls.zeros(rank, real)
        return cls.from_modes(modes, np.array(vals), rank, real)

    @classmethod
    def zeros(cls, rank="scalar", real=True):
        return cls(np.empty(0, np.int64), np.zeros((0, NCOMP[rank])), rank, real)

    @classmethod
    def constant(cls, value, rank="scalar"):
        v = np.atleast_1d(np.asarray(value, dtype=np.complex128))
        return cls.from_modes([(0, 0, 0)], v[None, :], rank, real=bool(np.all(v.imag == 0)))

    # basic properties -----------------------------------------------------
    @property
    def modes(self):
        if self._modes is None:
            self._modes = unpack(self.keys)
        return self._modes

    @property
    def ncomp(self):
        return self.coeffs.shape[1]

    @property
    def nmodes(self):
        return len(self.keys)

    @property
    def bandwidth(self):
        if self.nmodes == 0:
            return 0
        return int(np.abs(self.modes).max())

    @property
    def l1_bandwidth(self):
        if self.nmodes == 0:
            return 0
        return int(np.abs(self.modes).sum(axis=1).max())

    def __repr__(self):
        return (f"SpectralField(rank={self.rank}, nmodes={self.nmodes}, "
                f"bandwidth={self.bandwidth}, real={self.real})")

    def coeff(self, k):
        """Coefficient vector at mode ``k`` (zeros when absent)."""
        key = pack([k])[0]
        i = np.searchsorted(self.keys, key)
        if i < self.nmodes and self.keys[i] == key:
            return self.coeffs[i].copy()
        return np.zeros(self.ncomp, np.complex128)

    def mean(self):
        """Zero-mode coefficients (the spatial average)."""
        c = self.coeff((0, 0, 0))
        return c.real if self.real else c

    def max_abs(self):
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def l2(self):
        """L2 norm under the normalised measure (Parseval)."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    # algebra ---------------------------------------------------------------
    def _drop_zeros(self):
        if self.nmodes == 0:
            return self
        keep = np.any(self.coeffs != 0, axis=1)
        if keep.all():
            return self
        return SpectralField(self.keys[keep], self.coeffs[keep], self.rank, self.real)

    def prune(self, rel=None):
        """Drop modes whose magnitude is below ``rel`` times the field max."""
        rel = _state["threshold"] if rel is None else rel
        if self.nmodes == 0:
            return self
        mag = np.abs(self.coeffs).max(axis=1)
        keep = mag > rel * mag.max()
        return SpectralField(self.keys[keep], self.coeffs[keep], self.rank, self.real)

    def with_coeffs(self, coeffs, rank=None, real=None):
        return SpectralField(self.keys, coeffs, rank or self.rank,
                             self.real if real is None else real)

    def _combine(self, other, sa, sb):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.ncomp != self.ncomp:
            raise RankMismatch("cannot add fields with different component counts")
        real = self.real and other.real
        if np.array_equal(self.keys, other.keys):
            return SpectralField(self.keys, sa * self.coeffs + sb * other.coeffs,
                                 self.rank, real)
        keys = np.union1d(self.keys, other.keys)
        out = np.zeros((len(keys), self.ncomp), np.complex128)
        out[np.searchsorted(keys, self.keys)] += sa * self.coeffs
        out[np.searchsorted(keys, other.keys)] += sb * other.coeffs
        return SpectralField(keys, out, self.rank, real)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, s):
        if isinstance(s, SpectralField):
            return multiply(self, s)
        s = complex(s) if np.iscomplexobj(s) else float(s)
        real = self.real and not (isinstance(s, complex) and s.imag != 0)
        return SpectralField(self.keys, self.coeffs * s, self.rank, real)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def conj(self):
        """Complex conjugate function: coefficient at k is conj(c(-k))."""
        keys = pack(-self.modes)
        order = np.argsort(keys)
        return SpectralField(keys[order], np.conj(self.coeffs[order]), self.rank, self.real)

    def real_part(self):
        return ((self + self.conj()) * 0.5).as_real()

    def as_real(self):
        return SpectralField(self.keys, self.coeffs, self.rank, True)

    def component(self, i, j=None):
        """Scalar component ``i`` (vector) or ``(i, j)`` (tensor)."""
        if j is None:
            col = i
        elif self.rank == "tensor_sym":
            col = sym_index(i, j)
        else:
            col = 3 * i + j
        return SpectralField(self.keys, self.coeffs[:, col:col + 1], "scalar",
                             self.real)._drop_zeros()

    def reality_defect(self):
        """Max |c(-k) - conj(c(k))|; zero for real-valued fields."""
        if self.nmodes == 0:
            return 0.0
        other = self.conj()
        return (self - other).max_abs()

    def allclose(self, other, atol=1e-12):
        return (self - other).max_abs() <= atol


def stack(fields, rank):
    """Combine scalar fields into a multi-component field."""
    keys = fields[0].keys
    for f in fields[1:]:
        keys = np.union1d(keys, f.keys)
    out = np.zeros((len(keys), len(fields)), np.complex128)
    for c, f in enumerate(fields):
        out[np.searchsorted(keys, f.keys), c] = f.coeffs[:, 0]
    real = all(f.real for f in fields)
    return SpectralField(keys, out, rank, real)._drop_zeros()


def tensor_to_full(t):
    """Expand a symmetric tensor to the 9-component layout."""
    if t.rank == "tensor":
        return t
    cols = [sym_index(i, j) for i in range(3) for j in range(3)]
    return SpectralField(t.keys, t.coeffs[:, cols], "tensor", t.real)


def symmetrize(t):
    """Symmetric part of a 9-component tensor, in the 6-component layout."""
    if t.rank == "tensor_sym":
        return t
    c = t.coeffs
    cols = [0.5 * (c[:, 3 * i + j] + c[:, 3 * j + i]) for i, j in SYM_PAIRS]
    return SpectralField(t.keys, np.stack(cols, axis=1), "tensor_sym", t.real)


def trace(t):
    if t.rank == "tensor_sym":
        c = t.coeffs[:, 0] + t.coeffs[:, 1] + t.coeffs[:, 2]
    elif t.rank == "tensor":
        c = t.coeffs[:, 0] + t.coeffs[:, 4] + t.coeffs[:, 8]
    else:
        raise RankMismatch("trace needs a tensor")
    return SpectralField(t.keys, c[:, None], "scalar", t.real)._drop_zeros()


def scalar_identity(s):
    """The symmetric tensor s * I."""
    c = np.zeros((s.nmodes, 6), np.complex128)
    c[:, :3] = s.coeffs[:, :1]
    return SpectralField(s.keys, c, "tensor_sym", s.real)


def remove_trace(t):
    """Return (trace-free part, trace/3)."""
    tr3 = trace(t) / 3.0
    return t - scalar_identity(tr3), tr3


# grids -----------------------------------------------------------------
@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with ``n`` (odd) points per dimension."""

    n: int

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError("grid size must be a positive odd integer")

    @property
    def nodes(self):
        return -np.pi + 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def capacity(self):
        return (self.n - 1) // 2

    @classmethod
    def for_bandwidth(cls, K, factor=2):
        return cls(fast_odd(factor * K + 1))


def _signs(modes):
    return np.where(modes.sum(axis=1) % 2 == 0, 1.0, -1.0)


def synthesize(f, g):
    """Values at grid nodes; shape (n, n, n) for scalars else (C, n, n, n)."""
    n = g.n
    if 2 * f.bandwidth + 1 > n:
        raise GridTooSmall(f"grid n={n} cannot hold bandwidth {f.bandwidth}")
    m = f.modes
    w = _state["workers"]
    if f.real:
        sel = m[:, 2] >= 0
        ms, cs = m[sel], f.coeffs[sel] * _signs(m[sel])[:, None]
        idx = (ms[:, 0] % n, ms[:, 1] % n, ms[:, 2])
        out = np.empty((f.ncomp, n, n, n))
        H = np.zeros((n, n, n // 2 + 1), np.complex128)
        for c in range(f.ncomp):
            H[idx] = cs[:, c]
            out[c] = sfft.irfftn(H, s=(n, n, n), norm="forward", workers=w)
            H[idx] = 0
    else:
        cs = f.coeffs * _signs(m)[:, None]
        idx = (m[:, 0] % n, m[:, 1] % n, m[:, 2] % n)
        out = np.empty((f.ncomp, n, n, n), np.complex128)
        H = np.zeros((n, n, n), np.complex128)
        for c in range(f.ncomp):
            H[idx] = cs[:, c]
            out[c] = sfft.ifftn(H, norm="forward", workers=w)
            H[idx] = 0
    return out[0] if f.rank == "scalar" else out


def _box(K):
    r = np.arange(-K, K + 1)
    k1, k2, k3 = np.meshgrid(r, r, np.arange(0, K + 1), indexing="ij")
    return np.stack([k1.ravel(), k2.ravel(), k3.ravel()], axis=1)


def analyze(samples, g, K, rank=None, real=None, threshold=None, consume=False):
    """Fourier coefficients with |k|_inf <= K from grid samples.

    ``samples`` has shape (n, n, n) or (C, n, n, n), or is a list of C
    arrays of shape (n, n, n).  With ``consume`` the list entries are
    released as soon as they are transformed.  Coefficients below
    ``threshold`` times the largest magnitude are dropped.
    """
    n = g.n
    if K > (n - 1) // 2:
        raise GridTooSmall(f"bandwidth {K} exceeds grid capacity {(n - 1) // 2}")
    consume = consume and isinstance(samples, list)
    if not consume:
        samples = np.asarray(samples)
        if samples.ndim == 3:
            samples = samples[None]
    if any(np.shape(s) != (n, n, n) for s in samples):
        raise ValueError("sample shape does not match grid")
    C = len(samples)
    if rank is None:
        rank = {1: "scalar", 3: "vector", 6: "tensor_sym", 9: "tensor"}[C]
    if real is None:
        real = not any(np.iscomplexobj(s) for s in samples)
    thr = _state["threshold"] if threshold is None else threshold
    w = _state["workers"]
    half = _box(K)
    if real:
        idx = (half[:, 0] % n, half[:, 1] % n, half[:, 2])
        vals = np.empty((len(half), C), np.complex128)
        for c in range(C):
            vals[:, c] = sfft.rfftn(samples[c], norm="forward", workers=w)[idx]
            if consume:
                samples[c] = None
        vals *= _signs(half)[:, None]
        mag = np.abs(vals).max(axis=1)
        top = mag.max() if len(mag) else 0.0
        keep = mag > thr * top if top > 0 else np.zeros(len(mag), bool)
        half, vals = half[keep], vals[keep]
        del mag, keep
        pos = half[:, 2] > 0
        modes = np.concatenate([half, -half[pos]])
        coeffs = np.concatenate([vals, np.conj(vals[pos])])
        keys = pack(modes)
        order = np.argsort(keys)
        return SpectralField(keys[order], coeffs[order], rank, real)
    else:
        r = np.arange(-K, K + 1)
        k1, k2, k3 = np.meshgrid(r, r, r, indexing="ij")
        modes = np.stack([k1.ravel(), k2.ravel(), k3.ravel()], axis=1)
        idx = (modes[:, 0] % n, modes[:, 1] % n, modes[:, 2] % n)
        coeffs = np.empty((len(modes), C), np.complex128)
        for c in range(C):
            coeffs[:, c] = sfft.fftn(samples[c], norm="forward", workers=w)[idx]
            if consume:
                samples[c] = None
        coeffs *= _signs(modes)[:, None]
    mag = np.abs(coeffs).max(axis=1)
    top = mag.max() if len(mag) else 0.0
    keep = mag > thr * top if top > 0 else np.zeros(len(mag), bool)
    keys = pack(modes[keep])
    order = np.argsort(keys)
    return SpectralField(keys[order], coeffs[keep][order], rank, real)


# products ----------------------------------------------------------------
def _plan(kind, fa, fb):
    """Contraction plan rows (out, comp_a, comp_b) plus output rank."""
    ra, rb = fa.rank, fb.rank
    if kind == "auto":
        if ra == "scalar" or rb == "scalar":
            kind = "scalar"
        else:
            raise RankMismatch("ambiguous product; choose 'outer' or 'dot'")
    if kind == "scalar":
        if ra == "scalar":
            return [(c, 0, c) for c in range(fb.ncomp)], rb
        if rb == "scalar":
            return [(c, c, 0) for c in range(fa.ncomp)], ra
        raise RankMismatch("scalar product needs a scalar factor")
    if ra != "vector" or rb != "vector":
        if kind == "contract" and ra in ("tensor", "tensor_sym") and rb == "vector":
            full = tensor_to_full(fa) if ra == "tensor_sym" else fa
            return [(i, 3 * i + j, j) for i in range(3) for j in range(3)], "vector", full
        raise RankMismatch(f"{kind} product of {ra} and {rb}")
    if kind == "outer":
        return [(3 * i + j, i, j) for i in range(3) for j in range(3)], "tensor"
    if kind == "sym_outer":
        rows = []
        for o, (i, j) in enumerate(SYM_PAIRS):
            rows.append((o, i, j))
        return rows, "tensor_sym"
    if kind == "dot":
        return [(0, i, i) for i in range(3)], "scalar"
    if kind == "cross":
        return [(0, 1, 2, 1.0), (0, 2, 1, -1.0), (1, 2, 0, 1.0), (1, 0, 2, -1.0),
                (2, 0, 1, 1.0), (2, 1, 0, -1.0)], "vector"
    raise RankMismatch(f"unknown product kind {kind!r}")


def _split_plan(rows):
    plan = np.array([r[:3] for r in rows], dtype=np.intc)
    weight = np.array([r[3] if len(r) > 3 else 1.0 for r in rows], np.complex128)
    return plan, weight


def multiply(f, g, kind="auto", route="auto", backend=None):
    """Exact product of two fields.

    ``kind`` selects the contraction: 'scalar' (scalar times anything),
    'outer', 'sym_outer' (entries f_i g_j for i <= j), 'dot', 'cross',
    or 'contract' (tensor times vector).  ``route`` picks the sparse
    convolution kernel or a dealiased FFT product; both are exact.
    """
    res = _plan(kind, f, g)
    if len(res) == 3:
        rows, rank, f = res
    else:
        rows, rank = res
    nout = NCOMP[rank]
    real = f.real and g.real
    if f.nmodes == 0 or g.nmodes == 0:
        return SpectralField.zeros(rank, real)
    K = f.bandwidth + g.bandwidth
    if route == "auto":
        sparse_cost = f.nmodes * g.nmodes * (len(rows) + 2)
        n = fast_odd(2 * K + 1)
        dense_cost = (f.ncomp + g.ncomp + nout) * 6.0 * n ** 3 * max(1.0, np.log2(n ** 3))
        route = "sparse" if sparse_cost <= dense_cost else "dense"
    if route == "sparse":
        plan, weight = _split_plan(rows)
        box = (2 * K + 1) ** 3
        max_out = int(min(f.nmodes * g.nmodes, box))
        keys, vals = kernels.sparse_convolve(f.keys, f.coeffs, g.keys, g.coeffs, plan,
                                             weight, nout, _ZERO_KEY, max_out,
                                             backend=backend)
        return SpectralField(keys, vals, rank, real)._drop_zeros()
    grid = Grid(fast_odd(2 * K + 1))
    A = synthesize(f, grid)
    B = A if g is f else synthesize(g, grid)
    if A.ndim == 3:
        A = A[None]
    if B.ndim == 3:
        B = B[None]
    dtype = np.complex128 if np.iscomplexobj(A) or np.iscomplexobj(B) else np.float64
    out = [None] * nout
    tmp = np.empty(A.shape[1:], dtype)
    for r in rows:
        w = r[3] if len(r) > 3 else 1.0
        np.multiply(A[r[1]], B[r[2]], out=tmp)
        if w != 1.0:
            tmp *= w
        if out[r[0]] is None:
            out[r[0]] = tmp.copy()
        else:
            out[r[0]] += tmp
    del A, B, tmp
    out = [np.zeros((grid.n,) * 3, dtype) if o is None else o for o in out]
    return analyze(out, grid, K, rank=rank, real=real, consume=True)


def outer(f, g, **kw):
    return multiply(f, g, kind="outer", **kw)


def sym_outer(f, g, **kw):
    """Symmetrised outer product (f⊗g + g⊗f)/2 in the 6-component layout."""
    if f is g:
        return multiply(f, g, kind="sym_outer", **kw)
    return symmetrize(multiply(f, g, kind="outer", **kw))


def dot(f, g, **kw):
    return multiply(f, g, kind="dot", **kw)


# calculus ------------------------------------------------------------------
def _ik(f, axis):
    return 1j * f.modes[:, axis].astype(float)


def derivative(f, axis, order=1):
    """Partial derivative along ``axis`` (0, 1, 2) of the given order."""
    fac = _ik(f, axis) ** order
    return SpectralField(f.keys, f.coeffs * fac[:, None], f.rank, f.real)._drop_zeros()


def grad(f):
    if f.rank != "scalar":
        raise RankMismatch("grad needs a scalar field")
    c = f.coeffs[:, 0]
    cols = [c * _ik(f, a) for a in range(3)]
    return SpectralField(f.keys, np.stack(cols, 1), "vector", f.real)._drop_zeros()


def div(f):
    """Divergence of a vector, or row-wise divergence Div of a tensor."""
    if f.rank == "vector":
        c = sum(f.coeffs[:, a] * _ik(f, a) for a in range(3))
        return SpectralField(f.keys, c[:, None], "scalar", f.real)._drop_zeros()
    if f.rank in ("tensor", "tensor_sym"):
        full = tensor_to_full(f)
        cols = [sum(full.coeffs[:, 3 * i + j] * _ik(f, j) for j in range(3)) for i in range(3)]
        return SpectralField(f.keys, np.stack(cols, 1), "vector", f.real)._drop_zeros()
    raise RankMismatch("div needs a vector or tensor")


def curl(f):
    if f.rank != "vector":
        raise RankMismatch("curl needs a vector field")
    ik = [_ik(f, a) for a in range(3)]
    c = f.coeffs
    cols = [ik[1] * c[:, 2] - ik[2] * c[:, 1],
            ik[2] * c[:, 0] - ik[0] * c[:, 2],
            ik[0] * c[:, 1] - ik[1] * c[:, 0]]
    return SpectralField(f.keys, np.stack(cols, 1), "vector", f.real)._drop_zeros()


def laplacian(f):
    k2 = (f.modes.astype(float) ** 2).sum(axis=1)
    return SpectralField(f.keys, -f.coeffs * k2[:, None], f.rank, f.real)._drop_zeros()


def inverse_laplacian(f):
    """Delta^{-1} on mean-free fields (zero mode mapped to zero)."""
    k2 = (f.modes.astype(float) ** 2).sum(axis=1)
    fac = np.where(k2 > 0, -1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    return SpectralField(f.keys, f.coeffs * fac[:, None], f.rank, f.real)._drop_zeros()


def mode_mask(f, keep):
    return SpectralField(f.keys[keep], f.coeffs[keep], f.rank, f.real)


def project_shell(f, lo=0.0, hi=np.inf, lo_closed=True, hi_closed=True):
    """Keep exactly the modes whose l1 norm lies in the interval."""
    l1 = np.abs(f.modes).sum(axis=1)
    keep = (l1 >= lo) if lo_closed else (l1 > lo)
    keep &= (l1 <= hi) if hi_closed else (l1 < hi)
    return mode_mask(f, keep)


def project_nonzero(f):
    """Remove the mean (the projector onto |k|_1 > 0)."""
    return mode_mask(f, f.keys != _ZERO_KEY)


def leray_project(f):
    """Apply I - k k^T / |k|^2 mode-wise; the zero mode is preserved."""
    if f.rank != "vector":
        raise RankMismatch("leray_project needs a vector field")
    k = f.modes.astype(float)
    k2 = (k ** 2).sum(axis=1)
    safe = np.where(k2 > 0, k2, 1.0)
    kc = (k * f.coeffs).sum(axis=1) / safe
    out = f.coeffs - k * kc[:, None]
    return SpectralField(f.keys, out, "vector", f.real)._drop_zeros()


def cross_const(v, f):
    """Pointwise cross product of a constant vector ``v`` with a vector field."""
    c = f.coeffs
    cols = [v[1] * c[:, 2] - v[2] * c[:, 1],
            v[2] * c[:, 0] - v[0] * c[:, 2],
            v[0] * c[:, 1] - v[1] * c[:, 0]]
    real = f.real and np.isrealobj(v)
    return SpectralField(f.keys, np.stack(cols, 1), "vector", real)._drop_zeros()


def scalar_times_const(s, v, rank="vector"):
    """Scalar field times a constant component vector ``v``."""
    v = np.asarray(v)
    real = s.real and np.isrealobj(v)
    return SpectralField(s.keys, s.coeffs[:, :1] * v[None, :], rank, real)._drop_zeros()


def dot_const(f, v):
    """Pointwise contraction of a vector field with a constant vector."""
    c = f.coeffs @ np.asarray(v)
    real = f.real and np.isrealobj(v)
    return SpectralField(f.keys, c[:, None], "scalar", real)._drop_zeros()


def shift(f, k0):
    """Multiply by exp(i k0.x): every mode moves by ``k0``."""
    modes = f.modes + np.asarray(k0, dtype=np.int64)[None, :]
    keys = pack(modes)
    return SpectralField(keys, f.coeffs, f.rank, False)
