"""Fourier multipliers on the torus and L1 norms of their kernels.

A multiplier acts mode-wise, ``T_m f = sum_k m(k) f_hat(k) e^{ik.x}``.
Operator norms on L1 are measured through the total variation of the
kernel, i.e. the L1 norm of the trigonometric polynomial whose
coefficients are the (truncated) symbol values.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import GridTooSmall, TruncationTooCoarse
from .spectral import SpectralField, fast_odd


@dataclass(frozen=True)
class MultiplierSymbol:
    """A function of the integer frequency.

    ``func`` receives an (M, 3) integer array of nonzero modes.  Symbols
    depending on k only through |k|_1 also provide ``l1_profile`` so their
    kernels can be synthesised by the fast separable route.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    zero_value: complex = 0.0
    real_operator: bool = True
    l1_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support_l1: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, modes):
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, 3)
        out = np.empty(len(modes), np.complex128)
        nz = np.any(modes != 0, axis=1)
        out[~nz] = self.zero_value
        if nz.any():
            out[nz] = self.func(modes[nz])
        if self.support_l1 is not None:
            out[np.abs(modes).sum(axis=1) > self.support_l1] = 0.0
        return out

    def __mul__(self, other):
        prof = None
        if self.l1_profile is not None and other.l1_profile is not None:
            pa, pb = self.l1_profile, other.l1_profile

            def prof(s):
                return pa(s) * pb(s)
        sup = [s for s in (self.support_l1, other.support_l1) if s is not None]
        return MultiplierSymbol(
            f"{self.name}*{other.name}",
            lambda k: self.func(k) * other.func(k),
            self.zero_value * other.zero_value,
            self.real_operator and other.real_operator,
            prof,
            min(sup) if sup else None,
        )


def apply(m, f):
    """T_m f: coefficient-wise product, bandwidth unchanged."""
    vals = m(f.modes)
    real = f.real and m.real_operator
    return SpectralField(f.keys, f.coeffs * vals[:, None], f.rank, real)._drop_zeros()


def _l1(k):
    return np.abs(k).sum(axis=1).astype(float)


def _l2(k):
    return np.sqrt((k.astype(float) ** 2).sum(axis=1))


def _profile_symbol(name, prof, **kw):
    return MultiplierSymbol(name, lambda k: prof(_l1(k)), l1_profile=prof, **kw)


def symbol_identity():
    return _profile_symbol("identity", lambda s: np.ones_like(s), zero_value=1.0)


def symbol_hyperdissipation(theta, beta):
    """|k|^{2 theta} / log^beta(10 + |k|_1), zero at k = 0."""
    if theta < 0 or beta < 0:
        raise ValueError("theta and beta must be nonnegative")
    return MultiplierSymbol(
        f"hyperdissipation(theta={theta},beta={beta})",
        lambda k: _l2(k) ** (2 * theta) / np.log(10.0 + _l1(k)) ** beta,
    )


def symbol_log(beta):
    """log^{-beta}(|k|_1 + 10), zero at k = 0."""
    return _profile_symbol(f"log(beta={beta})", lambda s: np.log(s + 10.0) ** (-beta))


def symbol_inv_l1():
    return _profile_symbol("inv_l1", lambda s: 1.0 / s)


def symbol_grad_power(s):
    """|k|^s (the operator |nabla|^s)."""
    return MultiplierSymbol(f"grad_power({s})", lambda k: _l2(k) ** s)


def symbol_riesz(a1, a2, a3):
    """k1^a1 k2^a2 k3^a3 / |k|^(a1+a2+a3)."""
    alpha = a1 + a2 + a3
    if alpha < 1:
        raise ValueError("riesz symbol needs total order >= 1")
    kf = lambda k: (k[:, 0].astype(float) ** a1 * k[:, 1].astype(float) ** a2
                    * k[:, 2].astype(float) ** a3 / _l2(k) ** alpha)
    return MultiplierSymbol(f"riesz({a1},{a2},{a3})", kf, real_operator=alpha % 2 == 0)


def symbol_dir_hilbert(j):
    """i sign(k_j), for j in {1, 2, 3}."""
    return MultiplierSymbol(f"dir_hilbert({j})",
                            lambda k: 1j * np.sign(k[:, j - 1]).astype(float))


def symbol_truncated(m, radius):
    """m restricted to |k|_1 <= radius."""
    return MultiplierSymbol(f"{m.name}|<= {radius}", m.func, m.zero_value, m.real_operator,
                            m.l1_profile, radius)


def symbol_from_array(name, fn):
    return MultiplierSymbol(name, fn)


# kernel synthesis ------------------------------------------------------------
@dataclass
class KernelReport:
    """L1 norm of a synthesised kernel.

    ``fitted_exponents`` is filled by :func:`fit_exponents` on a table.
    """

    N: int
    l1_norm: float
    kind: str = "dirichlet_l1"
    quad_error: float = 0.0
    grid: int = 0
    fitted_exponents: Optional[tuple] = None


def _half_nodes(n):
    x = -np.pi + 2 * np.pi * np.arange(n) / n
    pos = x[x > 0]
    nodes = np.concatenate([[np.pi], pos])
    weights = np.concatenate([[1.0], np.full(len(pos), 2.0)])
    return nodes, weights


def l1_radial_kernel_norm(profile_values, n):
    """L1 norm of sum_{|k|_1 <= K} g(|k|_1) e^{ik.x} by quadrature on an n-grid.

    ``profile_values[s]`` is g(s) for s = 0..K.  The kernel is even in each
    coordinate, so only nodes with x_i in (0, pi] are evaluated, and the
    sum over k_3 is done in closed form per l1 shell before a separable
    cosine transform in (k_1, k_2) for each x_3 slice.
    """
    g = np.asarray(profile_values, dtype=float)
    K = len(g) - 1
    if n < 2 * K + 1:
        raise GridTooSmall(f"grid {n} too small for kernel bandwidth {K}")
    xh, wx = _half_nodes(n)
    q = np.arange(K + 1)
    cw = np.cos(np.outer(xh, q)) * np.where(q == 0, 1.0, 2.0)
    idx = q[:, None] + q[None, :]
    inside = idx <= K
    A = np.where(inside, g[np.minimum(idx, K)], 0.0)
    T = A @ cw.T
    H = np.minimum(idx, K)
    W2 = wx[:, None] * wx[None, :]
    total = 0.0
    for i3 in range(len(xh)):
        Tm = np.where(inside, T[H, i3], 0.0)
        F = cw @ Tm @ cw.T
        total += wx[i3] * float(np.sum(W2 * np.abs(F)))
    return total / n ** 3


def dense_kernel_norm(coeff_fn, K, n):
    """L1 norm of sum_{|k|_inf <= K} c(k) e^{ik.x} by 3-D FFT synthesis."""
    if n < 2 * K + 1:
        raise GridTooSmall(f"grid {n} too small for kernel bandwidth {K}")
    r = np.arange(-K, K + 1)
    k = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    c = coeff_fn(k) * np.where(k.sum(axis=1) % 2 == 0, 1.0, -1.0)
    H = np.zeros((n, n, n), np.complex128)
    H[k[:, 0] % n, k[:, 1] % n, k[:, 2] % n] = c
    vals = sfft.ifftn(H, norm="forward")
    return float(np.abs(vals).mean())


def dirichlet_l1_kernel(N, oversample=4):
    """L1 norm of the l1-ball Dirichlet kernel D_N = sum_{|k|_1 <= N} e^{ik.x}.

    The quadrature error is estimated as the change between oversampling
    factors ``oversample`` and ``oversample // 2``.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N == 0:
        return KernelReport(0, 1.0, "dirichlet_l1", 0.0, 1)
    g = np.ones(N + 1)
    n = fast_odd(2 * oversample * N + 1)
    n_lo = fast_odd(oversample * N + 1)
    val = l1_radial_kernel_norm(g, n)
    lo = l1_radial_kernel_norm(g, n_lo)
    return KernelReport(N, val, "dirichlet_l1", abs(val - lo), n)


def fejer_coefficients(r):
    """Coefficients 1 - |j|/(r+1) of the 1-D Fejér kernel, j = -r..r."""
    j = np.arange(-r, r + 1)
    return 1.0 - np.abs(j) / (r + 1.0)


def fejer_kernel(r, oversample=4):
    """L1 and L2 norms of the 1-D Fejér kernel F_r under the normalised measure."""
    c = fejer_coefficients(r)
    n = 2 * oversample * r + 1
    x = -np.pi + 2 * np.pi * np.arange(n) / n
    j = np.arange(-r, r + 1)
    vals = (c[None, :] * np.cos(np.outer(x, j))).sum(axis=1)
    l1 = float(np.abs(vals).mean())
    l2 = float(np.sqrt((vals ** 2).mean()))
    rep = KernelReport(r, l1, "fejer", abs(l1 - float(vals.mean())), n)
    rep.l2_norm = l2
    return rep


def fit_exponents(Ns, values, model="log"):
    """Least-squares fit of log(values) to log C + a log N + b log log N.

    ``model='log'`` fixes a = 0.  Returns (a, b).
    """
    Ns = np.asarray(Ns, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    if model == "log":
        A = np.c_[np.ones_like(Ns), np.log(np.log(Ns))]
        sol = np.linalg.lstsq(A, y, rcond=None)[0]
        return 0.0, float(sol[1])
    A = np.c_[np.ones_like(Ns), np.log(Ns), np.log(np.log(Ns))]
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(sol[1]), float(sol[2])


def kernel_table(Ns, kind="dirichlet_l1", model="log"):
    """Reports for each N with the fitted exponent pair attached to all rows."""
    if kind == "dirichlet_l1":
        reps = [dirichlet_l1_kernel(N) for N in Ns]
    elif kind == "fejer":
        reps = [fejer_kernel(N) for N in Ns]
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    usable = [r for r in reps if r.N >= 2]
    if kind == "dirichlet_l1" and len(usable) >= 2:
        ab = fit_exponents([r.N for r in usable], [r.l1_norm for r in usable], model)
        for r in reps:
            r.fitted_exponents = ab
    return reps


# multiplier tails --------------------------------------------------------------
def _taper(s, M):
    """1 up to M, quintic smoothstep down to 0 at 2M."""
    u = np.clip((np.asarray(s, float) - M) / M, 0.0, 1.0)
    return 1.0 - u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


@dataclass
class TailReport:
    N: int
    value: float
    bandwidth: int
    rel_change: float
    history: list


def _tail_value(m, N, M, dense_limit):
    K = 2 * M
    if m.l1_profile is not None:
        s = np.arange(K + 1, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            prof = np.where(s > 0, m.l1_profile(np.maximum(s, 1.0)), 0.0)
        if m.support_l1 is not None:
            prof = np.where(s <= m.support_l1, prof, 0.0)
        g = np.where(s > N, prof, 0.0) * _taper(s, M)
        return l1_radial_kernel_norm(g, fast_odd(2 * K + 1))
    if K > dense_limit:
        raise TruncationTooCoarse(f"bandwidth {K} exceeds dense synthesis limit {dense_limit}")

    def coeff_fn(k):
        l1 = _l1(k)
        return np.where(l1 > N, m(k), 0.0) * _taper(l1, M)

    return dense_kernel_norm(coeff_fn, K, fast_odd(2 * K + 1))


def tail_multiplier_report(m, N, start=None, max_bandwidth=1024, rtol=0.05,
                           dense_limit=64):
    """L1 norm of the tail kernel sum_{|k|_1 > N} m(k) e^{ik.x}.

    The infinite tail is cut smoothly: the symbol is multiplied by a taper
    equal to 1 on |k|_1 <= M and 0 beyond 2M.  M doubles until successive
    values differ by at most ``rtol``; otherwise TruncationTooCoarse.
    """
    if m.support_l1 is not None and N >= m.support_l1:
        return TailReport(N, 0.0, 0, 0.0, [])
    M = max(int(start or N), 4)
    hist = [(2 * M, _tail_value(m, N, M, dense_limit))]
    while True:
        M *= 2
        if 2 * M > max_bandwidth:
            raise TruncationTooCoarse(
                f"tail for N={N} not converged within bandwidth {max_bandwidth}: {hist}")
        val = _tail_value(m, N, M, dense_limit)
        prev = hist[-1][1]
        hist.append((2 * M, val))
        change = abs(val - prev) / max(abs(val), 1e-300)
        if change <= rtol:
            return TailReport(N, val, 2 * M, change, hist)


def tail_multiplier_norm(m, N, **kw):
    """Upper bound for the L1 operator norm of P_{|k|_1 > N} T_m."""
    return tail_multiplier_report(m, N, **kw).value


def weak_type_profile(m, f, grid, levels):
    """Distribution function |{x : |T_m f(x)| > s}| for each level s."""
    from .spectral import synthesize
    vals = np.abs(synthesize(apply(m, f), grid))
    return np.array([(vals > s).mean() for s in levels])
