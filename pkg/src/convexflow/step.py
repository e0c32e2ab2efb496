"""One perturbation step: cutoffs, amplitudes, perturbation, anti-divergence, assembly.

Exactness contract.  For every time sample the assembled triple satisfies

    d_t v1 + Div(v1 (x) v1) + nu Lambda v1 + grad p1 = Div R1

up to rounding, because every term of the decomposition below is kept:

    Div R1 = Div(D + T_cor + T_lin) + grad(Pi + p1 - p) + V,

with D the recovery defect, T_cor/T_lin the corrector and linear tensors,
Pi the collected pressure and V the sum of the mean-free vector rows
(linear time derivative, dissipation, oscillation remainders).  R1 is
(S - tr S / 3 I) + R(V) and the trace goes to the pressure.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocks import GammaSolver
from .errors import (ConsistencyFailure, GeometricBallViolation, NonzeroMean,
                     NotDivergenceFree, SupportTooWide)
from .jets import Jet, _sqrt_derivs, poly_derivs
from .multipliers import apply, symbol_hyperdissipation
from .norms import lp_from_values
from .spectral import (SYM_PAIRS, Grid, SpectralField, analyze, curl, derivative, div,
                       fast_odd, grad, inverse_laplacian, leray_project, multiply,
                       project_nonzero, remove_trace, scalar_identity, scalar_times_const,
                       sym_outer, synthesize)
from .timefield import TimeField

ROWS = ("corrector", "linear_transport", "linear_time", "dissipation_pc", "dissipation_t",
        "oscillation_e1", "oscillation_first", "oscillation_time", "recovery_defect")


# state ------------------------------------------------------------------------------
@dataclass
class TripleState:
    """(v, p, R): velocity, zero-mean pressure, symmetric trace-free stress."""

    v: TimeField
    p: TimeField
    R: TimeField
    params_used: Optional[object] = None

    @property
    def times(self):
        return self.v.times

    @classmethod
    def zero(cls, times):
        z = [[SpectralField.zeros("vector"), SpectralField.zeros("vector")] for _ in times]
        return cls(TimeField(times, z), TimeField(times, [[SpectralField.zeros()] for _ in times]),
                   TimeField(times, [[SpectralField.zeros("tensor_sym")] for _ in times]))

    def invariants(self):
        """Largest divergence, trace, pressure mean and velocity mean over samples."""
        out = {"div_v": 0.0, "trace_R": 0.0, "mean_p": 0.0, "mean_v": 0.0}
        for i in range(len(self.times)):
            v, p, R = self.v.value(i), self.p.value(i), self.R.value(i)
            out["div_v"] = max(out["div_v"], div(v).max_abs())
            if R.nmodes:
                out["trace_R"] = max(out["trace_R"],
                                     float(np.abs(R.coeffs[:, :3].sum(axis=1)).max()))
            out["mean_p"] = max(out["mean_p"], float(np.abs(p.mean()).max()))
            out["mean_v"] = max(out["mean_v"], float(np.abs(v.mean()).max()))
        return out


# anti-divergence -----------------------------------------------------------------------
def anti_divergence(u):
    """Symmetric trace-free R(u) with Div R(u) = u - mean(u), built mode-wise."""
    if u.rank != "vector":
        raise ValueError("anti_divergence needs a vector field")
    u = project_nonzero(u)
    if u.nmodes == 0:
        return SpectralField.zeros("tensor_sym", u.real)
    k = u.modes.astype(float)
    c = u.coeffs
    k2 = (k ** 2).sum(axis=1)
    kc = (k * c).sum(axis=1)
    out = np.empty((u.nmodes, 6), np.complex128)
    for col, (j, h) in enumerate(SYM_PAIRS):
        val = 1j * k[:, h] * k[:, j] / (2.0 * k2 ** 2) * kc
        val -= 1j * k[:, h] / k2 * c[:, j] + 1j * k[:, j] / k2 * c[:, h]
        if j == h:
            val += 1j / (2.0 * k2) * kc
        out[:, col] = val
    return SpectralField(u.keys, out, "tensor_sym", u.real)._drop_zeros()


def dissipation(params):
    return symbol_hyperdissipation(params.theta, params.beta)


# cutoffs ----------------------------------------------------------------------------------------
def smoothstep(u, m=0):
    """S(u) = 10u^3 - 15u^4 + 6u^5 clipped to [0, 1], and its derivatives."""
    u = np.asarray(u, dtype=float)
    p = np.polynomial.Polynomial([0, 0, 0, 10, -15, 6]).deriv(m)
    inside = (u > 0) & (u < 1)
    val = np.where(inside, p(np.clip(u, 0, 1)), 0.0)
    if m == 0:
        val = np.where(u >= 1, 1.0, val)
    return val


CHI_POLY = (1.0, 0.0, 0.0, 6.0, -8.0, 3.0)


def chi(s, m=0):
    """chi = 1 on [0, 1], s on [2, inf), quintic Hermite (C^2) in between."""
    s = np.asarray(s, dtype=float)
    mid = np.polynomial.Polynomial(CHI_POLY).deriv(m)(s - 1.0)
    lin = s if m == 0 else (np.ones_like(s) if m == 1 else np.zeros_like(s))
    low = np.ones_like(s) if m == 0 else np.zeros_like(s)
    return np.where(s <= 1, low, np.where(s >= 2, lin, mid))


def chi_tilde_derivs(x, n):
    """Derivatives of x -> chi(sqrt(x)) up to order n (smooth at x = 0)."""
    x = np.asarray(x, dtype=float)
    xm = np.clip(x, 1.0, 4.0)
    h = Jet([xm, np.ones_like(xm)] + [np.zeros_like(xm)] * (n - 1)) if n >= 1 else Jet([xm])
    mid = (h.sqrt() - 1.0).compose(poly_derivs(CHI_POLY)).derivs()
    hi = _sqrt_derivs(np.maximum(x, 4.0), n)
    out = []
    for m in range(n + 1):
        low = np.ones_like(x) if m == 0 else np.zeros_like(x)
        out.append(np.where(x <= 1, low, np.where(x >= 4, hi[m], mid[m])))
    return out


@dataclass
class CutoffPair:
    """psi(t) equal to 1 on [s0, s1], vanishing outside [s0 - w, s1 + w]."""

    support: Optional[tuple]
    delta: float
    width: float

    def psi(self, t, m=0):
        t = np.asarray(t, dtype=float)
        if self.support is None:
            return np.zeros_like(t)
        s0, s1 = self.support
        w = self.width
        up = smoothstep((t - (s0 - w)) / w, m) / w ** m
        down = smoothstep((t - s1) / w, m) / w ** m
        # exact plateau: the ramp argument can round just below 1 at s0
        return np.where((t >= s0) & (t <= s1), 1.0 if m == 0 else 0.0, up - down)

    @property
    def psi_support(self):
        if self.support is None:
            return None
        return (self.support[0] - self.width, self.support[1] + self.width)

    chi = staticmethod(chi)

    def check(self, times):
        """The defining properties on a sample grid."""
        t = np.asarray(times, float)
        out = {"psi_max_derivative": float(np.abs(self.psi(t, 1)).max()),
               "derivative_bound": 2.0 / self.delta}
        if self.support is not None:
            s0, s1 = self.support
            on = (t >= s0) & (t <= s1)
            off = (t <= s0 - self.delta) | (t >= s1 + self.delta)
            out["one_on_support"] = bool(np.all(np.abs(self.psi(t[on]) - 1) == 0))
            out["zero_outside"] = bool(np.all(self.psi(t[off]) == 0))
        return out


def build_cutoffs(Rq, delta, domain=None, threshold=1e-13, width_factor=0.96):
    """psi from the time support of ``Rq`` with ramps of width 0.96 delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sup = Rq.time_support(threshold)
    if sup is not None:
        lo, hi = domain if domain is not None else (Rq.times[0], Rq.times[-1])
        if sup[0] - delta < lo or sup[1] + delta > hi:
            raise SupportTooWide(f"N_delta({sup}) leaves the time domain [{lo}, {hi}]")
    return CutoffPair(sup, float(delta), width_factor * float(delta))


def psi_ratio_bound():
    """max s / chi(s): bounds |R| / rho by this times eps / 2 where psi = 1."""
    s = np.linspace(1e-6, 4.0, 400001)
    return float((s / chi(s)).max())


# amplitudes ------------------------------------------------------------------------------
@dataclass
class AmplitudeSet:
    a: list                      # six TimeFields (positive directions), scalar
    rho: TimeField
    K_a: int
    report: dict = field(default_factory=dict)

    def full(self):
        """Twelve amplitude fields, a(-xi) = a(xi)."""
        return self.a + self.a


def _frob_sq(R):
    acc = None
    for c in range(6):
        term = R[c] * R[c] * (1.0 if c < 3 else 2.0)
        acc = term if acc is None else acc + term
    return acc


def pointwise_amplitudes(Rjets, psi_derivs, delta, eps, solver):
    """Jets of a_xi and rho at grid points.

    ``Rjets[m]`` holds the six symmetric components of d_t^m R; returns
    (list of six Jets, rho Jet, min coefficient, max |R| / rho_tilde).
    """
    order = len(Rjets) - 1
    R = [Jet.from_derivs([Rjets[m][c] for m in range(order + 1)]) for c in range(6)]
    u = _frob_sq(R) * (1.0 / delta ** 2)
    rt = u.compose(chi_tilde_derivs) * (2.0 * delta / eps)
    vec = [rt - R[c] for c in range(3)] + [-R[c] for c in range(3, 6)]
    L = solver.inverse
    psi = Jet.from_derivs([np.float64(p) for p in psi_derivs[:order + 1]])
    a, cmin = [], np.inf
    for x in range(6):
        c = vec[0] * L[x, 0]
        for k in range(1, 6):
            c = c + vec[k] * L[x, k]
        cmin = min(cmin, float(c.value.min()))
        if cmin <= 0:
            raise GeometricBallViolation(f"coefficient {cmin:.3e} <= 0 at some grid point")
        a.append(c.sqrt() * psi)
    ratio = float((np.sqrt(u.value) * delta / rt.value).max())
    return a, rt * (psi * psi), cmin, ratio


def build_amplitudes(Rq, cut, delta, eps=None, K_a=None, order=1, n_a=None, solver=None,
                     check_factor=2.0):
    """Amplitude fields a_xi = psi sqrt(c_xi(rho_tilde I - R)) projected to bandwidth K_a.

    ``c_xi`` are the exact coefficients of the geometric basis, so
    sum_{xi positive} a_xi^2 (I - xi xi) = rho I - R before projection.
    """
    solver = solver or GammaSolver()
    eps = solver.certified_epsilon() if eps is None else eps
    KR = max((Rq.value(i).bandwidth for i in range(len(Rq))), default=0)
    K_a = max(2 * KR, 1) if K_a is None else int(K_a)
    n_a = fast_odd(max(8 * K_a, 4 * KR, 16) + 1) if n_a is None else n_a
    g = Grid(n_a)
    zero = SpectralField.zeros()
    a_jets = [[] for _ in range(6)]
    rho_jets = []
    rep = {"K_a": K_a, "n_a": n_a, "min_coefficient": None, "max_ratio": 0.0,
           "ratio_limit": eps * check_factor / 2.0, "projection_error": 0.0}
    for i, t in enumerate(Rq.times):
        psi_d = [float(cut.psi(t, m)) for m in range(order + 1)]
        if all(p == 0.0 for p in psi_d):
            for x in range(6):
                a_jets[x].append([zero] * (order + 1))
            rho_jets.append([zero] * (order + 1))
            continue
        Rj = [np.asarray(synthesize(Rq.derivative(i, m), g)).reshape(6, n_a, n_a, n_a)
              if Rq.derivative(i, m).nmodes else np.zeros((6, n_a, n_a, n_a))
              for m in range(order + 1)]
        a, rho, cmin, ratio = pointwise_amplitudes(Rj, psi_d, delta, eps, solver)
        if ratio > rep["ratio_limit"] + 1e-12:
            raise GeometricBallViolation(f"|R|/rho = {ratio:.4f} exceeds {rep['ratio_limit']:.4f}")
        rep["max_ratio"] = max(rep["max_ratio"], ratio)
        rep["min_coefficient"] = cmin if rep["min_coefficient"] is None else min(
            rep["min_coefficient"], cmin)
        for x in range(6):
            ders = a[x].derivs()
            fields = [analyze(d, g, K_a, rank="scalar", real=True) for d in ders]
            back = synthesize(fields[0], g) if fields[0].nmodes else 0.0
            rep["projection_error"] = max(rep["projection_error"],
                                          float(np.abs(back - ders[0]).max()))
            a_jets[x].append(fields)
        rho_jets.append([analyze(d, g, K_a, rank="scalar", real=True) for d in rho.derivs()])
    times = Rq.times
    psup = cut.psi_support
    a = [TimeField(times, a_jets[x], psup) for x in range(6)]
    rhof = TimeField(times, rho_jets, psup)
    return AmplitudeSet(a, rhof, K_a, rep)


def recover_residual(amp, Rq, cut, delta, eps=None, solver=None, n=None):
    """max over samples and a fine grid of |sum a_xi^2 (I - xi xi) - (rho I - R)|."""
    solver = solver or GammaSolver()
    eps = solver.certified_epsilon() if eps is None else eps
    K = max(amp.K_a, max(Rq.value(i).bandwidth for i in range(len(Rq))))
    n = fast_odd(max(4 * K, 16) + 1) * 2 + 1 if n is None else n
    n = fast_odd(n)
    g = Grid(n)
    xi = solver.dirs.directions[:6]
    basis = np.eye(3)[None] - np.einsum("ni,nj->nij", xi, xi)
    worst = 0.0
    for i, t in enumerate(Rq.times):
        ps = float(cut.psi(t))
        if ps == 0.0:
            continue
        R = np.asarray(synthesize(Rq.value(i), g)).reshape(6, n, n, n) \
            if Rq.value(i).nmodes else np.zeros((6, n, n, n))
        fr = np.sqrt(_frob_sq(list(R)))
        rho = (2.0 * delta / eps) * chi(fr / delta) * ps ** 2
        acc = np.zeros((6, n, n, n))
        for x in range(6):
            f = amp.a[x].value(i)
            a2 = synthesize(f, g) ** 2 if f.nmodes else 0.0
            for c, (p, q) in enumerate(SYM_PAIRS):
                acc[c] += a2 * basis[x, p, q]
        for c in range(3):
            acc[c] -= rho
        acc += R
        worst = max(worst, float(np.sqrt(_frob_sq(list(acc))).max()))
    return worst


# perturbation -------------------------------------------------------------------------------
def _jet_product(f, g, kind="scalar"):
    """Leibniz product of two jets of equal length."""
    n = min(len(f), len(g))
    out = []
    for m in range(n):
        acc = None
        for j in range(m + 1):
            term = multiply(f[j], g[m - j], kind=kind) * float(math.comb(m, j))
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _two_re(f):
    """2 Re f for a complex field."""
    return (f + f.conj()).as_real()


@dataclass
class PerturbationParts:
    wp: TimeField
    wc: TimeField
    wt: TimeField
    amp: AmplitudeSet
    aeta: list                   # per sample: six jets of a_xi eta_xi
    a2eta2: list                 # per sample: six jets of a_xi^2 eta_xi^2
    active: list                 # per sample: whether any amplitude is nonzero

    @property
    def w(self):
        return self.wp + self.wc + self.wt


def build_perturbation(amp, blocks, params):
    """Principal, corrector and temporal parts of the perturbation."""
    times = amp.rho.times
    order = min(amp.a[0].order, blocks[0].flow.order)
    lam, mu = float(params.lam), float(params.mu)
    zv = SpectralField.zeros("vector")
    wp_j, wc_j, wt_j, aeta_all, a2_all, active = [], [], [], [], [], []
    for i in range(len(times)):
        a = [[amp.a[x].jets[i][m] for m in range(order + 1)] for x in range(6)]
        on = any(f.nmodes for x in range(6) for f in a[x])
        active.append(on)
        if not on:
            wp_j.append([zv] * (order + 1))
            wc_j.append([zv] * (order + 1))
            wt_j.append([zv] * (order + 1))
            aeta_all.append(None)
            a2_all.append(None)
            continue
        wp = [zv] * (order + 1)
        wt = [zv] * (order + 1)
        aeta, a2eta2 = [], []
        for x in range(6):
            b = blocks[x]
            W = b.flow.jets[i][:order + 1]
            eta = b.eta.jets[i][:order + 1]
            aW = _jet_product(a[x], W)
            wp = [wp[m] + _two_re(aW[m]) for m in range(order + 1)]
            ae = _jet_product(a[x], eta)
            q = _jet_product(ae, ae)
            aeta.append(ae)
            a2eta2.append(q)
            wt = [wt[m] + leray_project(project_nonzero(scalar_times_const(q[m], b.xi))) / mu
                  for m in range(order + 1)]
        wc = [curl(f) / lam - f for f in wp]
        wp_j.append(wp)
        wc_j.append(wc)
        wt_j.append(wt)
        aeta_all.append(aeta)
        a2_all.append(a2eta2)
    sup = amp.rho.support
    return PerturbationParts(TimeField(times, wp_j, sup), TimeField(times, wc_j, sup),
                             TimeField(times, wt_j, sup), amp, aeta_all, a2_all, active)


# bootstrap ---------------------------------------------------------------------------------
def bootstrap(u, nu=1.0, theta=1.25, beta=15.0, tol=1e-11):
    """Triple (u, p0, R0) with R0 = R(d_t u + nu Lambda u) + u (x) u - |u|^2/3 I."""
    sym = symbol_hyperdissipation(theta, beta)
    for i in range(len(u)):
        f = u.value(i)
        scale = max(f.max_abs(), 1.0)
        if div(f).max_abs() > tol * scale * max(f.bandwidth, 1):
            raise NotDivergenceFree(f"div u = {div(f).max_abs():.3e} at t={u.times[i]}")
        if np.abs(f.mean()).max() > tol * scale:
            raise NonzeroMean(f"mean u = {np.abs(f.mean()).max():.3e} at t={u.times[i]}")
    J = u.order
    if J < 1:
        raise ValueError("bootstrap needs at least one exact time derivative")
    R_j, p_j = [], []
    for i in range(len(u)):
        jet = u.jets[i]
        Rs, ps = [], []
        for m in range(J):
            lin = anti_divergence(jet[m + 1] + apply(sym, jet[m]) * nu)
            quad = None
            for j in range(m + 1):
                term = sym_outer(jet[j], jet[m - j]) * float(math.comb(m, j))
                quad = term if quad is None else quad + term
            tf, tr3 = remove_trace(quad) if quad.nmodes else (quad, SpectralField.zeros())
            Rs.append(lin + tf)
            ps.append(project_nonzero(-tr3) if tr3.nmodes else SpectralField.zeros())
        R_j.append(Rs)
        p_j.append(ps)
    sup = u.support
    return TripleState(u, TimeField(u.times, p_j, sup), TimeField(u.times, R_j, sup))


# residual verification ---------------------------------------------------------------------
@dataclass
class ResidualReport:
    l2: list
    l1: list
    times: list
    weak: Optional[float] = None

    @property
    def max_l2(self):
        return max(self.l2, default=0.0)

    def to_dict(self):
        return {"times": list(map(float, self.times)), "l2": self.l2, "l1": self.l1,
                "max_l2": self.max_l2, "weak": self.weak}


def residual_field(state, i, params=None, nu=None, theta=1.25, beta=15.0):
    """d_t v + Div(v (x) v) + nu Lambda v + grad p - Div R at sample ``i``."""
    if params is not None:
        nu, theta, beta = params.nu, params.theta, params.beta
    nu = 1.0 if nu is None else nu
    v = state.v.value(i)
    res = state.v.derivative(i, 1)
    if v.nmodes:
        res = res + div(sym_outer(v, v)) + apply(symbol_hyperdissipation(theta, beta), v) * nu
    p = state.p.value(i)
    if p.nmodes:
        res = res + grad(p)
    R = state.R.value(i)
    if R.nmodes:
        res = res - div(R)
    return res


def verify_approx(state, params=None, l1=True, test_field=None, **kw):
    """Strong ApproxEq residual per sample (L2 by Parseval, L1 by quadrature).

    ``test_field(t)`` optionally supplies a divergence-free test field; its
    space-time pairing with the residual (trapezoid in time) is reported.
    """
    l2s, l1s, pair = [], [], []
    for i in range(len(state.times)):
        r = residual_field(state, i, params, **kw)
        l2s.append(r.l2())
        if l1 and r.nmodes:
            g = Grid(fast_odd(2 * r.bandwidth + 1))
            vals = synthesize(r, g)
            l1s.append(lp_from_values(np.sqrt((vals ** 2).sum(axis=0)), 1))
        else:
            l1s.append(0.0)
        if test_field is not None:
            phi = test_field(state.times[i])
            common, ia, ib = np.intersect1d(r.keys, phi.keys, return_indices=True)
            pair.append(float(np.real(np.sum(r.coeffs[ia] * np.conj(phi.coeffs[ib])))))
    weak = float(np.trapezoid(pair, state.times)) if test_field is not None else None
    return ResidualReport(l2s, l1s, list(state.times), weak)


# assembly ------------------------------------------------------------------------------------
@dataclass
class StepArtifacts:
    """Per-sample norms of the nine stress rows and bookkeeping checks."""

    times: list
    rows: dict                   # name -> list of {"l1", "l2"} per sample
    r1_l1: list
    grid: list
    checks: dict = field(default_factory=dict)
    amp_report: dict = field(default_factory=dict)

    def to_dict(self):
        return {"times": list(map(float, self.times)), "rows": self.rows,
                "r1_l1": self.r1_l1, "grid": self.grid, "checks": self.checks,
                "amplitudes": self.amp_report}


def _frob_phys(comps):
    acc = comps[0] ** 2
    for c in range(1, 6):
        t = comps[c] ** 2
        if c >= 3:
            t *= 2.0
        acc += t
        del t
    return np.sqrt(acc, out=acc)


def _pair_mean_matrix(blocks, i):
    """Real 3x3 matrices Mtot[p, q] = sum over signs of mean(W (x) W') for positive p, q."""
    from .blocks import pair_mean
    M = np.zeros((6, 6, 3, 3))
    for p in range(6):
        for q in range(6):
            acc = np.zeros((3, 3), complex)
            for sp in (0, 6):
                for sq in (0, 6):
                    acc += pair_mean(blocks[p + sp], blocks[q + sq], i)
            M[p, q] = acc.real
    return M


def _sym_const(s, Mat):
    """Scalar field times a constant symmetric matrix (6-component)."""
    vals = np.array([Mat[p, q] for p, q in SYM_PAIRS])
    return scalar_times_const(s, vals, rank="tensor_sym")


def _matvec_grad(s, Mat):
    """Mat grad s for a constant matrix."""
    gs = grad(s)
    return SpectralField(gs.keys, gs.coeffs @ Mat.T, "vector", gs.real)._drop_zeros()


def _wave_values(block, g):
    """Re(2 W_xi) at grid nodes, evaluated analytically."""
    x = g.nodes
    k = block.k0
    ph = k[0] * x[:, None, None] + k[1] * x[None, :, None] + k[2] * x[None, None, :]
    c = np.cos(ph)
    s = np.sin(ph, out=ph)
    B = block.B
    out = []
    for j in range(3):
        y = c * (2.0 * B[j].real)
        y -= s * (2.0 * B[j].imag)
        out.append(y)
    return out


def _dot3(A, B):
    out = A[0] * B[0]
    out += A[1] * B[1]
    out += A[2] * B[2]
    return out


def _tensor_row(name, comp_fn, acc, rows, trace=None):
    """Accumulate a physical six-component row, made trace-free, into ``acc``.

    ``comp_fn(p, q)`` returns a fresh array for entry (p, q); ``trace`` is
    the pointwise trace of the row (None when it is trace-free).
    """
    sq = None
    for c, (p, q) in enumerate(SYM_PAIRS):
        buf = comp_fn(p, q)
        if trace is not None and p == q:
            buf -= trace / 3.0
        acc[c] += buf
        buf *= buf
        if c >= 3:
            buf *= 2.0
        if sq is None:
            sq = buf
        else:
            sq += buf
            del buf
    np.sqrt(sq, out=sq)
    l1 = float(sq.mean())
    sq *= sq
    rows[name] = {"l1": l1, "l2": float(np.sqrt(sq.mean()))}


def _spectral_row(name, T, g, acc, rows):
    if T.nmodes == 0:
        rows[name] = {"l1": 0.0, "l2": 0.0}
        return
    _tensor_row(name, lambda p, q: synthesize(T.component(p, q), g)
                if T.component(p, q).nmodes else np.zeros((g.n,) * 3), acc, rows)


def _oscillation_pass(U, blocks, gfields, g):
    """sum_xi [Y (u.G) - G (u.Y) + u (G.Y)] with Y = 2 Re W_xi and G = gfields[xi]."""
    out = [np.zeros_like(U[0]) for _ in range(3)]
    for x in range(6):
        if gfields[x].nmodes == 0:
            continue
        Y = _wave_values(blocks[x], g)
        uy = _dot3(U, Y)
        G = list(synthesize(gfields[x], g))
        ug = _dot3(U, G)
        gy = _dot3(G, Y)
        for c in range(3):
            tmp = Y[c] * ug
            out[c] += tmp
            np.multiply(G[c], uy, out=tmp)
            out[c] -= tmp
            np.multiply(U[c], gy, out=tmp)
            out[c] += tmp
            del tmp
        del Y, uy, G, ug, gy
    return out


def _assemble_sample(i, state, parts, blocks, params, solver, grid_n=None):
    """R1, p1 and row norms at one active sample."""
    lam, mu, nu = float(params.lam), float(params.mu), float(params.nu)
    sym = dissipation(params)
    amp = parts.amp
    a = [amp.a[x].jets[i] for x in range(6)]
    aeta, a2 = parts.aeta[i], parts.a2eta2[i]
    wp, wp1 = parts.wp.jets[i][0], parts.wp.jets[i][1]
    wc, wc1 = parts.wc.jets[i][0], parts.wc.jets[i][1]
    wt = parts.wt.jets[i][0]
    w = wp + wc + wt
    v = state.v.value(i)
    Rq = state.R.value(i)
    zs, zv = SpectralField.zeros(), SpectralField.zeros("vector")

    # low-frequency bookkeeping
    M = _pair_mean_matrix(blocks, i)
    m_eta = [float((np.abs(blocks[x].eta.value(i).coeffs) ** 2).sum()) for x in range(6)]
    sum_aaM = SpectralField.zeros("tensor_sym")
    grad_aaM = zv
    for p in range(6):
        for q in range(6):
            aa = multiply(a[p][0], a[q][0])
            sum_aaM = sum_aaM + _sym_const(aa, M[p, q])
            grad_aaM = grad_aaM + _matvec_grad(aa, M[p, q])
    rho_hat = SpectralField(sum_aaM.keys, (sum_aaM.coeffs[:, :3].sum(axis=1) / 3.0)[:, None],
                            "scalar", True)._drop_zeros()
    D = Rq - scalar_identity(rho_hat) + sum_aaM
    sum_ma2 = zs
    for x in range(6):
        sum_ma2 = sum_ma2 + multiply(a[x][0], a[x][0]) * m_eta[x]

    # spectral vector rows
    xi = [blocks[x].xi for x in range(6)]
    osc_f_spec, osc_time, pi_time = zv, zv, zs
    for x in range(6):
        eta = blocks[x].eta.jets[i]
        a2x = multiply(a[x][0], a[x][0])
        deta2 = multiply(eta[0], eta[1]) * 2.0
        osc_f_spec = osc_f_spec + scalar_times_const(multiply(a2x, deta2), xi[x]) / mu
        da2 = multiply(a[x][0], a[x][1]) * 2.0
        osc_time = osc_time + scalar_times_const(multiply(da2, multiply(eta[0], eta[0])),
                                                 xi[x]) / mu
        dq = a2[x][1]
        adv = sum((derivative(dq, c) * xi[x][c] for c in range(3)), zs)
        pi_time = pi_time - inverse_laplacian(adv) / mu
    linear_time = wp1 + wc1
    diss_pc = apply(sym, wp + wc) * nu
    diss_t = apply(sym, wt) * nu

    # dense grid
    Ku, Kw, Kv = wp.bandwidth, w.bandwidth, v.bandwidth
    Kg = max(multiply(blocks[x].eta.value(i), grad(a[x][0])).bandwidth for x in range(6))
    Kg = max(Kg, max(aeta[x][0].bandwidth for x in range(6)))
    KY = max(int(np.abs(blocks[x].k0).max()) for x in range(6))
    K = max(2 * Kw, Kv + Kw, KY + Kg + Ku, 2 * Ku, 1)
    n = fast_odd(2 * K + 1) if grid_n is None else grid_n
    g = Grid(n)

    # oscillation rows from the identity Div(u (x) u) = grad|u|^2/2 + sum_xi [...]
    g1 = [multiply(blocks[x].eta.value(i), grad(a[x][0])) for x in range(6)]
    g2 = [grad(aeta[x][0]) - g1[x] for x in range(6)]
    Kosc = KY + Kg + Ku
    U = list(synthesize(wp, g))
    osc_e1 = analyze(_oscillation_pass(U, blocks, g1, g), g, Kosc, rank="vector", real=True,
                     consume=True)
    osc_e1 = osc_e1 - grad_aaM + grad(sum_ma2)
    osc_first = analyze(_oscillation_pass(U, blocks, g2, g), g, Kosc, rank="vector",
                        real=True, consume=True) + osc_f_spec
    del U, g1, g2

    # mean-free vector rows -> anti-divergence -> physical
    rows = {}
    acc = [np.zeros((n, n, n)) for _ in range(6)]
    vec_rows = {"linear_time": linear_time, "dissipation_pc": diss_pc, "dissipation_t": diss_t,
                "oscillation_e1": osc_e1, "oscillation_first": osc_first,
                "oscillation_time": osc_time}
    V_total = zv
    for name in ("linear_time", "dissipation_pc", "dissipation_t", "oscillation_e1",
                 "oscillation_first", "oscillation_time"):
        rv = project_nonzero(vec_rows[name])
        V_total = V_total + rv
        _spectral_row(name, anti_divergence(rv), g, acc, rows)
    del vec_rows
    _spectral_row("recovery_defect", D, g, acc, rows)

    # corrector and linear tensors; with y = wc + wt and wp = w - y,
    # w (x) w - wp (x) wp = w (x) y + y (x) w - y (x) y
    Wf = list(synthesize(w, g))
    Yc = list(synthesize(wp, g))
    for c in range(3):
        np.subtract(Wf[c], Yc[c], out=Yc[c])
    press = np.zeros((n, n, n))
    for c in range(3):
        d = Wf[c] - Yc[c]
        d *= d
        press += d
        del d
    press *= 0.5

    def corr(p, q):
        out = Wf[p] * Yc[q]
        out += Yc[p] * Wf[q]
        out -= Yc[p] * Yc[q]
        return out

    tr = 2.0 * _dot3(Wf, Yc)
    tr -= _dot3(Yc, Yc)
    press += tr / 3.0
    _tensor_row("corrector", corr, acc, rows, trace=tr)
    del Yc, tr
    if v.nmodes:
        Vf = list(synthesize(v, g))

        def lin(p, q):
            out = Vf[p] * Wf[q]
            out += Wf[p] * Vf[q]
            return out

        tr = 2.0 * _dot3(Vf, Wf)
        press += tr / 3.0
        _tensor_row("linear_transport", lin, acc, rows, trace=tr)
        del Vf, tr
    else:
        rows["linear_transport"] = {"l1": 0.0, "l2": 0.0}
    del Wf
    mag = _frob_phys(acc)
    r1_l1 = float(mag.mean())
    del mag
    R1 = analyze(acc, g, min(K, (n - 1) // 2), rank="tensor_sym", real=True, consume=True)
    del acc
    pfield = analyze([press], g, min(K, (n - 1) // 2), rank="scalar", real=True, consume=True)
    del press
    # trace of D is zero; rho_hat enters Pi directly
    Pi_spec = rho_hat - sum_ma2 + pi_time
    p1 = project_nonzero(state.p.value(i) - Pi_spec - pfield)
    return R1, p1, rows, r1_l1, n, V_total


def assemble_step(state, parts, blocks, params, solver=None, tol=1e-7, check=True,
                  grid_n=None):
    """New triple (v + w, p1, R1) and per-row diagnostics."""
    solver = solver or GammaSolver()
    times = state.times
    w = parts.w
    order = min(state.v.order, w.order)
    v_j, p_j, R_j = [], [], []
    rows = {k: [] for k in ROWS}
    r1_l1, grids = [], []
    for i in range(len(times)):
        v_j.append([state.v.jets[i][m] + w.jets[i][m] for m in range(order + 1)])
        if not parts.active[i]:
            p_j.append([state.p.value(i)])
            R_j.append([state.R.value(i)])
            for k in ROWS:
                rows[k].append({"l1": 0.0, "l2": 0.0})
            r1_l1.append(0.0)
            grids.append(0)
            continue
        R1, p1, rr, l1, n, _ = _assemble_sample(i, state, parts, blocks, params, solver,
                                                grid_n)
        p_j.append([p1])
        R_j.append([R1])
        for k in ROWS:
            rows[k].append(rr[k])
        r1_l1.append(l1)
        grids.append(n)
    sup_w = parts.amp.rho.support
    sup_v = _hull(state.v.support, sup_w)
    sup_R = _hull(state.R.support, sup_w)
    new = TripleState(TimeField(times, v_j, sup_v), TimeField(times, p_j, sup_v),
                      TimeField(times, R_j, sup_R), params)
    art = StepArtifacts(list(times), rows, r1_l1, grids, amp_report=parts.amp.report)
    if check:
        rep = verify_approx(new, params, l1=False)
        art.checks["approx_l2"] = rep.l2
        if rep.max_l2 > tol:
            raise ConsistencyFailure(f"ApproxEq residual {rep.max_l2:.3e} > {tol:.1e}")
    return new, art


def _hull(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


def cross_validate(state, params):
    """max over samples of |Div R1 - P(F + grad p1)|_2 with F the velocity residual."""
    worst = 0.0
    sym = dissipation(params)
    for i in range(len(state.times)):
        v = state.v.value(i)
        Fv = state.v.derivative(i, 1)
        if v.nmodes:
            Fv = Fv + div(sym_outer(v, v)) + apply(sym, v) * params.nu
        p = state.p.value(i)
        if p.nmodes:
            Fv = Fv + grad(p)
        naive = div(anti_divergence(project_nonzero(Fv))) if Fv.nmodes else Fv
        direct = div(state.R.value(i)) if state.R.value(i).nmodes else SpectralField.zeros(
            "vector")
        worst = max(worst, (direct - naive).l2())
    return worst


def support_containment(before, after, delta, threshold=1e-13):
    """Samples outside N_delta(supp v_q u supp R_q) where v1 - v_q or R1 is nonzero."""
    sups = [s for s in (before.v.time_support(threshold), before.R.time_support(threshold))
            if s is not None]
    bad = []
    for i, t in enumerate(after.times):
        inside = any(s[0] - delta < t < s[1] + delta for s in sups)
        if inside:
            continue
        dv = (after.v.value(i) - before.v.value(i)).max_abs()
        dR = after.R.value(i).max_abs()
        if dv > threshold or dR > threshold:
            bad.append(float(t))
    return {"ok": not bad, "violations": bad}


def one_step(state, params, delta, blocks=None, K_a=None, solver=None, tol=1e-7,
             jet_order=1, grid_n=None, check=True):
    """Cutoffs, amplitudes, perturbation and assembly in one call."""
    from .blocks import build_all
    solver = solver or GammaSolver()
    eps = solver.certified_epsilon()
    blocks = blocks or build_all(params, state.times, order=jet_order)
    cut = build_cutoffs(state.R, delta)
    amp = build_amplitudes(state.R, cut, delta, eps, K_a=K_a, order=jet_order, solver=solver)
    parts = build_perturbation(amp, blocks, params)
    new, art = assemble_step(state, parts, blocks, params, solver, tol, check, grid_n)
    art.checks["cutoffs"] = cut.check(state.times)
    art.checks["psi_support"] = cut.psi_support
    return new, art, parts, cut


def shear_flow(times, height=0.02, t0=0.25, t1=0.75, power=4, order=3):
    """u = phi(t) (cos x3, 0, 0) with a polynomial bump phi, as a TimeField."""
    from .timefield import PolyBump
    phi = PolyBump(t0, t1, power=power, height=height)
    e1 = SpectralField.from_dict({(0, 0, 1): [0.5, 0, 0], (0, 0, -1): [0.5, 0, 0]}, "vector")
    jets = [[e1 * float(phi(t, m)) for m in range(order + 1)] for t in times]
    return TimeField(times, jets, support=(t0, t1))
