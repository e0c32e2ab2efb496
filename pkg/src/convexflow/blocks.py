"""Directions, geometric coefficients, Beltrami waves and impulsed Beltrami flows.

Indices 0..5 of a :class:`DirectionSet` are the positive directions and
index ``i + 6`` is the partner ``-xi`` of index ``i``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonIntegerModes, OutsideGeometricBall, ParamViolation
from .norms import lp_norm, luxemburg_norm
from .params import check_params
from .spectral import (SYM_PAIRS, Grid, SpectralField, curl, derivative, div, fast_odd, pack,
                       shift, synthesize, unpack)
from .timefield import TimeField

_POS = ((3, 4, 0), (3, -4, 0), (0, 3, 4), (0, 3, -4), (4, 0, 3), (-4, 0, 3))
_FRAMES = ((0, 0, 1), (0, 0, 1), (1, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 0))


class DirectionSet:
    """The 12 directions with frames (A, xi x A) and polarisations B."""

    def __init__(self, frames=None):
        pos = np.array(_POS, dtype=float) / 5.0
        A = np.array(frames if frames is not None else _FRAMES, dtype=float)
        self.int5 = np.vstack([np.array(_POS), -np.array(_POS)]).astype(np.int64)
        self.directions = np.vstack([pos, -pos])
        self.A = np.vstack([A, A])
        self.C = np.cross(self.directions, self.A)
        self.B = (self.A + 1j * self.C) / math.sqrt(2.0)

    npos = 6

    def __len__(self):
        return 12

    @staticmethod
    def partner(i):
        return (i + 6) % 12

    def validate(self):
        """Invariant residuals (all should be 0 up to rounding)."""
        xi, A = self.directions, self.A
        pair_min = min(np.linalg.norm(xi[i] + xi[j]) for i in range(12) for j in range(12)
                       if np.linalg.norm(xi[i] + xi[j]) > 1e-12)
        C5 = 5.0 * self.C
        return {
            "unit": float(np.abs(np.linalg.norm(xi, axis=1) - 1).max()),
            "integer_5xi": bool(np.all(np.abs(5 * xi - np.rint(5 * xi)) < 1e-12)),
            "A_orthogonal": float(np.abs((A * xi).sum(axis=1)).max()),
            "A_unit": float(np.abs(np.linalg.norm(A, axis=1) - 1).max()),
            "A_even": bool(np.array_equal(self.A[:6], self.A[6:])),
            "integer_5C": bool(np.all(np.abs(C5 - np.rint(C5)) < 1e-12)),
            "min_pair_sum": float(pair_min),
            "sum_xixi": np.einsum("ni,nj->ij", xi[:6], xi[:6]).tolist(),
        }


# geometric lemma -------------------------------------------------------------------
def sym_vec(R):
    """(..., 3, 3) symmetric matrices to 6-vectors (diagonal then off-diagonal)."""
    R = np.asarray(R)
    return np.stack([R[..., i, j] for i, j in SYM_PAIRS], axis=-1)


def vec_sym(v):
    v = np.asarray(v)
    out = np.empty(v.shape[:-1] + (3, 3), v.dtype)
    for c, (i, j) in enumerate(SYM_PAIRS):
        out[..., i, j] = v[..., c]
        out[..., j, i] = v[..., c]
    return out


def frob_from_vec(v):
    v = np.asarray(v)
    return np.sqrt((v[..., :3] ** 2).sum(-1) + 2.0 * (v[..., 3:] ** 2).sum(-1))


class GammaSolver:
    """Exact coefficients of R in the basis {s (I - xi xi) : xi positive}.

    ``scale`` multiplies every basis matrix and moves the expansion centre to
    ``scale * I``; the certified radius scales by the same factor.
    """

    def __init__(self, dirs=None, scale=1.0):
        self.dirs = dirs or DirectionSet()
        self.scale = float(scale)
        xi = self.dirs.directions[:6]
        self.basis = self.scale * (np.eye(3)[None] - np.einsum("ni,nj->nij", xi, xi))
        self.matrix = sym_vec(self.basis).T
        self.inverse = np.linalg.inv(self.matrix)
        self.condition = float(np.linalg.cond(self.matrix))

    def coefficients(self, R):
        """c with R = sum_xi c_xi basis_xi; R of shape (..., 3, 3)."""
        return sym_vec(R) @ self.inverse.T

    def coefficients_vec(self, v):
        return np.asarray(v) @ self.inverse.T

    def solve(self, R):
        """gamma for all 12 directions, gamma = sqrt(2 c), gamma(-xi) = gamma(xi)."""
        R = np.asarray(R, dtype=float)
        if not np.allclose(R, np.swapaxes(R, -1, -2), atol=1e-14, rtol=0):
            raise ValueError("R must be symmetric")
        c = self.coefficients(R)
        if np.any(c <= 0):
            raise OutsideGeometricBall(f"nonpositive coefficient {c.min():.3e}")
        g = np.sqrt(2.0 * c)
        return np.concatenate([g, g], axis=-1)

    def reconstruct(self, gamma):
        c = 0.5 * np.asarray(gamma)[..., :6] ** 2
        return np.einsum("...n,nij->...ij", c, self.basis)

    def residual(self, R, gamma=None):
        gamma = self.solve(R) if gamma is None else gamma
        return float(np.linalg.norm(self.reconstruct(gamma) - R, axis=(-2, -1)).max())

    def centre_coefficients(self):
        return self.coefficients(self.scale * np.eye(3))

    def dual_norms(self):
        """Norm of each coefficient functional dual to the Frobenius norm."""
        L = self.inverse
        return np.sqrt((L[:, :3] ** 2).sum(1) + 0.5 * (L[:, 3:] ** 2).sum(1))

    def certified_epsilon(self):
        """Radius around the centre on which every coefficient stays positive."""
        return float((self.centre_coefficients() / self.dual_norms()).min())


@dataclass
class EpsilonEstimate:
    value: float
    samples: int
    certified: float
    seed: int

    def to_dict(self):
        return {"value": self.value, "samples": self.samples, "certified": self.certified,
                "seed": self.seed}


def random_sym_unit(rng, count):
    """Uniform random directions in symmetric matrices, unit Frobenius norm (vec form)."""
    v = rng.standard_normal((count, 6))
    v[:, 3:] /= math.sqrt(2.0)
    return v / frob_from_vec(v)[:, None]


def estimate_epsilon_lambda(samples=20000, seed=0, solver=None, iters=60):
    """Bisection for the largest radius at which all sampled directions keep
    positive coefficients."""
    solver = solver or GammaSolver()
    rng = np.random.default_rng(seed)
    E = random_sym_unit(rng, samples)
    c0 = solver.centre_coefficients()
    LE = solver.coefficients_vec(E)

    def ok(rho):
        return bool(np.all(c0[None] + rho * LE > 0))

    lo, hi = 0.0, 1.0
    while ok(hi):
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return EpsilonEstimate(lo, samples, solver.certified_epsilon(), seed)


# Fejer intermittency and Beltrami flows ---------------------------------------
def _require(params, strict):
    bad = check_params(params)
    if bad and strict:
        raise ParamViolation(bad)
    return bad


def _frame_modes(dirs, idx, params):
    """Integer modes lam*sigma*(j1 xi + j2 A + j3 xi x A) and the multi-indices j."""
    ls = params.lam_sigma
    if ls.denominator != 1:
        raise NonIntegerModes(f"lam*sigma = {ls} is not an integer")
    ls = int(ls)
    r = params.r
    rng = np.arange(-r, r + 1)
    J = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), -1).reshape(-1, 3)
    frame = np.stack([dirs.directions[idx], dirs.A[idx], dirs.C[idx]])
    K = ls * (J @ frame)
    Ki = np.rint(K).astype(np.int64)
    if np.abs(K - Ki).max() > 1e-9:
        raise NonIntegerModes("lam*sigma times the frame vectors is not integral")
    return Ki, J


def fejer_weights(J, r):
    return np.prod(1.0 - np.abs(J) / (r + 1.0), axis=1)


def build_eta(xi_index, params, times, order=1, dirs=None, strict=True):
    """Intermittency field eta_xi as a TimeField with exact time jets.

    Negative directions reuse the field of their positive partner.
    """
    dirs = dirs or DirectionSet()
    _require(params, strict)
    base = xi_index % 6
    K, J = _frame_modes(dirs, base, params)
    w = fejer_weights(J, params.r)
    w = w / math.sqrt((w ** 2).sum())
    freq = float(params.lam_sigma) * params.mu * J[:, 0]
    jets = []
    for t in times:
        c = w * np.exp(1j * freq * t)
        jets.append([SpectralField.from_modes(K, c * (1j * freq) ** m, "scalar", real=True)
                     for m in range(order + 1)])
    return TimeField(times, jets)


def _mode_range(f):
    if f.nmodes == 0:
        return (0, 0)
    l1 = np.abs(f.modes).sum(axis=1)
    return (int(l1.min()), int(l1.max()))


@dataclass
class BuildingBlock:
    """eta_xi, the Beltrami wave data and the flow W_xi = eta_xi B_xi e^{i lam xi.x}."""

    xi_index: int
    xi: np.ndarray
    params: object
    eta: TimeField
    flow: TimeField
    B: np.ndarray
    k0: np.ndarray
    mode_support: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def lam(self):
        return self.params.lam

    def wave(self):
        """W_xi = B_xi e^{i lam xi.x} as a one-mode complex field."""
        return SpectralField.from_modes(self.k0[None], self.B[None, :], "vector", real=False)

    def wave_values(self, g):
        """Re(2 W_xi) at grid nodes, evaluated analytically."""
        x = g.nodes
        ph = (self.k0[0] * x[:, None, None] + self.k0[1] * x[None, :, None]
              + self.k0[2] * x[None, None, :])
        e = np.exp(1j * ph)
        return np.stack([2.0 * (self.B[c] * e).real for c in range(3)])


def _flow_from_eta(eta_field, B, k0):
    c = eta_field.coeffs[:, :1] * B[None, :]
    return shift(SpectralField(eta_field.keys, c, "vector", real=False), k0)


def build_flow(xi_index, params, times, order=1, dirs=None, strict=True):
    """Impulsed Beltrami flow for direction ``xi_index``."""
    dirs = dirs or DirectionSet()
    bad = list(_require(params, strict))
    k0f = params.lam * dirs.directions[xi_index]
    k0 = np.rint(k0f).astype(np.int64)
    if np.abs(k0f - k0).max() > 1e-9:
        raise NonIntegerModes("lam * xi is not integral")
    eta = build_eta(xi_index, params, times, order, dirs, strict)
    B = dirs.B[xi_index]
    flow = TimeField(times, [[_flow_from_eta(e, B, k0) for e in jet] for jet in eta.jets])
    lam = params.lam
    e0, w0 = eta.value(0), flow.value(0)
    sup = {"eta_l1": _mode_range(e0), "flow_l1": _mode_range(w0),
           "eta_bandwidth": e0.bandwidth, "flow_bandwidth": w0.bandwidth}
    if sup["eta_l1"][1] > 2 * lam:
        bad.append(f"eta modes reach |k|_1={sup['eta_l1'][1]} > 2 lam")
    if sup["flow_l1"][0] < lam / 4 or sup["flow_l1"][1] >= 3 * lam:
        bad.append(f"flow modes {sup['flow_l1']} leave [lam/4, 3 lam)")
    return BuildingBlock(xi_index, dirs.directions[xi_index], params, eta, flow, B, k0,
                         sup, bad)


def build_all(params, times, order=1, dirs=None, strict=True):
    dirs = dirs or DirectionSet()
    return [build_flow(i, params, times, order, dirs, strict) for i in range(12)]


# validators ------------------------------------------------------------------------------
def transport_residual(block):
    """max over samples of |(1/mu) d_t eta - (xi . grad) eta| / |eta| (coefficients)."""
    if block.xi_index >= 6:
        raise ValueError("the transport identity is stated for positive directions")
    worst = 0.0
    for i in range(len(block.eta)):
        e = block.eta.value(i)
        dt = block.eta.derivative(i, 1) * (1.0 / block.params.mu)
        adv = sum((derivative(e, a) * block.xi[a] for a in range(3)), SpectralField.zeros())
        res = dt - adv
        worst = max(worst, res.max_abs() / max(e.max_abs(), 1e-300))
    return worst


def eta_mean_square(block):
    """Per-sample mean of eta^2 (exact from coefficients)."""
    out = []
    for e in block.eta.samples:
        out.append(float((np.abs(e.coeffs[:, 0]) ** 2).sum()))
    return out


def div_flow_residual(block):
    """Relative divergence of W_xi; nonzero because eta varies along B_xi."""
    worst = 0.0
    for w in block.flow.samples:
        worst = max(worst, div(w).l2() / max(w.l2(), 1e-300))
    return worst


def div_wave_residual(block):
    return div(block.wave()).l2() / block.wave().l2()


def curl_wave_residual(block):
    W = block.wave()
    return (curl(W) - W * float(block.lam)).l2() / W.l2()


def pair_mean(block_a, block_b, sample=0):
    """Mean of W_a (x) W_b as a 3x3 complex matrix."""
    fa, fb = block_a.flow.value(sample), block_b.flow.value(sample)
    neg = pack(-fb.modes)
    common, ia, ib = np.intersect1d(fa.keys, neg, return_indices=True)
    if len(common) == 0:
        return np.zeros((3, 3), complex)
    return np.einsum("ni,nj->ij", fa.coeffs[ia], fb.coeffs[ib])


def pair_mean_residual(blocks):
    """max |mean(W_xi (x) W_-xi) - B_xi (x) B_-xi| over directions and samples."""
    worst = 0.0
    for i, b in enumerate(blocks):
        bp = blocks[DirectionSet.partner(i)]
        target = np.outer(b.B, bp.B)
        for s in range(len(b.flow)):
            worst = max(worst, float(np.abs(pair_mean(b, bp, s) - target).max()))
    return worst


def product_support(block_a, block_b, sample=0):
    """l1 range of the modes of W_a (x) W_b."""
    ma, mb = block_a.flow.value(sample).modes, block_b.flow.value(sample).modes
    s = np.unique(pack((ma[:, None, :] + mb[None, :, :]).reshape(-1, 3)))
    l1 = np.abs(unpack(s)).sum(axis=1)
    return int(l1.min()), int(l1.max())


def product_support_report(blocks):
    """Pairs xi != -xi' whose product leaves [lam/10, 4 lam)."""
    lam = blocks[0].lam
    bad, lo, hi = [], np.inf, 0
    for i in range(12):
        for j in range(12):
            if j == DirectionSet.partner(i):
                continue
            a, b = product_support(blocks[i], blocks[j])
            lo, hi = min(lo, a), max(hi, b)
            if a < lam / 10 or b >= 4 * lam:
                bad.append((i, j, a, b))
    return {"l1_min": int(lo), "l1_max": int(hi), "violations": bad,
            "ok": not bad}


def representation_residual(blocks, R, solver=None, sample=0):
    """|sum over all xi of (1/2) gamma^2 mean(W_xi (x) W_-xi) - R| (Frobenius)."""
    solver = solver or GammaSolver()
    gamma = solver.solve(R)
    acc = np.zeros((3, 3), complex)
    for i, b in enumerate(blocks):
        acc += 0.5 * gamma[i] ** 2 * pair_mean(b, blocks[DirectionSet.partner(i)], sample)
    return float(np.linalg.norm(acc - R))


def reality_defect(blocks, coeffs, sample=0):
    """Imaginary size of sum a_xi W_xi for constant coefficients a."""
    acc = SpectralField.zeros("vector", real=False)
    for a, b in zip(coeffs, blocks):
        acc = acc + b.flow.value(sample) * a
    return acc.reality_defect()


def eta_min_on_grid(block, sample=0, g=None):
    e = block.eta.value(sample)
    g = g or Grid(fast_odd(2 * e.bandwidth + 1))
    return float(synthesize(e, g).min())


def validate_block(block, blocks=None):
    out = {"mean_eta_sq": eta_mean_square(block),
           "div_wave": div_wave_residual(block),
           "curl_wave": curl_wave_residual(block),
           "div_flow": div_flow_residual(block),
           "eta_min": eta_min_on_grid(block),
           "support": block.mode_support,
           "violations": list(block.violations)}
    if block.xi_index < 6:
        out["transport"] = transport_residual(block)
    return out


# norm scalings ------------------------------------------------------------------------------
@dataclass
class ScalingRow:
    params: dict
    measured: float
    predicted_ratio: float
    measured_ratio: float
    flagged: bool


def _eta_norm(params, N, M, p, alpha, xi_index):
    eta = build_eta(xi_index, params, [0.0], order=M, strict=False)
    f = eta.derivative(0, M)
    if N:
        # |grad^N f| via the Frobenius norm over all index tuples
        from .norms import default_grid, gradient_tensor_norm
        return gradient_tensor_norm(f, N, p if p is not None else 1.0, default_grid(f))
    if alpha is not None:
        return luxemburg_norm(f, alpha)
    return lp_norm(f, p)


def _predicted(params, N, M, p, alpha):
    ls = float(params.lam_sigma)
    r = params.r
    val = (ls * r) ** N * (ls * r * params.mu) ** M
    if alpha is not None:
        return val * r ** -1.5 * math.log(params.lam) ** alpha
    return val * r ** (1.5 - 3.0 / p)


def verify_norm_scalings(param_sets, N=0, M=0, p=None, alpha=None, xi_index=0, factor=4.0):
    """Measured eta norms against the predicted scaling, relative to the first set."""
    if len(param_sets) < 2:
        raise ValueError("need at least two parameter sets")
    if (p is None) == (alpha is None):
        raise ValueError("give exactly one of p or alpha")
    rows = []
    base_m = base_p = None
    for ps in param_sets:
        m = _eta_norm(ps, N, M, p, alpha, xi_index)
        pr = _predicted(ps, N, M, p, alpha)
        if base_m is None:
            base_m, base_p = m, pr
        mr, prr = m / base_m, pr / base_p
        rows.append(ScalingRow(ps.to_dict(), m, prr, mr,
                               not (prr / factor <= mr <= prr * factor)))
    return rows
