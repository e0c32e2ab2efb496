"""Multi-step driver, per-row stress diagnostics and trend measurements.

Consistency (ApproxEq residual, invariants, support containment) is a hard
check; smallness of the produced stresses is only measured and reported.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import GammaSolver, build_flow
from .multipliers import apply, symbol_grad_power, symbol_log
from .norms import lp_norm, multi_indices, spatial_derivative
from .spectral import (Grid, SpectralField, fast_odd, grad, multiply, project_nonzero,
                       symmetrize, synthesize)
from .step import (ROWS, _two_re, anti_divergence, one_step, support_containment,
                   verify_approx)


def delta_schedule(delta1, eps, q):
    """delta_1 = ||R_0||, then delta_q = eps 2^-q."""
    return float(delta1) if q <= 1 else float(eps) * 2.0 ** (-q)


def sup_l1(tf, known=None):
    """L^inf_t L^1_x of a TimeField; ``known`` may hold precomputed per-sample values."""
    if known is not None:
        return float(max(known, default=0.0))
    return max((lp_norm(f, 1) for f in tf.samples if f.nmodes), default=0.0)


def increment_norms(w, beta):
    """(L^inf_t L^2_x of w, L^inf_t L^1_x of |grad|^{3/2} T_M w)."""
    op_log, op_grad = symbol_log(beta), symbol_grad_power(1.5)
    l2, frac = 0.0, 0.0
    for f in w.samples:
        if f.nmodes == 0:
            continue
        l2 = max(l2, f.l2())
        frac = max(frac, lp_norm(apply(op_grad, apply(op_log, f)), 1))
    return l2, frac


@dataclass
class StepRecord:
    q: int
    delta: float
    params: dict
    R_in_l1: float
    R_out_l1: float
    dv_l2: float
    dv_frac_l1: float
    dv_ratio: float
    support_v: list
    support_R: list
    residual_l2: float
    containment: dict
    invariants: dict
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class IterationResult:
    states: list
    records: list
    artifacts: list

    def to_dict(self):
        return {"steps": [r.to_dict() for r in self.records]}


def _support(tf):
    s = tf.time_support()
    return None if s is None else [float(s[0]), float(s[1])]


def run_iteration(initial, eps=None, n_steps=1, params_list=(), K_a=None, tol=1e-7,
                  check=True, diagnostics=True, solver=None):
    """Apply ``n_steps`` perturbation steps starting from ``initial``.

    The cutoff scale of step q (producing R_{q+1}) is delta_{q+1} from
    :func:`delta_schedule` with delta_1 = ||R_0||_{L^inf L^1}; ``eps``
    defaults to delta_1.
    """
    solver = solver or GammaSolver()
    params_list = list(params_list)
    if len(params_list) < n_steps:
        raise ValueError("one ParamSet per step is required")
    delta1 = sup_l1(initial.R)
    eps = delta1 if eps is None else eps
    states, records, arts = [initial], [], []
    state = initial
    for q in range(n_steps):
        p = params_list[q]
        delta = delta_schedule(delta1, eps, q + 1)
        R_in = delta1 if q == 0 else records[-1].R_out_l1
        if R_in == 0.0:
            new, art, parts = state, None, None
            w_l2 = w_frac = 0.0
        else:
            new, art, parts, _ = one_step(state, p, delta, K_a=K_a, solver=solver, tol=tol,
                                          check=check)
            w_l2, w_frac = increment_norms(parts.w, p.beta)
        rep = verify_approx(new, p, l1=False)
        rec = StepRecord(
            q=q, delta=delta, params=p.to_dict(), R_in_l1=R_in,
            R_out_l1=sup_l1(new.R, None if art is None else art.r1_l1),
            dv_l2=w_l2, dv_frac_l1=w_frac,
            dv_ratio=w_l2 / math.sqrt(delta) if delta > 0 else 0.0,
            support_v=_support(new.v), support_R=_support(new.R),
            residual_l2=rep.max_l2,
            containment=support_containment(state, new, delta),
            invariants=new.invariants())
        if diagnostics and art is not None:
            rec.diagnostics = diagnostics_rq1(art, parts, state, p, delta)
        states.append(new)
        records.append(rec)
        arts.append(art)
        state = new
    return IterationResult(states, records, arts)


# per-row diagnostics ---------------------------------------------------------------
def amplitude_constant(amp, N):
    """C_a(N): max over directions of the C^N seminorm of a_xi.

    Time derivatives come only from the stored jets.
    """
    best = 0.0
    for tf in amp.a:
        order = min(N, tf.order)
        for i in range(len(tf)):
            for mt in range(order + 1):
                base = tf.derivative(i, mt)
                if base.nmodes == 0:
                    continue
                g = Grid(fast_odd(4 * max(base.bandwidth, 1) + 1))
                for ms in range(N - mt + 1):
                    for alpha in multi_indices(ms):
                        d = spatial_derivative(base, alpha)
                        if d.nmodes:
                            best = max(best, float(np.abs(synthesize(d, g)).max()))
    return best


def symbolic_bounds(params, delta, Ca, v_sup=0.0):
    """Model value of each row's estimate, implied constants set to 1."""
    lam, sigma, r, mu = float(params.lam), float(params.sigma), float(params.r), params.mu
    beta, s = params.beta, params.s
    L = math.log(lam)
    X = 1.0 / lam + sigma * r + r ** 1.5 / mu
    ls = math.log(lam * sigma)
    return {
        "corrector": Ca[1] * X * (X + math.sqrt(delta) + (lam * sigma) ** -0.5),
        "linear_transport": Ca[0] * v_sup * r ** (1.5 - 3.0 / s),
        "linear_time": Ca[1] * sigma * mu * r ** -0.5 * L,
        "dissipation_pc": Ca[2] * (lam / r) ** 1.5 * L ** (4.0 - beta),
        "dissipation_t": Ca[2] * (lam * sigma * r) ** 1.5 / mu * L,
        "oscillation_e1": Ca[5] * ls ** 3 / (lam * sigma) * L ** 2,
        "oscillation_first": Ca[5] * L ** 5 * sigma * r,
        "oscillation_time": Ca[5] * L ** 2 / mu,
        "recovery_defect": None,
    }


def diagnostics_rq1(art, parts, state, params, delta):
    """Measured L^inf_t L^1_x of each stress row next to its bound.

    Two rows also get a measured bound: Cauchy-Schwarz for the corrector and
    Holder with s = 3/2 for the linear transport term.  The sum of rows is
    checked against the norm of their sum.
    """
    Ca = {N: amplitude_constant(parts.amp, N) for N in (0, 1, 2, 5)}
    cs, hold, vsup = 0.0, 0.0, 0.0
    for i in range(len(art.times)):
        wp = parts.wp.value(i)
        y = parts.wc.value(i) + parts.wt.value(i)
        if wp.nmodes == 0 and y.nmodes == 0:
            continue
        cs = max(cs, (2.0 * wp.l2() + y.l2()) * y.l2())
        v = state.v.value(i)
        if v.nmodes:
            vinf = lp_norm(v, np.inf)
            vsup = max(vsup, vinf)
            hold = max(hold, 2.0 * vinf * lp_norm(parts.w.value(i), params.s))
    model = symbolic_bounds(params, delta, Ca, vsup)
    measured = {"corrector": cs, "linear_transport": hold}
    table = []
    for name in ROWS:
        vals = [r["l1"] for r in art.rows[name]]
        table.append({"row": name, "measured": float(max(vals, default=0.0)),
                      "measured_bound": measured.get(name), "model_bound": model[name]})
    total = [sum(art.rows[name][i]["l1"] for name in ROWS) for i in range(len(art.times))]
    ok = all(t >= r1 - 1e-9 * max(1.0, r1) for t, r1 in zip(total, art.r1_l1))
    table.append({"row": "sum_of_rows", "measured": float(max(total, default=0.0)),
                  "norm_of_sum": float(max(art.r1_l1, default=0.0)), "triangle_ok": ok,
                  "C_a": {str(k): v for k, v in Ca.items()}})
    return table


# trend measurement -------------------------------------------------------------------
def default_trend_amplitude():
    """A fixed smooth amplitude 1 + cos(x1)/2 + sin(x2)/4 + cos(x3)/8."""
    return SpectralField.from_dict({
        (0, 0, 0): 1.0, (1, 0, 0): 0.25, (-1, 0, 0): 0.25,
        (0, 1, 0): -0.125j, (0, -1, 0): 0.125j, (0, 0, 1): 0.0625, (0, 0, -1): 0.0625})


def oscillation_trend(params, amplitude=None, sample_time=0.0, l1=True):
    """Norms of R P_{!=0}(grad(a^2) . (Y_xi (x) Y_xi' + Y_xi' (x) Y_xi)) summed over
    distinct non-opposite positive directions, with Y = 2 Re W.

    This is the first-case oscillation remainder with the derivative on the
    amplitude, for a fixed model amplitude; it should shrink as lam grows.
    """
    a = default_trend_amplitude() if amplitude is None else amplitude
    ga2 = grad(multiply(a, a))
    Y = [_two_re(build_flow(x, params, [sample_time], order=0).flow.value(0)) for x in range(6)]
    total = SpectralField.zeros("vector")
    for i in range(6):
        for j in range(i + 1, 6):
            S = symmetrize(multiply(Y[i], Y[j], kind="outer")) * 2.0
            total = total + multiply(S, ga2, kind="contract")
    R = anti_divergence(project_nonzero(total))
    out = {"lam": params.lam, "sigma": str(params.sigma), "l2": R.l2(), "bandwidth": R.bandwidth}
    if l1:
        out["l1"] = lp_norm(R, 1, Grid(fast_odd(2 * R.bandwidth + 1)))
    return out


def trend_table(param_sets, amplitude=None, l1=True):
    rows = [oscillation_trend(p, amplitude, l1=l1) for p in param_sets]
    key = "l1" if l1 else "l2"
    dec = all(b[key] < a[key] for a, b in zip(rows, rows[1:]))
    return {"rows": rows, "decreasing": dec}
