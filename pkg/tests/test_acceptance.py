"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every criterion builds a JSON-serialisable report; the determinism check
reruns them at 8 FFT threads and compares the serialised bytes.  Timings are
checked but kept out of the reports.
"""
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from convexflow.blocks import (GammaSolver, build_all, estimate_epsilon_lambda,
                               product_support_report, random_sym_unit, validate_block,
                               vec_sym)
from convexflow.iteration import run_iteration
from convexflow.multipliers import (fejer_kernel, fit_exponents, kernel_table, symbol_inv_l1,
                                    tail_multiplier_norm)
from convexflow.norms import lp_norm, luxemburg_norm
from convexflow.params import constraint_system, desk_params, feasibility
from convexflow.spectral import (Grid, SpectralField, div, fast_odd, multiply, set_threads,
                                 tensor_to_full, trace)
from convexflow.step import (anti_divergence, bootstrap, build_amplitudes, build_cutoffs,
                             cross_validate, recover_residual, shear_flow, verify_approx)

from conftest import DESK_TIMES, random_field

LINES = []


def _report(num, name, ok, detail, seconds, limit):
    within = limit is None or seconds < limit
    status = "PASS" if ok and within else "FAIL"
    line = f"{status} criterion {num:2d} {name}: {detail}; {seconds:.2f}s"
    if limit is not None:
        line += f" (limit {limit:g}s)"
    LINES.append(line)
    print(line)
    return ok and within


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


# criterion bodies: each returns (report, ok, detail) ----------------------------------
def c1_geometry():
    solver = GammaSolver()
    eps = estimate_epsilon_lambda(2000, 0, solver).value
    rng = np.random.default_rng(0)
    E = random_sym_unit(rng, 1000)
    rad = rng.uniform(0.0, eps / 2, 1000)
    Rs = np.eye(3)[None] + rad[:, None, None] * vec_sym(E)
    res = solver.residual(Rs)
    gid = solver.solve(np.eye(3))
    gerr = float(np.abs(gid - math.sqrt(0.5)).max())
    ok = res < 1e-12 and gerr < 1e-12
    rep = {"epsilon_estimate": eps, "residual": res, "gamma_identity_error": gerr}
    return rep, ok, f"residual {res:.2e}, gamma(I) error {gerr:.2e}"


def c2_kernels():
    fejer = []
    ok_f = True
    for r in (2, 4, 8, 16):
        k = fejer_kernel(r)
        expect = (2 * r * r + 4 * r + 3) / (3 * (r + 1))
        e1, e2 = abs(k.l1_norm - 1.0), abs(k.l2_norm ** 2 - expect)
        ok_f &= e1 < 1e-10 and e2 < 1e-10
        fejer.append({"r": r, "l1_error": e1, "l2_sq_error": e2})
    reps = kernel_table([4, 8, 16, 32, 64])
    b = reps[-1].fitted_exponents[1]
    ok_b = 2.3 <= b <= 3.7
    rep = {"fejer": fejer, "dirichlet_l1": [r.l1_norm for r in reps], "log_exponent": b}
    worst = max(max(f["l1_error"], f["l2_sq_error"]) for f in fejer)
    return rep, ok_f and ok_b, (f"Fejer worst error {worst:.1e}; Dirichlet log-exponent "
                                f"{b:.3f} (band [2.3, 3.7])")


def c3_blocks():
    p = desk_params()
    blocks = build_all(p, DESK_TIMES[:1], order=1)
    vals = [validate_block(b) for b in blocks]
    trans = max(v["transport"] for v in vals if "transport" in v)
    eta = max(abs(m - 1.0) for v in vals for m in v["mean_eta_sq"])
    divw = max(v["div_flow"] for v in vals)
    curl = max(v["curl_wave"] for v in vals)
    prod = product_support_report(blocks)
    point1 = sum(len(v["violations"]) for v in vals)
    ok = trans < 1e-11 and eta < 1e-10 and divw < 1e-11 and curl < 1e-12
    rep = {"transport": trans, "mean_eta_sq_error": eta, "div_flow": divw, "curl_wave": curl,
           "div_wave": max(v["div_wave"] for v in vals), "point1_violations": point1,
           "product_support": [prod["l1_min"], prod["l1_max"]],
           "product_violations": len(prod["violations"])}
    return rep, ok, (f"transport {trans:.1e}, mean eta^2 {eta:.1e}, div W {divw:.3f}, "
                     f"curl {curl:.1e}, product l1 range {rep['product_support']} with "
                     f"{rep['product_violations']} violations")


def c4_antidiv():
    rng = np.random.default_rng(4)
    worst_div = worst_tr = 0.0
    sym = True
    for i in range(100):
        u = random_field(rng, 1 + i % 6, "vector", 4 + i % 9)
        R = anti_divergence(u)
        mean = SpectralField.from_dict({(0, 0, 0): u.coeff((0, 0, 0))}, "vector")
        worst_div = max(worst_div, (div(R) - (u - mean)).max_abs())
        worst_tr = max(worst_tr, trace(R).max_abs() if R.nmodes else 0.0)
        F = tensor_to_full(R)
        sym &= all(np.array_equal(F.coeffs[:, 3 * a + b], F.coeffs[:, 3 * b + a])
                   for a in range(3) for b in range(3))
    ok = worst_div < 1e-12 and worst_tr < 1e-13 and sym
    rep = {"div_error": worst_div, "trace": worst_tr, "symmetric": sym}
    return rep, ok, f"div error {worst_div:.1e}, trace {worst_tr:.1e}, symmetric {sym}"


def c5_recover():
    rng = np.random.default_rng(5)
    from test_step import stress_field
    Rq = stress_field(rng, scale=0.002)
    delta = 0.1
    cut = build_cutoffs(Rq, delta)
    amp = build_amplitudes(Rq, cut, delta, K_a=14)
    res = recover_residual(amp, Rq, cut, delta)
    rep = {"residual": res, "K_a": 14, "projection_error": amp.report["projection_error"]}
    return rep, res < 1e-8, f"pointwise residual {res:.2e} at amplitude bandwidth 14"


def c6_step(result=None):
    p = desk_params()
    state = bootstrap(shear_flow(DESK_TIMES))
    if result is None:
        result = run_iteration(state, n_steps=1, params_list=[p])
    new = result.states[-1]
    rec = result.records[0]
    l2 = verify_approx(new, p, l1=False).l2
    xv = cross_validate(new, p)
    ok = max(l2) < 1e-7 and rec.containment["ok"] and xv < 1e-9
    rep = {"residual_l2": l2, "containment": rec.containment, "cross_validation": xv,
           "R_out_l1": rec.R_out_l1}
    return rep, ok, (f"max residual {max(l2):.2e}, containment {rec.containment['ok']}, "
                     f"cross-validation {xv:.1e}")


def c7_feasibility():
    def interior(cert):
        y, z = (Fraction(v) for v in cert.witness)
        return all(a * y + c * z > b for a, c, b in constraint_system(cert.beta))

    low, eps_up, high = feasibility(14.5), feasibility(14.5 + 1e-6), feasibility(15.0)
    ok = (not low.feasible and eps_up.feasible and high.feasible and interior(eps_up)
          and interior(high))
    rep = {"14.5": low.to_dict(), "14.500001": eps_up.to_dict(), "15": high.to_dict()}
    return rep, ok, (f"beta=14.5 feasible {low.feasible}, 14.5+1e-6 {eps_up.feasible}, "
                     f"15 {high.feasible} witness {[round(float(v), 4) for v in high.witness]}")


def c8_tails():
    Ns = [8, 16, 32, 64, 128]
    vals = [tail_multiplier_norm(symbol_inv_l1(), N) for N in Ns]
    a, b = fit_exponents(Ns, vals, model="power_log")
    dec = all(y < x for x, y in zip(vals, vals[1:]))
    ok = dec and -1.4 <= a <= -0.6 and 2 <= b <= 4
    rep = {"N": Ns, "values": vals, "a": a, "b": b}
    return rep, ok, f"decreasing {dec}, a {a:.3f} (band [-1.4, -0.6]), b {b:.3f} (band [2, 4])"


def _corpus():
    rng = np.random.default_rng(9)
    fields = [random_field(rng, 1 + i % 5, nmodes=3 + i % 7) for i in range(20)]
    blocks = build_all(desk_params(), DESK_TIMES[:1], order=0)
    fields += [blocks[x].eta.value(0) for x in range(0, 6, 2)]
    return fields


def c9_orlicz():
    corpus = _corpus()
    lux0 = 0.0
    for f in corpus:
        l1 = lp_norm(f, 1)
        lux0 = max(lux0, abs(luxemburg_norm(f, 0.0) - l1) / l1)
    rng = np.random.default_rng(99)
    worst = 0.0
    for i in range(100):
        f = random_field(rng, 1 + i % 3, nmodes=2 + i % 4)
        g = random_field(rng, 1 + i % 4, nmodes=3 + i % 5)
        grid = Grid(fast_odd(2 * (f.bandwidth + g.bandwidth) + 1))
        alpha = (0.5, 1.0, 2.0)[i % 3]
        lhs = luxemburg_norm(multiply(f, g), alpha, grid)
        rhs = lp_norm(f, np.inf, grid) * luxemburg_norm(g, alpha, grid)
        worst = max(worst, lhs / rhs)
    ok = lux0 < 1e-9 and worst <= 1 + 1e-8
    rep = {"luxemburg0_vs_l1": lux0, "product_ratio_max": worst, "corpus": len(corpus)}
    return rep, ok, f"alpha=0 vs L1 {lux0:.1e}; worst product ratio {worst:.6f} (<= 1+1e-8)"


CRITERIA = {
    1: ("geometric lemma", c1_geometry, 1.0),
    2: ("Fejer/Dirichlet norms", c2_kernels, 60.0),
    3: ("building-block identities", c3_blocks, 60.0),
    4: ("anti-divergence", c4_antidiv, 10.0),
    5: ("oscillation identity", c5_recover, 60.0),
    6: ("one-step consistency", c6_step, 600.0),
    7: ("feasibility certificate", c7_feasibility, 1.0),
    8: ("multiplier tails", c8_tails, 300.0),
    9: ("Orlicz norms", c9_orlicz, 60.0),
}

_cache = {}


def _serial(rep):
    return json.dumps(rep, sort_keys=True, default=str).encode()


def _evaluate(num, *args):
    if num not in _cache:
        (rep, ok, detail), secs = _timed(CRITERIA[num][1], *args)
        _cache[num] = (rep, ok, detail, secs)
    return _cache[num]


def _check(num, *args):
    name, _, limit = CRITERIA[num]
    set_threads(1)
    rep, ok, detail, secs = _evaluate(num, *args)
    assert _report(num, name, ok, detail, secs, limit), detail


def test_criterion_01_geometric_lemma():
    _check(1)


def test_criterion_02_kernel_norms():
    _check(2)


def test_criterion_03_building_blocks():
    _check(3)


def test_criterion_04_anti_divergence():
    _check(4)


def test_criterion_05_oscillation_identity():
    _check(5)


@pytest.mark.slow
def test_criterion_06_one_step(desk_run):
    # the session run already holds the step; its bootstrap time is part of the budget
    name, _, limit = CRITERIA[6]
    set_threads(1)
    if 6 not in _cache:
        (rep, ok, detail), secs = _timed(c6_step, desk_run["result"])
        _cache[6] = (rep, ok, detail, secs + desk_run["seconds"])
    rep, ok, detail, secs = _cache[6]
    assert _report(6, name, ok, detail, secs, limit), detail


def test_criterion_07_feasibility():
    _check(7)


def test_criterion_08_multiplier_tails():
    _check(8)


def test_criterion_09_orlicz():
    _check(9)


@pytest.mark.slow
def test_criterion_10_determinism(desk_run):
    one = {}
    for num in CRITERIA:
        if num == 6:
            if 6 not in _cache:
                _cache[6] = (*c6_step(desk_run["result"]), desk_run["seconds"])
        else:
            _evaluate(num)
        one[num] = _serial(_cache[num][0])
    t0 = time.perf_counter()
    set_threads(8)
    try:
        eight = {num: _serial(CRITERIA[num][1]()[0]) for num in CRITERIA}
    finally:
        set_threads(1)
    differ = [n for n in CRITERIA if one[n] != eight[n]]
    detail = ("all reports byte-identical at 1 and 8 threads" if not differ
              else f"reports differ for criteria {differ}")
    assert _report(10, "determinism", not differ, detail, time.perf_counter() - t0, None), detail
