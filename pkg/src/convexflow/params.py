"""Scheme parameters, their admissibility clauses, and the (y, z) feasibility system."""
import itertools
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import Infeasible


@dataclass(frozen=True)
class ParamSet:
    """Parameters of one iteration step.

    ``sigma`` is kept as a Fraction so the integrality clauses are exact.
    """

    lam: int
    sigma: Fraction
    r: int
    mu: float
    beta: float = 15.0
    theta: float = 1.25
    nu: float = 1.0
    delta_q: Optional[float] = None
    delta_q1: Optional[float] = None
    delta_q2: Optional[float] = None
    y: Optional[float] = None
    z: Optional[float] = None
    s: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "sigma", Fraction(self.sigma).limit_denominator(10 ** 12)
                           if not isinstance(self.sigma, Fraction) else self.sigma)

    @property
    def lam_sigma(self):
        return self.lam * self.sigma

    def to_dict(self):
        d = asdict(self)
        d["sigma"] = str(self.sigma)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["sigma"] = Fraction(str(d["sigma"]))
        return cls(**d)

    def with_(self, **kw):
        return replace(self, **kw)


def desk_params(**kw):
    """The desk-scale parameter set lambda=40, sigma=1/8, r=2, mu=64, beta=15."""
    base = dict(lam=40, sigma=Fraction(1, 8), r=2, mu=64.0, beta=15.0)
    base.update(kw)
    return ParamSet(**base)


def check_params(p, frame_integrality=True):
    """List of violated admissibility clauses (empty when valid)."""
    bad = []
    sr = p.sigma * p.r
    if not p.lam_sigma * p.r > 1:
        bad.append("lam*sigma*r > 1")
    if not sr < Fraction(1, 2):
        bad.append("sigma*r < 1/2")
    if p.lam_sigma.denominator != 1 or p.lam_sigma < 1:
        bad.append("sigma*lam in N")
    if not (p.r ** 1.5 < p.mu < p.lam ** 2):
        bad.append("r^(3/2) < mu < lam^2")
    if p.lam <= 0 or p.lam % 10 != 0:
        bad.append("lam in 10N*")
    if p.r <= 0 or p.r % 2 != 0:
        bad.append("r in 2N*")
    if frame_integrality and (p.lam_sigma.denominator != 1 or p.lam_sigma % 5 != 0):
        bad.append("lam*sigma in 5N (frame integrality)")
    return bad


# feasibility ------------------------------------------------------------------
CONSTRAINT_NAMES = ("z > -(3/2)y", "z + y/2 < -3", "y > 7", "(3/2)y + 4 - beta < 0",
                    "(3/2)y + z > 4")


def constraint_system(beta):
    """Rows (a_y, a_z, b) meaning a . (y, z) > b, in exact rationals."""
    b = Fraction(beta)
    h = Fraction(3, 2)
    return [(h, Fraction(1), Fraction(0)),
            (Fraction(-1, 2), Fraction(-1), Fraction(3)),
            (Fraction(1), Fraction(0), Fraction(7)),
            (-h, Fraction(0), 4 - b),
            (h, Fraction(1), Fraction(4))]


def _solve3(M, v):
    """Exact 3x3 solve by Cramer's rule; None when singular."""
    def det(A):
        return (A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1])
                - A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0])
                + A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]))
    d = det(M)
    if d == 0:
        return None
    out = []
    for c in range(3):
        A = [list(row) for row in M]
        for r in range(3):
            A[r][c] = v[r]
        out.append(det(A) / d)
    return out


def max_margin(rows):
    """Exact max t subject to a_i . x - b_i >= t; returns (t, (y, z)) or None."""
    best = None
    for trip in itertools.combinations(range(len(rows)), 3):
        M = [[rows[i][0], rows[i][1], Fraction(-1)] for i in trip]
        v = [rows[i][2] for i in trip]
        sol = _solve3(M, v)
        if sol is None:
            continue
        y, z, t = sol
        if all(a * y + c * z - b >= t for a, c, b in rows):
            if best is None or t > best[0]:
                best = (t, (y, z))
    return best


def _strict_ok(rows, y, z):
    fy, fz = Fraction(y), Fraction(z)
    return all(a * fy + c * fz > b for a, c, b in rows)


def analytic_center(rows, start, iters=100):
    """Maximise sum log(a_i . x - b_i) by damped Newton from a strict interior point."""
    A = np.array([[float(a), float(c)] for a, c, _ in rows])
    b = np.array([float(r[2]) for r in rows])
    x = np.array([float(start[0]), float(start[1])])

    def f(x):
        s = A @ x - b
        return -np.inf if np.any(s <= 0) else float(np.log(s).sum())

    for _ in range(iters):
        s = A @ x - b
        g = (A / s[:, None]).sum(axis=0)
        H = -(A[:, :, None] * A[:, None, :] / (s ** 2)[:, None, None]).sum(axis=0)
        step = -np.linalg.solve(H, g)
        lam2 = float(-g @ step)
        if lam2 < 1e-24:
            break
        tstep, f0 = 1.0, f(x)
        while f(x + tstep * step) < f0 + 0.25 * tstep * float(g @ step):
            tstep *= 0.5
            if tstep < 1e-16:
                break
        x = x + tstep * step
    return x


@dataclass
class FeasibilityCertificate:
    beta: float
    feasible: bool
    witness: Optional[tuple] = None
    margin: Optional[Fraction] = None
    violated: Optional[list] = None

    def to_dict(self):
        return {"beta": self.beta, "feasible": self.feasible,
                "witness": None if self.witness is None else [float(v) for v in self.witness],
                "margin": None if self.margin is None else str(self.margin),
                "margin_float": None if self.margin is None else float(self.margin),
                "violated": self.violated}


def feasibility(beta):
    """Decide the strict system exactly; return an interior witness when feasible."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    rows = constraint_system(beta)
    best = max_margin(rows)
    if best is not None and best[0] > 0:
        t, vertex = best
        x = analytic_center(rows, vertex)
        if not _strict_ok(rows, x[0], x[1]):
            x = (float(vertex[0]), float(vertex[1]))
            if not _strict_ok(rows, *x):
                x = vertex
        return FeasibilityCertificate(float(beta), True, (x[0], x[1]), t)
    conflict = None
    for size in range(2, len(rows) + 1):
        for sub in itertools.combinations(range(len(rows)), size):
            sb = max_margin([rows[i] for i in sub])
            if sb is not None and sb[0] <= 0:
                conflict = [CONSTRAINT_NAMES[i] for i in sub]
                break
        if conflict:
            break
    return FeasibilityCertificate(float(beta), False, None,
                                  None if best is None else best[0], conflict)


# planner ----------------------------------------------------------------------
def plan_params(lam, beta, y, z, theta=1.25, nu=1.0):
    """Evaluate the asymptotic parameter formulas and round to admissible values.

    Returns (ParamSet, deltas) where ``deltas`` holds raw values and rounding
    changes.  Raises Infeasible with the violated clauses when rounding
    cannot satisfy the admissibility conditions at this lam.
    """
    L = math.log(lam)
    sigma_raw = L ** 2 * math.log(L) ** 4 / lam
    r_raw = lam / L ** y
    mu_raw = lam ** 1.5 * L ** z
    m = max(1, round(lam * sigma_raw / 5))
    sigma = Fraction(5 * m, lam)
    r = max(2, 2 * round(r_raw / 2))
    mu = mu_raw
    lo, hi = r ** 1.5, float(lam) ** 2
    if mu <= lo:
        mu = math.floor(lo) + 1.0
    if mu >= hi:
        mu = hi - 1.0
    p = ParamSet(lam=int(lam), sigma=sigma, r=int(r), mu=float(mu), beta=float(beta),
                 theta=theta, nu=nu, y=float(y), z=float(z))
    deltas = {"sigma_raw": sigma_raw, "r_raw": r_raw, "mu_raw": mu_raw,
              "d_sigma": float(sigma) - sigma_raw, "d_r": r - r_raw, "d_mu": mu - mu_raw}
    bad = check_params(p)
    if bad:
        err = Infeasible(f"lam={lam}: " + "; ".join(bad))
        err.clauses = bad
        err.deltas = deltas
        err.params = p
        raise err
    return p, deltas
