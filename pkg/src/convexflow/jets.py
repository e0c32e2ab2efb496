"""Truncated Taylor arithmetic in time on numpy arrays.

A :class:`Jet` holds normalised Taylor coefficients ``c[m] = f^(m) / m!``
of a function of time, each an array over spatial points.  Sums, products
and compositions with smooth scalar maps are exact up to the stored order,
which is how amplitude fields obtain exact time derivatives.
"""
import math

import numpy as np


class Jet:
    def __init__(self, coeffs):
        self.c = [np.asarray(x, dtype=float) for x in coeffs]

    @classmethod
    def from_derivs(cls, derivs):
        return cls([d / math.factorial(m) for m, d in enumerate(derivs)])

    @classmethod
    def constant(cls, value, order, like=None):
        value = np.asarray(value, dtype=float)
        if like is not None:
            value = np.broadcast_to(value, np.shape(like)).astype(float)
        return cls([value] + [np.zeros_like(value) for _ in range(order)])

    @property
    def order(self):
        return len(self.c) - 1

    @property
    def value(self):
        return self.c[0]

    def derivs(self):
        return [x * math.factorial(m) for m, x in enumerate(self.c)]

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        n = min(self.order, o.order)
        return Jet([self.c[m] + o.c[m] for m in range(n + 1)])

    __radd__ = __add__

    def __neg__(self):
        return Jet([-x for x in self.c])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([x * other for x in self.c])
        n = min(self.order, other.order)
        out = []
        for m in range(n + 1):
            acc = self.c[0] * other.c[m]
            for j in range(1, m + 1):
                acc = acc + self.c[j] * other.c[m - j]
            out.append(acc)
        return Jet(out)

    __rmul__ = __mul__

    def compose(self, derivs_at):
        """F(self) given ``derivs_at(x0, order) -> [F(x0), F'(x0), ...]``."""
        n = self.order
        ders = derivs_at(self.c[0], n)
        delta = Jet([np.zeros_like(self.c[0])] + self.c[1:])
        out = Jet.constant(ders[0], n, like=self.c[0])
        power = Jet.constant(1.0, n, like=self.c[0])
        for m in range(1, n + 1):
            power = power * delta
            out = out + power * (ders[m] / math.factorial(m))
        return out

    def sqrt(self):
        return self.compose(_sqrt_derivs)


def _sqrt_derivs(x, n):
    out = [np.sqrt(x)]
    coef = 1.0
    for m in range(1, n + 1):
        coef *= 0.5 - (m - 1)
        out.append(coef * x ** (0.5 - m))
    return out


def poly_derivs(coeffs):
    """derivs_at callable for a polynomial with ascending ``coeffs``."""
    p = np.polynomial.Polynomial(coeffs)

    def derivs_at(x, n):
        out, q = [], p
        for _ in range(n + 1):
            out.append(q(x))
            q = q.deriv()
        return out

    return derivs_at
