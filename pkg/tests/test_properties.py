"""Property-based checks of the product, multiplier and norm algebra."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from convexflow.multipliers import apply, symbol_grad_power, symbol_log
from convexflow.norms import lp_norm, luxemburg_norm, parseval_l2
from convexflow.spectral import multiply

from conftest import random_field

seeds = st.integers(0, 2 ** 32 - 1)
scalars = st.floats(-3, 3, allow_nan=False)
SETTINGS = settings(max_examples=25, deadline=None)


def _field(seed, rank="scalar", K=3, n=6):
    return random_field(np.random.default_rng(seed), K, rank, n)


@SETTINGS
@given(seeds, seeds, seeds, scalars, scalars)
def test_product_bilinear(s1, s2, s3, a, b):
    f, g, h = _field(s1), _field(s2), _field(s3, "vector")
    lhs = multiply(f * a + g * b, h)
    rhs = multiply(f, h) * a + multiply(g, h) * b
    assert lhs.allclose(rhs, atol=1e-12 * max(1.0, lhs.max_abs()))


@SETTINGS
@given(seeds, seeds)
def test_product_commutes(s1, s2):
    f, g = _field(s1, "vector"), _field(s2, "vector")
    assert multiply(f, g, kind="dot").allclose(multiply(g, f, kind="dot"), atol=1e-13)
    fg = multiply(f, g, kind="cross")
    assert fg.allclose(multiply(g, f, kind="cross") * -1.0, atol=1e-13)


@SETTINGS
@given(seeds, seeds, st.sampled_from(["scalar", "dot", "outer", "cross"]))
def test_sparse_matches_dense(s1, s2, kind):
    f = _field(s1, "scalar" if kind == "scalar" else "vector")
    g = _field(s2, "vector")
    s = multiply(f, g, kind=kind, route="sparse")
    d = multiply(f, g, kind=kind, route="dense")
    assert s.allclose(d, atol=1e-12)


@SETTINGS
@given(seeds)
def test_square_mean_is_l2(s1):
    f = _field(s1)
    p = multiply(f, f)
    # the mean of f^2 is the squared L2 norm
    assert p.real
    assert np.isclose(p.coeff((0, 0, 0))[0].real, parseval_l2(f) ** 2, rtol=1e-12)


@SETTINGS
@given(seeds, st.floats(3, 20))
def test_multipliers_compose(s1, beta):
    f = _field(s1, K=4, n=8)
    a, b = symbol_log(beta), symbol_grad_power(1.5)
    two = apply(b, apply(a, f))
    one = apply(b * a, f)
    assert one.allclose(two, atol=1e-12 * max(1.0, two.max_abs()))


@SETTINGS
@given(seeds, scalars)
def test_norm_homogeneous(s1, c):
    f = _field(s1, K=2, n=4)
    for p in (1.0, 2.0, np.inf):
        assert np.isclose(lp_norm(f * c, p), abs(c) * lp_norm(f, p), rtol=1e-10, atol=1e-14)


@SETTINGS
@given(seeds, seeds)
def test_norm_triangle(s1, s2):
    f, g = _field(s1, K=2, n=4), _field(s2, K=2, n=4)
    for p in (1.0, 1.5, 2.0):
        assert lp_norm(f + g, p) <= lp_norm(f, p) + lp_norm(g, p) + 1e-12


@SETTINGS
@given(seeds)
def test_luxemburg_zero_is_l1(s1):
    f = _field(s1, K=2, n=4)
    assert np.isclose(luxemburg_norm(f, 0.0), lp_norm(f, 1), rtol=1e-9)
