import numpy as np
import pytest

from convexflow import kernels
from convexflow.errors import GridTooSmall, RankMismatch
from convexflow.spectral import (Grid, SpectralField, analyze, curl, derivative, div, dot,
                                 fast_odd, grad, inverse_laplacian, laplacian, leray_project,
                                 multiply, outer, pack, project_nonzero, project_shell,
                                 remove_trace, set_threads, shift, sym_outer, synthesize, trace,
                                 unpack)

from conftest import random_field


def sin_x1():
    return SpectralField.from_dict({(1, 0, 0): -0.5j, (-1, 0, 0): 0.5j})


class TestKeys:
    def test_pack_roundtrip(self, rng):
        m = rng.integers(-1000, 1001, size=(200, 3))
        assert np.array_equal(unpack(pack(m)), m)

    def test_pack_orders_lexicographically(self):
        m = np.array([[0, 0, 1], [0, 1, -5], [1, -9, -9], [-1, 9, 9]])
        keys = pack(m)
        assert list(np.argsort(keys)) == [3, 0, 1, 2]

    @pytest.mark.parametrize("m,expected", [(1, 1), (8, 9), (205, 225), (226, 243), (100, 105)])
    def test_fast_odd(self, m, expected):
        assert fast_odd(m) == expected


class TestField:
    def test_from_modes_sums_duplicates(self):
        f = SpectralField.from_modes([(1, 0, 0), (1, 0, 0)], [1.0, 2.0])
        assert f.nmodes == 1 and f.coeff((1, 0, 0))[0] == 3.0

    def test_zero_coefficients_dropped(self):
        f = SpectralField.from_modes([(1, 0, 0), (2, 0, 0)], [1.0, 0.0])
        assert f.nmodes == 1

    def test_bandwidth(self):
        f = SpectralField.from_dict({(3, -7, 1): 1.0, (-3, 7, -1): 1.0})
        assert f.bandwidth == 7 and f.l1_bandwidth == 11

    def test_rank_component_check(self):
        with pytest.raises(RankMismatch):
            SpectralField.from_modes([(0, 0, 0)], [[1.0, 2.0]], "vector")

    def test_add_merges_keys(self):
        a = SpectralField.from_dict({(1, 0, 0): 1.0, (-1, 0, 0): 1.0})
        b = SpectralField.from_dict({(0, 2, 0): 1.0, (0, -2, 0): 1.0})
        c = a + b - a
        assert c.allclose(b)

    def test_reality_defect(self):
        assert sin_x1().reality_defect() == 0.0
        g = SpectralField.from_dict({(1, 0, 0): 1.0}, real=False)
        assert g.reality_defect() == 1.0

    def test_l2_parseval(self):
        # ||cos x1||_2^2 = 1/2 under the normalised measure
        f = SpectralField.from_dict({(1, 0, 0): 0.5, (-1, 0, 0): 0.5})
        assert f.l2() == pytest.approx(np.sqrt(0.5), abs=1e-15)


class TestTransforms:
    def test_synthesize_sin(self):
        g = Grid(9)
        vals = synthesize(sin_x1(), g)
        x = g.nodes
        assert np.allclose(vals, np.sin(x)[:, None, None] * np.ones((9, 9, 9)), atol=1e-15)

    def test_nodes_start_at_minus_pi(self):
        assert Grid(5).nodes[0] == -np.pi

    def test_even_grid_rejected(self):
        with pytest.raises(ValueError):
            Grid(8)

    def test_roundtrip(self, rng):
        f = random_field(rng, 6, "vector", 30)
        g = Grid(15)
        back = analyze(synthesize(f, g), g, 6, rank="vector")
        assert back.allclose(f, atol=1e-13)

    def test_roundtrip_list_consume(self, rng):
        f = random_field(rng, 5, "tensor_sym", 20)
        g = Grid(11)
        vals = list(synthesize(f, g))
        back = analyze(vals, g, 5, rank="tensor_sym", real=True, consume=True)
        assert back.allclose(f, atol=1e-13)
        assert all(v is None for v in vals)

    def test_grid_too_small(self, rng):
        f = random_field(rng, 6)
        with pytest.raises(GridTooSmall):
            synthesize(f, Grid(11))
        with pytest.raises(GridTooSmall):
            analyze(np.zeros((11, 11, 11)), Grid(11), 6)

    def test_complex_field_roundtrip(self):
        f = SpectralField.from_dict({(1, 2, 0): 1.0 + 2.0j, (0, -1, 3): 0.5}, real=False)
        g = Grid(9)
        back = analyze(synthesize(f, g), g, 4, rank="scalar", real=False)
        assert back.allclose(f, atol=1e-14)


class TestProducts:
    def test_product_of_cosines(self):
        c1 = SpectralField.from_dict({(1, 0, 0): 0.5, (-1, 0, 0): 0.5})
        p = multiply(c1, c1)
        # cos^2 = 1/2 + cos(2x)/2
        assert p.coeff((0, 0, 0))[0] == pytest.approx(0.5, abs=1e-15)
        assert p.coeff((2, 0, 0))[0] == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("kind", ["scalar", "outer", "dot", "cross", "sym_outer"])
    def test_sparse_equals_dense(self, rng, kind):
        ra = "scalar" if kind == "scalar" else "vector"
        a = random_field(rng, 4, ra, 10)
        b = random_field(rng, 3, "vector", 10)
        if kind == "sym_outer":
            b = a
        s = multiply(a, b, kind=kind, route="sparse")
        d = multiply(a, b, kind=kind, route="dense")
        assert s.allclose(d, atol=1e-12)

    def test_product_matches_pointwise(self, rng):
        a, b = random_field(rng, 3, nmodes=8), random_field(rng, 3, nmodes=8)
        g = Grid(15)
        p = multiply(a, b)
        assert np.allclose(synthesize(p, g), synthesize(a, g) * synthesize(b, g), atol=1e-12)

    def test_backends_agree(self, rng):
        a, b = random_field(rng, 5, nmodes=20), random_field(rng, 5, "vector", 20)
        py = multiply(a, b, route="sparse", backend="python")
        if kernels.BACKEND == "cython":
            cy = multiply(a, b, route="sparse", backend="cython")
            assert np.array_equal(py.keys, cy.keys)
            assert np.allclose(py.coeffs, cy.coeffs, rtol=0, atol=1e-14)
        assert py.allclose(multiply(a, b, route="dense"), atol=1e-12)

    def test_sym_outer_symmetric_layout(self, rng):
        a, b = random_field(rng, 3, "vector", 6), random_field(rng, 3, "vector", 6)
        s = sym_outer(a, b)
        full = outer(a, b)
        assert s.rank == "tensor_sym"
        assert s.component(0, 1).allclose((full.component(0, 1) + full.component(1, 0)) * 0.5,
                                          atol=1e-13)

    def test_ambiguous_product(self, rng):
        a = random_field(rng, 2, "vector", 4)
        with pytest.raises(RankMismatch):
            multiply(a, a)

    def test_threads_do_not_change_results(self, rng):
        a = random_field(rng, 8, "vector", 40)
        set_threads(1)
        one = multiply(a, a, kind="dot", route="dense")
        set_threads(4)
        four = multiply(a, a, kind="dot", route="dense")
        set_threads(1)
        assert np.array_equal(one.keys, four.keys)
        assert np.array_equal(one.coeffs, four.coeffs)


class TestCalculus:
    def test_derivative_of_sin(self):
        d = derivative(sin_x1(), 0)
        assert d.allclose(SpectralField.from_dict({(1, 0, 0): 0.5, (-1, 0, 0): 0.5}))

    def test_laplacian_eigen(self):
        assert laplacian(sin_x1()).allclose(sin_x1() * -1.0)

    def test_inverse_laplacian(self, rng):
        f = random_field(rng, 4, mean=False)
        assert laplacian(inverse_laplacian(f)).allclose(f, atol=1e-14)

    def test_div_curl_zero(self, rng):
        f = random_field(rng, 5, "vector", 20)
        assert div(curl(f)).max_abs() < 1e-13

    def test_curl_grad_zero(self, rng):
        f = random_field(rng, 5, nmodes=20)
        assert curl(grad(f)).max_abs() < 1e-13

    def test_leray(self, rng):
        f = random_field(rng, 5, "vector", 20)
        p = leray_project(f)
        assert div(p).max_abs() < 1e-13
        assert leray_project(p).allclose(p, atol=1e-14)
        with pytest.raises(RankMismatch):
            leray_project(random_field(rng, 2))

    def test_project_shell_and_nonzero(self):
        f = SpectralField.from_dict({(0, 0, 0): 1.0, (1, 0, 0): 1.0, (1, 1, 0): 1.0})
        assert project_shell(f, 1, 1).nmodes == 1
        assert project_nonzero(f).mean()[0] == 0.0

    def test_trace_removal(self, rng):
        t = random_field(rng, 3, "tensor_sym", 6)
        tf, tr3 = remove_trace(t)
        assert trace(tf).max_abs() < 1e-15
        assert trace(t).allclose(tr3 * 3.0, atol=1e-15)

    def test_shift(self):
        f = shift(SpectralField.from_dict({(0, 0, 0): 1.0}), (2, 0, -1))
        assert f.modes.tolist() == [[2, 0, -1]] and not f.real

    def test_dot_of_unit(self):
        e = SpectralField.from_dict({(0, 0, 0): [1.0, 0.0, 0.0]}, "vector")
        assert dot(e, e).coeff((0, 0, 0))[0] == 1.0
