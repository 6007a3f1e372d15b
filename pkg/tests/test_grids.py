"""Differentiation backends, quadrature, interpolation."""

import numpy as np
import pytest

from kahlerflow.grids import (
    PeriodicChart,
    RadialGrid,
    barycentric_interp,
    cheb_diff2_matrix,
    cheb_diff_matrix,
    cheb_nodes,
    clenshaw_curtis_weights,
    cubic_interp,
    fd_central_weights,
)


def test_cheb_nodes_ascending():
    x = cheb_nodes(16)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)


def test_clenshaw_curtis_positive_sums_to_two():
    for n in (8, 16, 33, 64):
        w = clenshaw_curtis_weights(n)
        assert np.all(w > 0)
        assert abs(w.sum() - 2.0) < 1e-13


def test_clenshaw_curtis_exact_on_smooth():
    n = 32
    x = cheb_nodes(n)
    w = clenshaw_curtis_weights(n)
    # int_{-1}^{1} exp(x) dx = e - 1/e
    assert abs(w @ np.exp(x) - (np.e - 1.0 / np.e)) < 1e-13


def test_cheb_diff_exact_polynomials():
    x = cheb_nodes(24)
    d1 = cheb_diff_matrix(x)
    d2 = cheb_diff2_matrix(x, d1)
    f = x ** 5 - 2 * x ** 2 + 3
    assert np.max(np.abs(d1 @ f - (5 * x ** 4 - 4 * x))) < 1e-11
    assert np.max(np.abs(d2 @ f - (20 * x ** 3 - 4))) < 1e-9


def test_radial_dual_backends_agree():
    g = RadialGrid(96)
    f = np.sin(2.0 * g.x) * np.exp(g.x)
    fx = np.cos(2.0 * g.x) * 2.0 * np.exp(g.x) + np.sin(2.0 * g.x) * np.exp(g.x)
    assert np.max(np.abs(g.dx(f, "spectral") - fx)) < 1e-10
    assert np.max(np.abs(g.dx(f, "fd") - fx)) < 1e-8


def test_radial_fd_order_measured():
    # local 9-point stencils: nominal order 8 on the first derivative
    errs = []
    for n in (32, 64):
        g = RadialGrid(n)
        f = np.sin(3.0 * g.x)
        errs.append(np.max(np.abs(g.dx(f, "fd") - 3.0 * np.cos(3.0 * g.x))))
    order = np.log2(errs[0] / errs[1])
    assert order > 7.8 - 0.2


def test_radial_antiderivative():
    g = RadialGrid(64)
    f = np.cos(1.5 * g.x)
    anti = g.antiderivative(f)
    exact = (np.sin(1.5 * g.x) - np.sin(-1.5)) / 1.5
    assert np.max(np.abs(anti - exact)) < 1e-12


def test_barycentric_interp_hits_nodes_and_midpoints():
    g = RadialGrid(48)
    f = np.tanh(g.x) + g.x ** 3
    xq = np.concatenate([g.x[5:10], np.linspace(-0.9, 0.9, 11)])
    got = barycentric_interp(g.x, f, xq)
    want = np.tanh(xq) + xq ** 3
    assert np.max(np.abs(got - want)) < 1e-12


def test_cubic_interp_accuracy():
    xs = np.linspace(0.0, np.pi, 4097)
    ys = np.sin(xs)
    xq = np.linspace(0.1, 3.0, 37)
    assert np.max(np.abs(cubic_interp(xs, ys, xq) - np.sin(xq))) < 1e-11


@pytest.mark.parametrize("deriv", [1, 2])
def test_fd_central_weights_order12(deriv):
    offsets, w = fd_central_weights(deriv, 12)
    assert len(offsets) == 13
    # exactness on monomials up to degree 12 + deriv - 1
    from math import factorial

    for m in range(13):
        val = sum(wt * (off ** m if m or off else 1.0)
                  for off, wt in zip(offsets, w))
        expect = factorial(deriv) if m == deriv else 0.0
        assert abs(val - expect) < 1e-8 * max(1.0, abs(expect))


@pytest.mark.parametrize("backend", ["spectral", "fd"])
def test_periodic_derivative_modes(backend):
    chart = PeriodicChart(64, complex_dim=1)
    xx = chart.coordinate(0)
    yy = chart.coordinate(1)
    f = np.sin(2 * xx) * np.cos(yy) + 0j
    fx = 2 * np.cos(2 * xx) * np.cos(yy)
    got = chart.dreal(f, 0, backend)
    assert np.max(np.abs(got - fx)) < 1e-9


def test_periodic_wirtinger_algebra():
    # dz + dzbar = d/dx and i(dz - dzbar) = d/dy on any smooth field
    chart = PeriodicChart(32, complex_dim=1)
    xx = chart.coordinate(0)
    yy = chart.coordinate(1)
    g = np.sin(xx) + 1j * np.cos(yy) + np.cos(xx + 2 * yy)
    assert np.max(np.abs(chart.dz(g, 0) + chart.dzbar(g, 0)
                         - chart.dreal(g, 0))) < 1e-12
    assert np.max(np.abs(1j * (chart.dz(g, 0) - chart.dzbar(g, 0))
                         - chart.dreal(g, 1))) < 1e-12
