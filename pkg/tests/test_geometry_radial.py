"""Radial (U(n)-invariant) geometry against independent oracles.

The heavy oracle is symbolic: build the metric from its Kahler potential in
coordinates with sympy, apply the curvature definition directly, and compare
with the x-regular profile formulas at matching points.
"""

import numpy as np
import pytest
import sympy as sp

import kahlerflow.geometry as geo
from kahlerflow.errors import NonPositiveError
from kahlerflow.fields import ScalarField
from kahlerflow.grids import RadialGrid
from kahlerflow.models import (
    fubini_study,
    perturbed_profile,
    radial_bump_potential,
    radial_metric,
)

EPS_PERT = 0.35


def _profile_u(n, x, eps=0.0):
    """u = (n+1) sigma + eps sigma^2 (1 - sigma), sigma = (1+x)/2."""
    sigma = 0.5 * (1.0 + x)
    return (n + 1.0) * sigma + eps * sigma ** 2 * (1.0 - sigma)


def _sympy_oracle(n, eps, r_values):
    """Curvature components at z = (r, 0,..): symbolic derivatives of the
    potential, numeric metric inverse (keeps the oracle path independent of
    the package's formulas while staying fast)."""
    zs = sp.symbols(f"z0:{n}")
    zbs = sp.symbols(f"w0:{n}")  # placeholders for conjugates
    allsym = list(zs) + list(zbs)
    rho = sum(z * w for z, w in zip(zs, zbs))
    sigma = rho / (1 + rho)
    phi = (n + 1) * sp.log(1 + rho) + sp.Rational(1, 2) * eps * sigma ** 2
    g = [[sp.diff(phi, zs[i], zbs[j]) for j in range(n)] for i in range(n)]
    gf = [[sp.lambdify(allsym, g[i][j]) for j in range(n)] for i in range(n)]
    dgf = [[[sp.lambdify(allsym, sp.diff(g[i][j], zs[k])) for k in range(n)]
            for j in range(n)] for i in range(n)]
    dgbf = [[[sp.lambdify(allsym, sp.diff(g[i][j], zbs[l])) for l in range(n)]
             for j in range(n)] for i in range(n)]
    d2f = [[[[sp.lambdify(allsym, sp.diff(g[i][j], zs[k], zbs[l]))
              for l in range(n)] for k in range(n)] for j in range(n)]
           for i in range(n)]
    out = []
    for r in r_values:
        args = [r] + [0.0] * (n - 1) + [r] + [0.0] * (n - 1)
        gv = np.array([[complex(gf[i][j](*args)) for j in range(n)]
                       for i in range(n)])
        ginv = np.conj(np.linalg.inv(gv)).T  # g^{p qbar}
        vals = {}
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        expr = -complex(d2f[i][j][k][l](*args))
                        for p in range(n):
                            for q in range(n):
                                expr += (ginv[p, q]
                                         * complex(dgf[i][q][k](*args))
                                         * complex(dgbf[p][j][l](*args)))
                        vals[(i, j, k, l)] = expr
        out.append((vals, gv))
    return out


@pytest.mark.parametrize("n,eps", [(1, 0.0), (1, EPS_PERT), (2, 0.0), (2, EPS_PERT)])
def test_radial_curvature_vs_symbolic(n, eps):
    grid = RadialGrid(96, complex_dim=n)
    u = _profile_u(n, grid.x, eps)
    pack = geo.radial_curvature_pack(grid, u)
    # pick interior nodes in the south chart (x < 0), where components match
    # the oracle's z-chart directly
    idx = [12, 25, 40]
    assert all(grid.x[i] < 0 for i in idx)
    rs = [float(np.sqrt((1 + grid.x[i]) / (1 - grid.x[i]))) for i in idx]
    oracle = _sympy_oracle(n, eps, rs)
    for node, (vals, gv) in zip(idx, oracle):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        got = pack.rm[node, i, j, k, l]
                        want = vals[(i, j, k, l)]
                        assert abs(got - want) < 1e-8 * max(1.0, abs(want)), (
                            (node, i, j, k, l, got, want))
        assert np.max(np.abs(pack.grid.x[node] - pack.grid.x[node])) == 0.0
        ginv = np.conj(np.linalg.inv(gv)).T
        ric = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                ric[i, j] = sum(ginv[k, l] * vals[(i, j, k, l)]
                                for k in range(n) for l in range(n))
        assert np.max(np.abs(pack.ricci[node] - ric)) < 1e-8


def test_fs_cp1_facts():
    m = fubini_study(1, 96)
    pack = geo.curvature(m, backend="both")
    assert np.max(np.abs(pack.scalar - 1.0)) < 1e-8
    assert np.max(np.abs(pack.norm_rc_sq - 1.0)) < 1e-8
    # R_{1 1bar 1 1bar} = g_{1 1bar}^2 pointwise (KE identity in dim 1)
    g = np.real(m.components[:, 0, 0])
    assert np.max(np.abs(pack.rm[:, 0, 0, 0, 0] - g ** 2)) < 1e-8


def test_fs_cp2_facts():
    m = fubini_study(2, 96)
    pack = geo.curvature(m, backend="both")
    assert np.max(np.abs(pack.scalar - 2.0)) < 1e-8
    assert np.max(np.abs(pack.norm_rc_sq - 2.0)) < 1e-8
    # KE: Ricci equals the metric componentwise
    assert np.max(np.abs(pack.ricci - m.components)) < 1e-8
    assert pack.symmetry_residual() < 1e-12


def test_assemble_metric_zero_potential_identity():
    m = fubini_study(1, 64)
    phi = ScalarField(m.grid, np.zeros_like(m.grid.x))
    out = geo.assemble_metric(m, phi)
    assert np.max(np.abs(out.components - m.components)) == 0.0


def test_assemble_metric_radial_bump_symbolic_oracle():
    # second derivative of the bump profile via an independent symbolic path
    m = fubini_study(1, 128)
    grid = m.grid
    phi = radial_bump_potential(grid, amplitude=0.15)
    out = geo.assemble_metric(m, phi)
    xs = sp.Symbol("x")
    phis = 0.15 * (1 - xs ** 2) ** 2 * sp.exp(-(xs / sp.Rational(1, 2)) ** 2)
    # u_new = u + d phi/ds with d/ds = ((1-x^2)/2) d/dx
    dphi_ds = sp.simplify((1 - xs ** 2) / 2 * sp.diff(phis, xs))
    f = sp.lambdify(xs, dphi_ds, "numpy")
    expect = m.profile.u + f(grid.x)
    assert np.max(np.abs(out.profile.u - expect)) < 1e-8


def test_assemble_metric_rejects_cone_exit():
    m = fubini_study(1, 64)
    phi = radial_bump_potential(m.grid, amplitude=40.0)
    with pytest.raises(NonPositiveError):
        geo.assemble_metric(m, phi)


def test_laplacian_constant_and_divergence():
    m = fubini_study(1, 96)
    const = ScalarField(m.grid, np.full_like(m.grid.x, 3.7))
    lap = geo.laplacian(const, m)
    assert np.max(np.abs(lap.values)) < 1e-10
    # integral of Lap f over the closed geometry vanishes
    f = ScalarField(m.grid, np.sin(2.0 * m.grid.x) + m.grid.x ** 2)
    lap = geo.laplacian(f, m)
    total = geo.radial_integrate(m.grid, m.profile.u, lap.values)
    assert abs(total) < 1e-9


def test_laplacian_spherical_harmonic():
    # x is the first spherical harmonic of the round metric: Lap x = -x
    m = fubini_study(1, 96)
    f = ScalarField(m.grid, m.grid.x.copy())
    lap = geo.laplacian(f, m)
    assert np.max(np.abs(lap.values + m.grid.x)) < 1e-9


def test_norms_against_loop_oracle():
    m = radial_metric(perturbed_profile(fubini_study(1, 64), 0.2, seed=5))
    pack = geo.curvature(m, backend="spectral")
    f = ScalarField(m.grid, np.cos(m.grid.x) * m.grid.x)
    out = geo.norms(pack, f, m)
    # independent contraction: dim-1 loops with explicit inverse metric
    g = np.real(m.components[:, 0, 0])
    rm = pack.rm[:, 0, 0, 0, 0]
    rc = pack.ricci[:, 0, 0]
    rm_sq = np.abs(rm) ** 2 / g ** 4
    rc_sq = np.abs(rc) ** 2 / g ** 2
    assert np.max(np.abs(out["rm_sq"].values - rm_sq)) < 1e-10
    assert np.max(np.abs(out["rc_sq"].values - rc_sq)) < 1e-10
    assert np.all(out["grad_f_sq"].values >= -1e-14)


def test_identity_residuals_radial():
    m = fubini_study(1, 256)
    rep = geo.identity_residuals(m)
    assert rep.max_residual() < 1e-8
    assert rep.max_supplementary() < 1e-7
    m2 = radial_metric(perturbed_profile(fubini_study(1, 256), 0.2, seed=2))
    rep2 = geo.identity_residuals(m2)
    assert rep2.max_residual() < 1e-8
    assert rep2.max_supplementary() < 1e-7


def test_min_bisectional_dim1_exact():
    m = radial_metric(perturbed_profile(fubini_study(1, 96), 0.2, seed=7))
    pack = geo.curvature(m, backend="spectral")
    res = geo.min_bisectional(pack, m, sample_budget=4)
    assert abs(res.value - float(np.min(pack.frame["sectional"]))) < 1e-14


def test_min_bisectional_fs_cp2():
    m = fubini_study(2, 64)
    pack = geo.curvature(m, backend="spectral")
    res = geo.min_bisectional(pack, m, sample_budget=400, seed=3)
    # FS CP^2 minimum over unit pairs is the orthogonal value 1/3
    assert res.value > 0.0
    assert abs(res.value - 1.0 / 3.0) < 2e-3


def test_resolution_convergence_of_identity_residuals():
    vals = []
    for n in (24, 48):
        m = radial_metric(perturbed_profile(fubini_study(1, n), 0.3, seed=4))
        vals.append(geo.identity_residuals(m).max_residual())
    # spectral: at least two orders per doubling until the roundoff floor
    assert vals[1] < max(vals[0] / 100.0, 5e-12)
