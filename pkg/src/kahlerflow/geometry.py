"""Geometry kernel: curvature, covariant derivatives, norms, Laplacians.

Conventions (all Kahler, complex dimension n):

* curvature  R_{i jbar k lbar} = -d_k d_lbar g_{i jbar}
  + g^{p qbar} d_k g_{i qbar} d_lbar g_{p jbar}
* Ricci      R_{i jbar} = g^{k lbar} R_{i jbar k lbar} = -d_i d_jbar log det g
* scalar     R = g^{i jbar} R_{i jbar}
* Laplacian on functions  Lap f = g^{i jbar} d_i d_jbar f  (half the
  Riemannian Laplacian of ds^2 = 2g); on tensors the rough Laplacian
  (1/2) g^{k lbar} (nabla_k nabla_lbar + nabla_lbar nabla_k).

On U(n)-invariant radial grids everything reduces to the potential-derivative
profile u(s), s = log|z|^2.  With ' = d/ds and x = tanh(s/2) the x-regular
building blocks are

    u'   = (1 - x^2) u_x / 2
    q    = u''/u'   = -x + (1 - x^2) u_xx / (2 u_x)
    A    = -q_x / u_x          (holomorphic sectional; equals R when n = 1)
    B    = -h_x / u_x,  h = (1 - x^2) u_x / (2u)   (radial-transverse, n = 2)
    c    = (u - u') / u^2  ->  1/(2 u_x) at the south pole   (transverse)

all finite at the poles x = +-1.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .errors import (
    BackendDisagreementError,
    NonPositiveError,
    UnsupportedValenceError,
)
from .fields import (
    POSITIVITY_FLOOR,
    CurvaturePack,
    HermitianMetricField,
    ScalarField,
    TensorField,
)
from .grids import PeriodicChart, RadialGrid, cross_check, regularized_ratio

DEFAULT_BACKEND_TOL = 1e-7


def _backends(backend):
    return ("spectral", "fd") if backend == "both" else (backend,)


# ----------------------------------------------------------------------------
# Radial reductions
# ----------------------------------------------------------------------------

def radial_basics(grid: RadialGrid, u: np.ndarray, backend="spectral"):
    """Profile derivatives and x-regular curvature scalars of a radial metric."""
    x = grid.x
    ux = grid.dx(u, backend)
    uxx = grid.dx(u, backend, order=2)
    one_m_x2 = 1.0 - x ** 2
    up = 0.5 * one_m_x2 * ux
    q = -x + 0.5 * one_m_x2 * uxx / ux
    qx = grid.dx(q, backend)
    sec = -qx / ux  # holomorphic sectional curvature of the radial plane
    out = SimpleNamespace(x=x, u=u, ux=ux, uxx=uxx, up=up, q=q, qx=qx, sec=sec)
    if grid.complex_dim == 1:
        out.scalar = sec
        out.ricci_frame = sec[:, None]
        out.rm_sq = sec ** 2
        out.rc_sq = sec ** 2
        return out
    # h = u'/u; numerator and denominator share the south-pole zero.
    num = one_m_x2 * ux
    num_x = -2.0 * x * ux + one_m_x2 * uxx
    h = regularized_ratio(num, 2.0 * u, num_x, 2.0 * ux)
    hx = grid.dx(h, backend)
    bhat = -hx / ux
    small = np.abs(u) < 1e-12 * max(1.0, float(np.max(np.abs(u))))
    usafe = np.where(small, 1.0, u)
    chat = np.where(small, 1.0 / (2.0 * ux), (u - up) / usafe ** 2)
    out.h = h
    out.bhat = bhat
    out.chat = chat
    rho1 = sec + bhat
    rho2 = bhat + 2.0 * chat
    out.ricci_frame = np.stack([rho1, rho2], axis=-1)
    out.scalar = rho1 + rho2
    out.rc_sq = rho1 ** 2 + rho2 ** 2
    out.rm_sq = sec ** 2 + 4.0 * bhat ** 2 + 4.0 * chat ** 2
    return out


def radial_chart_metric(grid: RadialGrid, u: np.ndarray, backend="spectral"):
    """Per-node chart metric diagonals and chart flags (-1 south z, +1 north w).

    The south chart is used for x <= 0 and the north chart w = 1/z for
    x > 0, so stored components stay positive at both poles.
    """
    x = grid.x
    ux = grid.dx(u, backend)
    south = x <= 0.0
    g11 = np.where(south, 0.5 * ux * (1.0 - x) ** 2, 0.5 * ux * (1.0 + x) ** 2)
    diag = [g11]
    if grid.complex_dim == 2:
        g22_s = regularized_ratio(u * (1.0 - x), 1.0 + x,
                                  grid.dx(u * (1.0 - x), backend),
                                  np.ones_like(x))
        diag.append(np.where(south, g22_s, u))
    charts = np.where(south, -1, 1)
    return np.stack(diag, axis=-1), charts


def radial_metric_field(grid: RadialGrid, u: np.ndarray, class_tag="",
                        profile=None, backend="spectral") -> HermitianMetricField:
    diag, charts = radial_chart_metric(grid, u, backend)
    n = grid.complex_dim
    comp = np.zeros((len(grid.x), n, n), dtype=complex)
    for i in range(n):
        comp[:, i, i] = diag[:, i]
    return HermitianMetricField(grid, comp, class_tag=class_tag,
                                profile=profile, charts=charts)


def radial_laplacian(grid: RadialGrid, u: np.ndarray, h: np.ndarray,
                     backend="spectral"):
    """Lap h = h''/u' + (n-1) h'/u for radial scalars, in x-regular form."""
    x = grid.x
    ux = grid.dx(u, backend)
    hx = grid.dx(h, backend)
    hxx = grid.dx(h, backend, order=2)
    lap = (-x * hx + 0.5 * (1.0 - x ** 2) * hxx) / ux
    if grid.complex_dim == 2:
        num = (1.0 - x ** 2) * hx
        num_x = -2.0 * x * hx + (1.0 - x ** 2) * hxx
        uxx = grid.dx(u, backend, order=2)
        lap = lap + regularized_ratio(num, 2.0 * u, num_x, 2.0 * ux)
    return lap


def radial_grad_sq(grid: RadialGrid, u: np.ndarray, h: np.ndarray,
                   backend="spectral"):
    """|grad h|^2 = (1 - x^2) h_x^2 / (2 u_x)."""
    hx = grid.dx(h, backend)
    ux = grid.dx(u, backend)
    return 0.5 * (1.0 - grid.x ** 2) * hx ** 2 / ux


def radial_volume_element(grid: RadialGrid, u: np.ndarray, backend="spectral"):
    """Weight w with int h dV = sum(weights * w * h) over the x grid.

    int h dV = pi^n/(n-1)! * int h(s) u^{n-1} u'(s) ds, and u' ds = u_x dx.
    """
    from math import factorial, pi

    n = grid.complex_dim
    ux = grid.dx(u, backend)
    return (pi ** n / factorial(n - 1)) * u ** (n - 1) * ux


def radial_integrate(grid: RadialGrid, u: np.ndarray, h, backend="spectral"):
    w = radial_volume_element(grid, u, backend)
    return float(np.sum(grid.weights * w * h))


def radial_curvature_pack(grid: RadialGrid, u: np.ndarray,
                          backend="spectral") -> CurvaturePack:
    """Curvature pack from the x-regular radial formulas."""
    b = radial_basics(grid, u, backend)
    diag, charts = radial_chart_metric(grid, u, backend)
    n = grid.complex_dim
    nn = len(grid.x)
    rm = np.zeros((nn, n, n, n, n), dtype=complex)
    ricci = np.zeros((nn, n, n), dtype=complex)
    if n == 1:
        g = diag[:, 0]
        rm[:, 0, 0, 0, 0] = b.sec * g ** 2
        ricci[:, 0, 0] = b.sec * g
    else:
        g1, g2 = diag[:, 0], diag[:, 1]
        rm[:, 0, 0, 0, 0] = b.sec * g1 ** 2
        for (i, j, k, l), val in (((0, 0, 1, 1), b.bhat), ((1, 1, 0, 0), b.bhat),
                                  ((0, 1, 1, 0), b.bhat), ((1, 0, 0, 1), b.bhat),
                                  ((1, 1, 1, 1), 2.0 * b.chat)):
            gs = [g1 if a == 0 else g2 for a in (i, j, k, l)]
            rm[:, i, j, k, l] = val * np.sqrt(gs[0] * gs[1] * gs[2] * gs[3])
        ricci[:, 0, 0] = b.ricci_frame[:, 0] * g1
        ricci[:, 1, 1] = b.ricci_frame[:, 1] * g2
    frame = {"sectional": b.sec, "ricci": b.ricci_frame, "scalar": b.scalar}
    if n == 2:
        frame["bhat"] = b.bhat
        frame["chat"] = b.chat
    return CurvaturePack(grid, rm, ricci, b.scalar, b.rm_sq, b.rc_sq, frame=frame)


# ----------------------------------------------------------------------------
# Periodic chart machinery
# ----------------------------------------------------------------------------

def _metric_derivs(chart: PeriodicChart, g: np.ndarray, backend: str):
    n = chart.complex_dim
    dg = np.stack([chart.dz(g, k, backend) for k in range(n)], axis=-3)
    dgb = np.stack([chart.dzbar(g, k, backend) for k in range(n)], axis=-3)
    return dg, dgb  # axes (..., k, i, j): d_k g_{i jbar}, d_kbar g_{i jbar}


def christoffel(metric: HermitianMetricField, backend="spectral"):
    """Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}, axes (..., k, i, j)."""
    ginv = metric.inverse()
    dg, _ = _metric_derivs(metric.grid, metric.components, backend)
    return np.einsum("...kl,...ijl->...kij", ginv, dg, optimize=True)


def periodic_curvature_arrays(metric: HermitianMetricField, backend: str):
    chart = metric.grid
    g = metric.components
    ginv = metric.inverse()
    dg, dgb = _metric_derivs(chart, g, backend)
    n = chart.complex_dim
    d2 = np.stack([chart.dz(dgb, k, backend) for k in range(n)], axis=-4)
    # d2 axes (..., k, l, i, j) = d_k d_lbar g_{i jbar}
    rm = -np.moveaxis(d2, (-4, -3, -2, -1), (-2, -1, -4, -3))
    rm = rm + np.einsum("...pq,...kiq,...lpj->...ijkl", ginv, dg, dgb,
                        optimize=True)
    ricci = np.einsum("...kl,...ijkl->...ij", ginv, rm, optimize=True)
    scalar = np.real(np.einsum("...ij,...ij->...", ginv, ricci))
    rc_sq = np.real(np.einsum("...il,...kj,...ij,...kl->...",
                              ginv, ginv, ricci, ricci, optimize=True))
    rm_sq = np.real(np.einsum("...iq,...pj,...ks,...rl,...ijkl,...pqrs->...",
                              ginv, ginv, ginv, ginv, rm, rm, optimize=True))
    return rm, ricci, scalar, rm_sq, rc_sq, ginv


def ricci_from_logdet(metric: HermitianMetricField, backend="spectral"):
    chart = metric.grid
    ld = np.log(np.real(metric.det()))
    n = chart.complex_dim
    out = np.empty(metric.components.shape, dtype=complex)
    for j in range(n):
        dj = chart.dzbar(ld, j, backend)
        for i in range(n):
            out[..., i, j] = -chart.dz(dj, i, backend)
    return out


# ----------------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------------

def assemble_metric(background: HermitianMetricField, potential: ScalarField,
                    backend="both", floor=POSITIVITY_FLOOR) -> HermitianMetricField:
    """g = background + ddbar(potential); fails if positivity is lost."""
    grid = background.grid
    if potential.grid is not grid:
        raise ValueError("potential and background live on different grids")
    if isinstance(grid, RadialGrid):
        phi = np.real(potential.values)
        out = None
        for be in _backends(backend):
            u_new = background.profile.u + grid.ds(phi, be)
            ux = grid.dx(u_new, be)
            if np.any(~np.isfinite(ux)) or np.any(ux <= 0.0):
                node = int(np.argmin(ux))
                raise NonPositiveError((node,), float(np.min(ux)))
            if out is None:
                from .models import RadialProfile

                prof = RadialProfile(grid, u_new,
                                     closure=background.profile.closure,
                                     check=False)
                out = radial_metric_field(grid, u_new,
                                          class_tag=background.class_tag,
                                          profile=prof, backend=be)
            else:
                cross_check("assemble_metric", out.profile.u, u_new,
                            DEFAULT_BACKEND_TOL)
        out.check_positive(floor)
        return out
    phi = potential.values
    g0 = background.components
    n = grid.complex_dim
    results = []
    for be in _backends(backend):
        hess = np.empty_like(g0)
        for j in range(n):
            dj = grid.dzbar(phi, j, be)
            for i in range(n):
                hess[..., i, j] = grid.dz(dj, i, be)
        results.append(g0 + hess)
    if len(results) == 2:
        cross_check("assemble_metric", results[0], results[1],
                    DEFAULT_BACKEND_TOL)
    out = HermitianMetricField(grid, results[0], class_tag=background.class_tag)
    out.check_hermitian(1e-9)
    out.check_positive(floor)
    return out


def curvature(metric: HermitianMetricField, backend="both",
              tol=None) -> CurvaturePack:
    """Full curvature pack; dual-backend cross-checked by default."""
    grid = metric.grid
    tol = tol if tol is not None else DEFAULT_BACKEND_TOL
    if isinstance(grid, RadialGrid):
        packs = [radial_curvature_pack(grid, metric.profile.u, be)
                 for be in _backends(backend)]
        if len(packs) == 2:
            cross_check("curvature.scalar", packs[0].scalar, packs[1].scalar, tol)
            cross_check("curvature.rm", packs[0].rm, packs[1].rm, tol)
        pack = packs[0]
    else:
        outs = [periodic_curvature_arrays(metric, be)
                for be in _backends(backend)]
        if len(outs) == 2:
            cross_check("curvature.rm", outs[0][0], outs[1][0], tol)
            cross_check("curvature.scalar", outs[0][2], outs[1][2], tol)
        rm, ricci, scalar, rm_sq, rc_sq, _ = outs[0]
        pack = CurvaturePack(grid, rm, ricci, scalar, rm_sq, rc_sq)
    ric2 = _ricci_logdet(metric, _backends(backend)[0])
    scale = max(float(np.max(np.abs(pack.ricci))), 1.0)
    res = float(np.max(np.abs(pack.ricci - ric2))) / scale
    if res > 50 * tol:
        raise BackendDisagreementError("ricci(log-det) consistency", res, 50 * tol)
    return pack


def _ricci_logdet(metric, backend):
    """Ricci through the -ddbar log det g route (independent assembly)."""
    grid = metric.grid
    if isinstance(grid, PeriodicChart):
        return ricci_from_logdet(metric, backend)
    b = radial_basics(grid, metric.profile.u, backend)
    diag, _ = radial_chart_metric(grid, metric.profile.u, backend)
    n = grid.complex_dim
    out = np.zeros((len(grid.x), n, n), dtype=complex)
    if n == 1:
        out[:, 0, 0] = (-grid.dx(b.q, backend) / b.ux) * diag[:, 0]
        return out
    # (log det g)'(s) = (n-1) u'/u + u''/u' - n, with u'/u = h x-regular
    ldp = (n - 1) * b.h + b.q - n
    ldpx = grid.dx(ldp, backend)
    rho1 = -ldpx / b.ux
    rho2 = -regularized_ratio(ldp, metric.profile.u, ldpx, b.ux)
    out[:, 0, 0] = rho1 * diag[:, 0]
    out[:, 1, 1] = rho2 * diag[:, 1]
    return out


def _cov_correction(gam_kip, comps, node_nd, slot, nslots):
    """einsum contraction  Gamma^p_{k i_slot} T[..., p at slot, ...]."""
    letters = string.ascii_lowercase
    node_sub = letters[:node_nd]
    slot_sub = list(letters[node_nd:node_nd + nslots])
    kk = letters[node_nd + nslots]
    pp = letters[node_nd + nslots + 1]
    g_sub = node_sub + kk + slot_sub[slot] + pp
    t_sub = node_sub + "".join(slot_sub[:slot] + [pp] + slot_sub[slot + 1:])
    out_sub = node_sub + kk + "".join(slot_sub)
    return np.einsum(f"{g_sub},{t_sub}->{out_sub}", gam_kip, comps,
                     optimize=True)


def _cov_deriv_arrays(t: TensorField, metric, barred, backend):
    grid = metric.grid
    n = grid.complex_dim
    node_nd = len(grid.shape)
    comps = t.components
    deriv = grid.dzbar if barred else grid.dz
    out = np.stack([deriv(comps, k, backend) for k in range(n)], axis=node_nd)
    corr_type = "b" if barred else "u"
    gam = christoffel(metric, backend)  # (..., p, k, i)
    gam_use = np.conj(gam) if barred else gam
    gam_kip = np.moveaxis(gam_use, node_nd, node_nd + 2)  # (..., k, i, p)
    nslots = len(t.index_types)
    for slot, typ in enumerate(t.index_types):
        if typ == corr_type:
            out = out - _cov_correction(gam_kip, comps, node_nd, slot, nslots)
    return out


def covariant_derivative(t, metric: HermitianMetricField, barred=False,
                         backend="both") -> TensorField:
    """nabla t with one extra lower index prepended to the index axes.

    Functions are accepted as ScalarField (gradient reduces to partials).
    General tensors need a periodic chart; the radial reductions carry
    their covariant calculus through scalar profiles instead.
    """
    grid = metric.grid
    if isinstance(t, ScalarField):
        if isinstance(grid, RadialGrid):
            if grid.complex_dim != 1:
                raise UnsupportedValenceError(
                    "radial gradients implemented for complex dim 1")
            vals = [grid.ds(np.real(t.values), be) for be in _backends(backend)]
            if len(vals) == 2:
                cross_check("gradient", vals[0], vals[1], DEFAULT_BACKEND_TOL)
            # (1,0)-component at the representative point carries f'(s)
            return TensorField(grid, index_types=("b",) if barred else ("u",),
                               components=vals[0][:, None].astype(complex))
        vals = []
        for be in _backends(backend):
            d = grid.dzbar if barred else grid.dz
            vals.append(np.stack([d(t.values, k, be)
                                  for k in range(grid.complex_dim)], axis=-1))
        if len(vals) == 2:
            cross_check("gradient", vals[0], vals[1], DEFAULT_BACKEND_TOL)
        return TensorField(grid, index_types=("b",) if barred else ("u",),
                           components=vals[0])
    if not isinstance(grid, PeriodicChart):
        raise UnsupportedValenceError(
            "covariant derivatives of general tensors need a periodic chart")
    if not set(t.index_types) <= {"u", "b"}:
        raise UnsupportedValenceError(f"bad index types {t.index_types}")
    results = [_cov_deriv_arrays(t, metric, barred, be)
               for be in _backends(backend)]
    if len(results) == 2:
        cross_check("covariant_derivative", results[0], results[1],
                    DEFAULT_BACKEND_TOL * 10)
    types = (("b",) if barred else ("u",)) + tuple(t.index_types)
    return TensorField(grid, index_types=types, components=results[0])


def _contract_deriv_pair(ginv, comp, node_nd, k_axis, l_axis):
    """Contract g^{k lbar} against the given derivative axes."""
    moved = np.moveaxis(comp, (k_axis, l_axis), (-2, -1))
    extra = moved.ndim - ginv.ndim
    gb = ginv.reshape(ginv.shape[:node_nd] + (1,) * extra + ginv.shape[node_nd:])
    return (gb * moved).sum(axis=(-2, -1))


def laplacian(f, metric: HermitianMetricField, backend="both"):
    """Rough Laplacian; scalars on any chart, tensors on periodic charts."""
    grid = metric.grid
    if isinstance(f, ScalarField):
        if isinstance(grid, RadialGrid):
            vals = [radial_laplacian(grid, metric.profile.u,
                                     np.real(f.values), be)
                    for be in _backends(backend)]
        else:
            ginv = metric.inverse()
            n = grid.complex_dim
            vals = []
            for be in _backends(backend):
                hess = np.empty(grid.shape + (n, n), dtype=complex)
                for j in range(n):
                    dj = grid.dzbar(f.values, j, be)
                    for i in range(n):
                        hess[..., i, j] = grid.dz(dj, i, be)
                vals.append(np.einsum("...ij,...ij->...", ginv, hess))
        if len(vals) == 2:
            cross_check("laplacian", vals[0], vals[1], DEFAULT_BACKEND_TOL)
        return ScalarField(grid, vals[0])
    if not isinstance(f, TensorField) or not isinstance(grid, PeriodicChart):
        raise UnsupportedValenceError("tensor Laplacian needs a periodic chart")
    ginv = metric.inverse()
    node_nd = len(grid.shape)
    be = _backends(backend)[0]
    a = covariant_derivative(covariant_derivative(f, metric, barred=True,
                                                  backend=be),
                             metric, barred=False, backend=be)
    # a axes: (..., k, lbar, slots)
    term1 = _contract_deriv_pair(ginv, a.components, node_nd,
                                 node_nd, node_nd + 1)
    b = covariant_derivative(covariant_derivative(f, metric, barred=False,
                                                  backend=be),
                             metric, barred=True, backend=be)
    # b axes: (..., lbar, k, slots)
    term2 = _contract_deriv_pair(ginv, b.components, node_nd,
                                 node_nd + 1, node_nd)
    return TensorField(grid, index_types=tuple(t for t in f.index_types),
                       components=0.5 * (term1 + term2))


def norms(pack: CurvaturePack, f: ScalarField, metric: HermitianMetricField,
          backend="both"):
    """|grad f|^2, |Rc|^2, |Rm|^2 as real nonnegative fields."""
    grid = metric.grid
    if isinstance(grid, RadialGrid):
        vals = [radial_grad_sq(grid, metric.profile.u, np.real(f.values), be)
                for be in _backends(backend)]
    else:
        ginv = metric.inverse()
        vals = []
        for be in _backends(backend):
            df = np.stack([grid.dz(f.values, k, be)
                           for k in range(grid.complex_dim)], axis=-1)
            dfb = np.stack([grid.dzbar(f.values, k, be)
                            for k in range(grid.complex_dim)], axis=-1)
            vals.append(np.real(np.einsum("...ij,...i,...j->...",
                                          ginv, df, dfb, optimize=True)))
    if len(vals) == 2:
        cross_check("grad_sq", vals[0], vals[1], DEFAULT_BACKEND_TOL)
    return {
        "grad_f_sq": ScalarField(grid, np.real(vals[0])),
        "rc_sq": ScalarField(grid, np.real(pack.norm_rc_sq)),
        "rm_sq": ScalarField(grid, np.real(pack.norm_rm_sq)),
    }


@dataclass
class IdentityReport:
    """Max residuals of the symmetry / Bianchi / commutation identities.

    Large residuals are data (under-resolution), not errors.
    ``max_residual`` covers the four contract residuals (symmetries, second
    Bianchi, the two commutation formulas); backend disagreement, Kahler
    closedness, metric compatibility and the Ricci log-det route are
    supplementary diagnostics with their own gates.
    """

    grid: object
    backend_disagreement: float
    symmetry: float
    kahler_closedness: float
    bianchi: float
    commutation_form: float
    commutation_tensor: float
    metric_compatibility: float
    ricci_consistency: float

    def max_residual(self):
        return max(self.symmetry, self.bianchi,
                   self.commutation_form, self.commutation_tensor)

    def max_supplementary(self):
        return max(self.backend_disagreement, self.kahler_closedness,
                   self.metric_compatibility, self.ricci_consistency)

    def as_dict(self):
        return {
            "backend_disagreement": self.backend_disagreement,
            "symmetry": self.symmetry,
            "kahler_closedness": self.kahler_closedness,
            "bianchi": self.bianchi,
            "commutation_form": self.commutation_form,
            "commutation_tensor": self.commutation_tensor,
            "metric_compatibility": self.metric_compatibility,
            "ricci_consistency": self.ricci_consistency,
        }


def identity_residuals(metric: HermitianMetricField, seed=0) -> IdentityReport:
    grid = metric.grid
    if isinstance(grid, RadialGrid):
        return _radial_identity_residuals(metric, seed)
    rng = np.random.default_rng(seed)
    outs = {be: periodic_curvature_arrays(metric, be) for be in ("spectral", "fd")}
    rm_s = outs["spectral"][0]
    scale = max(float(np.max(np.abs(rm_s))), 1.0)
    backend_res = float(np.max(np.abs(rm_s - outs["fd"][0]))) / scale
    pack = CurvaturePack(grid, rm_s, outs["spectral"][1], outs["spectral"][2],
                         outs["spectral"][3], outs["spectral"][4])
    sym = pack.symmetry_residual()
    ric2 = ricci_from_logdet(metric, "spectral")
    ric_res = float(np.max(np.abs(pack.ricci - ric2))) / max(
        float(np.max(np.abs(pack.ricci))), 1.0)
    n = grid.complex_dim
    g = metric.components
    closed = 0.0
    if n > 1:
        dg = np.stack([grid.dz(g, k, "spectral") for k in range(n)], axis=-3)
        # d_k g_{i jbar} symmetric in (k, i)
        closed = float(np.max(np.abs(
            dg - np.moveaxis(dg, (-3, -2, -1), (-2, -3, -1))))) / max(
            float(np.max(np.abs(dg))), 1.0)
    gfield = TensorField(grid, index_types=("u", "b"), components=g)
    nabla_g = covariant_derivative(gfield, metric, barred=False,
                                   backend="spectral")
    compat = float(np.max(np.abs(nabla_g.components))) / max(
        float(np.max(np.abs(g))), 1.0)
    rmfield = TensorField(grid, index_types=("u", "b", "u", "b"),
                          components=rm_s)
    nab = covariant_derivative(rmfield, metric, barred=False,
                               backend="spectral").components
    # axes (..., p, i, j, k, l): second Bianchi is symmetry under p <-> k
    bianchi = float(np.max(np.abs(
        nab - np.moveaxis(nab, (-5, -4, -3, -2, -1),
                          (-2, -4, -3, -5, -1))))) / max(
        float(np.max(np.abs(nab))), 1.0)
    v = _random_tensor(grid, rng, ("u",))
    comm_form = _commutation_form_residual(v, metric, rm_s)
    vt = _random_tensor(grid, rng, ("u", "b"))
    comm_tensor = _commutation_tensor_residual(vt, metric, rm_s)
    return IdentityReport(grid, backend_res, sym, closed, bianchi,
                          comm_form, comm_tensor, compat, ric_res)


def _random_tensor(grid, rng, types, modes=1, terms=3):
    """Seeded smooth random tensor field on a periodic chart."""
    n = grid.complex_dim
    shape = grid.shape + (n,) * len(types)
    out = np.zeros(shape, dtype=complex)
    coords = [grid.coordinate(a) for a in range(2 * n)]
    for idx in np.ndindex(*(n,) * len(types)):
        fld = np.zeros(grid.shape, dtype=complex)
        for _ in range(terms):
            ks = rng.integers(-modes, modes + 1, size=2 * n)
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            phase = sum(k * c for k, c in zip(ks, coords))
            fld = fld + amp * np.exp(1j * phase)
        out[(Ellipsis,) + idx] = fld
    return TensorField(grid, index_types=tuple(types), components=out)


def _commutation_form_residual(v, metric, rm):
    """(1.17)-type identity: [nabla_k, nabla_jbar] v_i = -R_{k jbar i lbar} v^l."""
    grid = metric.grid
    ginv = metric.inverse()
    node_nd = len(grid.shape)
    a = covariant_derivative(covariant_derivative(v, metric, barred=True,
                                                  backend="spectral"),
                             metric, barred=False, backend="spectral")
    b = covariant_derivative(covariant_derivative(v, metric, barred=False,
                                                  backend="spectral"),
                             metric, barred=True, backend="spectral")
    bb = np.moveaxis(b.components, node_nd, node_nd + 1)
    lhs = a.components - bb
    rhs = -np.einsum("...kjil,...pl,...p->...kji", rm, ginv, v.components,
                     optimize=True)
    scale = max(float(np.max(np.abs(rhs))), 1.0)
    return float(np.max(np.abs(lhs - rhs))) / scale


def _commutation_tensor_residual(v, metric, rm):
    """(1.18)-type identity on (1,1)-tensors."""
    grid = metric.grid
    ginv = metric.inverse()
    node_nd = len(grid.shape)
    a = covariant_derivative(covariant_derivative(v, metric, barred=True,
                                                  backend="spectral"),
                             metric, barred=False, backend="spectral")
    b = covariant_derivative(covariant_derivative(v, metric, barred=False,
                                                  backend="spectral"),
                             metric, barred=True, backend="spectral")
    bb = np.moveaxis(b.components, node_nd, node_nd + 1)
    lhs = a.components - bb
    rhs = (-np.einsum("...kliq,...pq,...pj->...klij", rm, ginv, v.components,
                      optimize=True)
           + np.einsum("...klpj,...pq,...iq->...klij", rm, ginv, v.components,
                       optimize=True))
    scale = max(float(np.max(np.abs(rhs))), 1.0)
    return float(np.max(np.abs(lhs - rhs))) / scale


def _radial_identity_residuals(metric, seed):
    """Radial CP^1 reduction of the identity suite.

    Symmetries and second Bianchi hold identically in complex dimension 1;
    the nontrivial content is the commutation identity on gradient
    (1,0)-forms and dual-backend / Ricci-route agreement.
    """
    grid = metric.grid
    if grid.complex_dim != 1:
        raise UnsupportedValenceError(
            "radial identity residuals implemented for complex dim 1")
    u = metric.profile.u
    rng = np.random.default_rng(seed)
    packs = {be: radial_curvature_pack(grid, u, be) for be in ("spectral", "fd")}
    scale = max(float(np.max(np.abs(packs["spectral"].scalar))), 1.0)
    backend_res = float(np.max(np.abs(packs["spectral"].scalar
                                      - packs["fd"].scalar))) / scale
    sym = packs["spectral"].symmetry_residual()
    ric2 = _ricci_logdet(metric, "spectral")
    ric_res = float(np.max(np.abs(packs["spectral"].ricci - ric2))) / max(
        float(np.max(np.abs(packs["spectral"].ricci))), 1.0)
    coeff = rng.standard_normal(5)
    xg = grid.x
    h = sum(c * xg ** (k + 1) for k, c in enumerate(coeff))
    b = radial_basics(grid, u, "spectral")

    def ds(f):
        return grid.ds(f, "spectral")

    # [nabla_1, nabla_1bar] (grad h)_1 = -R_11bar (grad h)^1, reduced to the
    # s-line (common chart prefactor dropped).
    h1, lw1 = ds(h), b.q - 1.0
    h2 = ds(h1)
    h3 = ds(h2)
    lw2 = ds(b.q)
    qh = h2 - h1 - lw1 * h1
    lhs = h3 - h2 - lw1 * h2 - ds(qh)
    rhs = lw2 * h1
    comm = float(np.max(np.abs(lhs - rhs))) / max(float(np.max(np.abs(rhs))), 1.0)
    return IdentityReport(grid, backend_res, sym, 0.0, 0.0, comm, 0.0, 0.0,
                          ric_res)


@dataclass
class BisectionalResult:
    value: float
    node: tuple
    v: np.ndarray
    w: np.ndarray


def min_bisectional(pack: CurvaturePack, metric: HermitianMetricField,
                    sample_budget=512, seed=0) -> BisectionalResult:
    """Minimum of R(v, vbar, w, wbar) over unit (1,0)-vectors v, w.

    Exact grid scan in complex dimension 1; seeded sampling plus local
    refinement in dimension 2.
    """
    grid = metric.grid
    n = grid.complex_dim
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    if n == 1:
        if isinstance(grid, RadialGrid):
            vals = pack.frame["sectional"]
        else:
            ginv = metric.inverse()
            vals = np.real(pack.rm[..., 0, 0, 0, 0] * ginv[..., 0, 0] ** 2)
        node = np.unravel_index(int(np.argmin(vals)), vals.shape)
        g00 = np.real(metric.components[node + (0, 0)])
        vunit = np.array([1.0 / np.sqrt(g00)])
        return BisectionalResult(float(vals[node]), node, vunit, vunit.copy())
    rng = np.random.default_rng(seed)
    if isinstance(grid, RadialGrid):
        a, b, c = pack.frame["sectional"], pack.frame["bhat"], pack.frame["chat"]

        def value(v, w):
            return (a * np.abs(v[0] * w[0]) ** 2
                    + b * np.abs(v[0] * w[1] + v[1] * w[0]) ** 2
                    + 2.0 * c * np.abs(v[1] * w[1]) ** 2)

        best = (np.inf, None, None, None)
        for v, w in _unit_pairs(rng, sample_budget):
            vals = value(v, w)
            i = int(np.argmin(vals))
            if vals[i] < best[0]:
                best = (float(vals[i]), (i,), v, w)
        best = _refine(value, best, rng)
        return BisectionalResult(*best)
    g = metric.components
    rm = pack.rm
    best = (np.inf, None, None, None)

    def value_nodes(v, w):
        nv = np.real(np.einsum("...ij,i,j->...", g, v, np.conj(v)))
        nw = np.real(np.einsum("...ij,i,j->...", g, w, np.conj(w)))
        return np.real(np.einsum("...ijkl,i,j,k,l->...", rm, v, np.conj(v),
                                 w, np.conj(w), optimize=True)) / (nv * nw)

    for v, w in _unit_pairs(rng, sample_budget):
        vals = value_nodes(v, w)
        node = np.unravel_index(int(np.argmin(vals)), vals.shape)
        if vals[node] < best[0]:
            best = (float(vals[node]), node, v, w)
    best = _refine(lambda v, w: value_nodes(v, w).reshape(-1), best, rng,
                   reshape=g.shape[:-2])
    return BisectionalResult(*best)


def _unit_pairs(rng, budget):
    pairs = []
    for _ in range(budget):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        pairs.append((v / np.linalg.norm(v), w / np.linalg.norm(w)))
    return pairs


def _refine(value, best, rng, rounds=3, local=48, reshape=None):
    val, node, v, w = best
    radius = 0.3
    for _ in range(rounds):
        for _ in range(local):
            dv = v + radius * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
            dw = w + radius * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
            dv /= np.linalg.norm(dv)
            dw /= np.linalg.norm(dw)
            vals = value(dv, dw)
            i = int(np.argmin(vals))
            if vals[i] < val:
                nd = np.unravel_index(i, reshape) if reshape else (i,)
                val, node, v, w = float(vals[i]), nd, dv, dw
        radius *= 0.4
    return val, node, v, w
