"""Model geometries: Fubini-Study and U(n)-invariant CP^n metrics, periodic
test charts, geodesic/ball/diameter tables for symmetric metrics.

Normalization: metrics on CP^n live in the class pi*c1(CP^n), which fixes the
profile range u: (0, n+1); on CP^1 the Kahler volume is 2*pi (the class pairs
to pi * <c1, [CP^1]> = 2*pi) and the Fubini-Study metric is the round sphere
of Gauss curvature 1 in the Riemannian convention ds^2 = 2g.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetryDetectedError, ClassMismatchError, NonPositiveError
from .fields import HermitianMetricField, ScalarField
from .geometry import radial_metric_field
from .grids import (
    PeriodicChart,
    ProfileClosure,
    RadialGrid,
    barycentric_interp,
    cubic_interp,
)

CLASS_TAG_CPN = "pi*c1(CP^{n})"
CLASS_TAG_TORUS = "flat-torus"


@dataclass
class RadialProfile:
    """Potential-derivative profile u(s) = Phi'(s) of a U(n)-invariant metric.

    Positivity of the metric is u strictly increasing in s (u_x > 0 on the
    x grid); the class pi*c1(CP^n) is the range (0, n+1) together with the
    smooth closure at both poles.
    """

    grid: RadialGrid
    u: np.ndarray
    closure: ProfileClosure = field(default_factory=ProfileClosure)
    check: bool = True

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != self.grid.x.shape:
            raise ValueError("profile values do not match the grid")
        if self.check:
            self.validate()

    @property
    def class_constant(self):
        return self.grid.complex_dim + 1.0

    def validate(self, tol=1e-8):
        c = self.class_constant
        if abs(self.u[0]) > tol * c or abs(self.u[-1] - c) > tol * c:
            raise ClassMismatchError(
                f"profile limits ({self.u[0]:.3e}, {self.u[-1]:.3e}) do not "
                f"match the class range (0, {c:g})")
        ux = self.grid.dx(self.u, "spectral")
        if np.any(~np.isfinite(ux)) or np.any(ux <= 0.0):
            node = int(np.argmin(ux))
            raise NonPositiveError((node,), float(np.min(ux)))
        return True

    def scaled(self, a):
        """Profile of the scaled metric a*g (leaves the class pi*c1)."""
        return RadialProfile(self.grid, a * self.u, closure=self.closure,
                             check=False)


def fubini_study(n=1, resolution=256) -> HermitianMetricField:
    """Fubini-Study metric on CP^n in the class pi*c1: u = (n+1)(1+x)/2.

    Kahler-Einstein with R_{i jbar} = g_{i jbar}, so R = n.
    """
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    grid = RadialGrid(resolution, complex_dim=n)
    u = 0.5 * (n + 1) * (1.0 + grid.x)
    prof = RadialProfile(grid, u)
    return radial_metric_field(grid, u, class_tag=CLASS_TAG_CPN.format(n=n),
                               profile=prof)


def radial_metric(profile: RadialProfile) -> HermitianMetricField:
    """Metric field of a validated radial profile (positivity re-checked)."""
    profile.validate()
    n = profile.grid.complex_dim
    out = radial_metric_field(profile.grid, profile.u,
                              class_tag=CLASS_TAG_CPN.format(n=n),
                              profile=profile)
    out.check_positive()
    return out


def perturbed_profile(base: HermitianMetricField, amplitude, seed=0,
                      modes=3) -> RadialProfile:
    """Seeded class-preserving perturbation of a radial metric's profile.

    Adds amplitude * (1 - x^2) * (random low-order polynomial), which keeps
    the endpoint limits and the smooth closure over the poles.
    """
    grid = base.grid
    rng = np.random.default_rng(seed)
    coeff = rng.standard_normal(modes)
    coeff /= max(1.0, float(np.max(np.abs(coeff))))
    x = grid.x
    bump = (1.0 - x ** 2) * sum(c * x ** k for k, c in enumerate(coeff))
    u = base.profile.u + amplitude * bump
    return RadialProfile(grid, u, closure=base.profile.closure)


def radial_bump_potential(grid: RadialGrid, amplitude=0.1, center=0.0,
                          width=0.5) -> ScalarField:
    """Smooth radial potential bump phi(x) for assemble_metric tests."""
    x = grid.x
    phi = amplitude * (1.0 - x ** 2) ** 2 * np.exp(-((x - center) / width) ** 2)
    return ScalarField(grid, phi)


def flat_torus(nodes_per_axis=64, complex_dim=1) -> HermitianMetricField:
    """Flat background metric delta_{ij} on the periodic chart."""
    chart = PeriodicChart(nodes_per_axis, complex_dim)
    n = complex_dim
    comp = np.zeros(chart.shape + (n, n), dtype=complex)
    for i in range(n):
        comp[..., i, i] = 1.0
    return HermitianMetricField(chart, comp, class_tag=CLASS_TAG_TORUS)


def random_periodic_potential(chart: PeriodicChart, seed=0, amplitude=0.05,
                              modes=2, terms=4) -> ScalarField:
    """Deterministic seeded trigonometric polynomial potential.

    A cheap Hessian bound rejects amplitudes that would push the assembled
    metric delta + ddbar(phi) out of the Kahler cone.
    """
    rng = np.random.default_rng(seed)
    coords = [chart.coordinate(a) for a in range(2 * chart.complex_dim)]
    phi = np.zeros(chart.shape)
    hess_bound = 0.0
    for _ in range(terms):
        ks = rng.integers(-modes, modes + 1, size=2 * chart.complex_dim)
        if not np.any(ks):
            ks[0] = 1
        amp = amplitude * rng.standard_normal()
        phase = rng.uniform(0.0, 2.0 * np.pi)
        arg = sum(k * c for k, c in zip(ks, coords))
        phi = phi + amp * np.cos(arg + phase)
        hess_bound += abs(amp) * float(np.sum(np.abs(ks)) ** 2) / 4.0
    if hess_bound >= 1.0:
        raise NonPositiveError((), 1.0 - hess_bound,
                               "amplitude too large for the flat background")
    return ScalarField(chart, phi)


@dataclass
class SymmetricGeodesicTable:
    """Meridian distances, ball volumes, and diameter of a symmetric metric.

    All quantities are Riemannian (ds^2 = 2g).  ``r_of_x`` is the distance
    from the chosen pole at meridian parameter x (meridians are geodesics
    of a surface of revolution); (``r``, ``ball_volume``) tabulates V(r) on
    an increasing r grid.  ``diameter`` is the pole-to-pole meridian length.
    """

    center: str
    x: np.ndarray
    r_of_x: np.ndarray
    r: np.ndarray
    ball_volume: np.ndarray
    diameter: float
    total_volume: float

    def distance_from_pole(self, xq):
        return cubic_interp(self.x, self.r_of_x, xq)

    def volume(self, rq):
        return cubic_interp(self.r, self.ball_volume, rq)

    def distance(self, xa, xb):
        """Distance between two same-meridian points.

        Candidates: the direct arc and the two through-pole routes.  Exact
        for pole-centered pairs, an upper bound in general, which keeps the
        Harnack slack checks conservative.
        """
        ra = self.distance_from_pole(xa)
        rb = self.distance_from_pole(xb)
        d = np.minimum(np.abs(ra - rb), ra + rb)
        return np.minimum(d, 2.0 * self.diameter - ra - rb)

    def annulus_volume(self, r1, r2):
        return self.volume(r2) - self.volume(r1)


def _cumulative_simpson(y, h):
    """Cumulative integral on a uniform grid, composite Simpson (O(h^4))."""
    n = len(y)
    out = np.zeros(n)
    for i in range(2, n, 2):
        out[i] = out[i - 2] + h * (y[i - 2] + 4.0 * y[i - 1] + y[i]) / 3.0
    for i in range(1, n, 2):
        if i + 1 < n:
            out[i] = out[i - 1] + h * (5.0 * y[i - 1] + 8.0 * y[i] - y[i + 1]) / 12.0
        else:
            out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i])
    return out


def geodesic_table(metric: HermitianMetricField, center="south",
                   samples=4096) -> SymmetricGeodesicTable:
    """Geodesic table of a rotationally symmetric metric around a pole.

    Along a meridian dl = sqrt(u_x / (1 - x^2)) dx; substituting
    x = -cos(theta) turns the integrand into the smooth sqrt(u_x) d(theta).
    Ball volumes come from the Kahler volume below x, V_K = pi^n u^n / n!,
    with V_Riem = 2^n V_K.
    """
    grid = metric.grid
    if not isinstance(grid, RadialGrid):
        raise AsymmetryDetectedError(
            "geodesic tables need a rotationally symmetric (radial) metric")
    if center not in ("south", "north"):
        raise ValueError("center must be a symmetry pole: 'south' or 'north'")
    if metric.profile is None:
        raise AsymmetryDetectedError("radial metric lacks its profile data")
    n = grid.complex_dim
    u = metric.profile.u
    theta = np.linspace(0.0, np.pi, samples + 1)
    x = -np.cos(theta)
    ux = barycentric_interp(grid.x, grid.dx(u, "spectral"), x)
    if np.any(ux <= 0.0):
        raise NonPositiveError((int(np.argmin(ux)),), float(np.min(ux)))
    h = theta[1] - theta[0]
    arc = _cumulative_simpson(np.sqrt(ux), h)
    uu = barycentric_interp(grid.x, u, x)
    from math import factorial, pi

    vol_k = (pi ** n / factorial(n)) * uu ** n
    total = float((2.0 ** n) * vol_k[-1])
    length = float(arc[-1])
    if center == "south":
        r_of_x = arc
        r = arc
        vball = (2.0 ** n) * vol_k
    else:
        r_of_x = length - arc
        r = (length - arc)[::-1]
        vball = (total - (2.0 ** n) * vol_k)[::-1]
    table = SymmetricGeodesicTable(center=center, x=x, r_of_x=r_of_x,
                                   r=np.ascontiguousarray(r),
                                   ball_volume=np.maximum(
                                       np.ascontiguousarray(vball), 0.0),
                                   diameter=length, total_volume=total)
    if np.any(np.diff(table.ball_volume) < -1e-10 * total):
        raise AsymmetryDetectedError("ball volume table not monotone")
    return table
