"""Sample grids and differentiation backends.

Two chart families cover every model geometry in scope:

* ``PeriodicChart`` -- a flat torus chart in complex dimension 1 or 2 with
  coordinates z^k = x^k + i y^k on [0, 2pi)^{2n}.  Derivatives come from an
  FFT backend and an order-12 central finite-difference backend.

* ``RadialGrid`` -- a U(n)-invariant profile grid for CP^n.  The radial
  log-coordinate s = log|z|^2 is compactified through x = tanh(s/2) onto
  [-1, 1] and sampled at Chebyshev-Lobatto nodes, so smooth metrics on CP^n
  correspond exactly to profiles smooth in x (the poles sit at x = -1 and
  x = +1).  Derivatives come from the global Chebyshev collocation matrix
  and from local polynomial stencils as the independent second backend.

Every derivative-based quantity downstream is computed with both backends
and cross-checked; ``backend`` arguments accept "spectral", "fd" or "both".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BackendDisagreementError

TOPOLOGY_PERIODIC = "periodic-chart"
TOPOLOGY_RADIAL_CPN = "radial-cpn"
TOPOLOGY_SPHERE = "full-sphere-profile"

# Test hook: additive fault injected into the FD backend output (see
# runner.verify_identities fault-injection path).  Zero in normal operation.
_FD_FAULT = 0.0


def set_fd_fault(value):
    global _FD_FAULT
    _FD_FAULT = float(value)


# ----------------------------------------------------------------------------
# Chebyshev helpers (Lobatto nodes, ascending order)
# ----------------------------------------------------------------------------

def cheb_nodes(n):
    """Chebyshev-Lobatto nodes x_j = -cos(j pi / n), ascending, j = 0..n."""
    return -np.cos(np.pi * np.arange(n + 1) / n)


def cheb_diff_matrix(x):
    """Spectral differentiation matrix from barycentric weights.

    Works for any distinct node set; for Chebyshev-Lobatto nodes this is the
    classical collocation matrix (negative-sum-trick diagonal).
    """
    n = len(x) - 1
    w = np.ones(n + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def cheb_diff2_matrix(x, d1=None):
    """Second-derivative collocation matrix via the barycentric recursion.

    D2_ij = 2 D1_ij (D1_ii - 1/(x_i - x_j)) for i != j keeps roundoff far
    below the naive D1 @ D1 product.
    """
    if d1 is None:
        d1 = cheb_diff_matrix(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d2 = 2.0 * d1 * (np.diag(d1)[:, None] - 1.0 / dx)
    np.fill_diagonal(d2, 0.0)
    np.fill_diagonal(d2, -d2.sum(axis=1))
    return d2


def clenshaw_curtis_weights(n):
    """Clenshaw-Curtis quadrature weights on ascending Lobatto nodes.

    Exact for polynomials of degree n (n even); weights are strictly
    positive and sum to 2, the reference length of [-1, 1].
    """
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(n * theta[ii]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / n
    return w[::-1].copy()  # symmetric anyway; keep ascending convention


def local_diff_matrix(x, npts=9, deriv=1):
    """Derivative matrix from sliding local polynomial stencils.

    Independent of the global spectral matrix: each row uses only ``npts``
    neighbouring nodes, so its truncation error is O(h^{npts-deriv}) local.
    """
    from math import factorial

    n = len(x)
    half = npts // 2
    mat = np.zeros((n, n))
    for i in range(n):
        lo = min(max(i - half, 0), n - npts)
        idx = np.arange(lo, lo + npts)
        dx = x[idx] - x[i]
        # Solve V^T w = e_deriv * deriv! for the stencil weights.
        v = np.vander(dx, npts, increasing=True).T
        rhs = np.zeros(npts)
        rhs[deriv] = factorial(deriv)
        mat[i, idx] = np.linalg.solve(v, rhs)
    return mat


def cheb_value_coeff_matrices(n):
    """Matrices mapping ascending-node values <-> Chebyshev coefficients."""
    j = np.arange(n + 1)
    cosmat = np.cos(np.pi * np.outer(j, j) / n)  # descending-node evaluation
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    to_coeff = (2.0 / n) * cosmat / np.outer(c, c)
    return to_coeff, cosmat


def barycentric_weights(x):
    w = np.ones(len(x))
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_interp(x, values, xq, bw=None):
    """Stable barycentric interpolation from Lobatto nodes to query points."""
    if bw is None:
        bw = barycentric_weights(x)
    xq = np.asarray(xq, dtype=float)
    out = np.empty(xq.shape + values.shape[1:], dtype=values.dtype)
    diff = xq[..., None] - x  # (..., n+1)
    exact = np.isclose(diff, 0.0, atol=1e-15)
    safe = np.where(exact, 1.0, diff)
    wts = bw / safe
    denom = wts.sum(axis=-1)
    num = np.tensordot(wts, values, axes=(-1, 0))
    out = num / denom[..., None] if values.ndim > 1 else num / denom
    hit = exact.any(axis=-1)
    if np.any(hit):
        idx = exact.argmax(axis=-1)
        out[hit] = values[idx[hit]]
    return out


def cubic_interp(xs, ys, xq):
    """Cubic Hermite interpolation on a dense monotone table (O(h^4))."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    slopes = np.gradient(ys, xs)
    xq = np.clip(np.asarray(xq, dtype=float), xs[0], xs[-1])
    i = np.clip(np.searchsorted(xs, xq) - 1, 0, len(xs) - 2)
    h = xs[i + 1] - xs[i]
    t = (xq - xs[i]) / h
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * ys[i] + h10 * h * slopes[i] + h01 * ys[i + 1] + h11 * h * slopes[i + 1]


def regularized_ratio(num, den, num_x, den_x, eps=1e-13):
    """Pointwise num/den with l'Hopital patching where den ~ 0.

    Used for the pole limits of radial formulas, where numerator and
    denominator vanish together by smoothness.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    small = np.abs(den) < eps * (1.0 + np.max(np.abs(den)))
    safe = np.where(small, 1.0, den)
    out = num / safe
    if np.any(small):
        out = np.where(small, np.asarray(num_x) / np.asarray(den_x), out)
    return out


# ----------------------------------------------------------------------------
# Chart grids
# ----------------------------------------------------------------------------

@dataclass
class ProfileClosure:
    """Asymptotic smoothness orders of a radial profile at the two poles.

    Order k means the profile approaches its limit like e^{-k|s|}; k = 1 is
    the generic smooth closure over the poles of CP^n.
    """

    order_zero: int = 1
    order_infinity: int = 1


class ChartGrid:
    """Base class: sample nodes plus positive quadrature weights."""

    topology = None
    complex_dim = None

    @property
    def reference_volume(self):
        return float(np.sum(self.weights))


class RadialGrid(ChartGrid):
    """Compactified radial collocation grid for U(n)-invariant CP^n metrics.

    x = tanh(s/2) with s = log|z|^2; Lobatto nodes in x; the poles are the
    endpoint nodes.  d/ds = ((1 - x^2)/2) d/dx vanishes at the poles, which
    encodes the smooth closure there.
    """

    def __init__(self, n, complex_dim=1, topology=TOPOLOGY_RADIAL_CPN,
                 closure=None, fd_points=9):
        if complex_dim not in (1, 2):
            raise ValueError("complex dimension must be 1 or 2")
        if topology not in (TOPOLOGY_RADIAL_CPN, TOPOLOGY_SPHERE):
            raise ValueError(f"unsupported radial topology {topology!r}")
        self.n = int(n)
        self.complex_dim = complex_dim
        self.topology = topology
        self.closure = closure or ProfileClosure()
        self.x = cheb_nodes(self.n)
        with np.errstate(divide="ignore"):
            self.s = 2.0 * np.arctanh(np.clip(self.x, -1.0, 1.0))
        self.weights = clenshaw_curtis_weights(self.n)
        self.d1 = cheb_diff_matrix(self.x)
        self.d2 = cheb_diff2_matrix(self.x, self.d1)
        npts = min(fd_points, self.n + 1)
        self.d1_fd = local_diff_matrix(self.x, npts=npts, deriv=1)
        self.d2_fd = local_diff_matrix(self.x, npts=npts, deriv=2)
        self._to_coeff, self._from_coeff = cheb_value_coeff_matrices(self.n)
        self._bw = barycentric_weights(self.x)

    @property
    def nodes(self):
        return self.x

    def dx(self, values, backend="spectral", order=1):
        mat = {("spectral", 1): self.d1, ("spectral", 2): self.d2,
               ("fd", 1): self.d1_fd, ("fd", 2): self.d2_fd}[(backend, order)]
        out = mat @ values
        if backend == "fd" and _FD_FAULT:
            out = out + _FD_FAULT
        return out

    def ds(self, values, backend="spectral"):
        """d/ds = ((1 - x^2)/2) d/dx; zero at the poles by construction."""
        return 0.5 * (1.0 - self.x ** 2) * self.dx(values, backend)

    def antiderivative(self, values):
        """Spectral antiderivative in x, anchored to zero at x = -1."""
        coeffs = self._to_coeff @ values[::-1]
        anti = np.polynomial.chebyshev.chebint(coeffs)
        vals = np.polynomial.chebyshev.chebval(self.x, anti)
        return vals - vals[0]

    def interp(self, values, xq):
        return barycentric_interp(self.x, values, xq, self._bw)

    def __repr__(self):
        return (f"RadialGrid(n={self.n}, complex_dim={self.complex_dim}, "
                f"topology={self.topology!r})")


def fd_central_weights(deriv, acc):
    """Central finite-difference weights of the given accuracy order.

    A symmetric stencil of half-width p is accurate to order 2p for both the
    first and the second derivative, so p = ceil(acc / 2).
    """
    from math import factorial

    p = (acc + 1) // 2
    offsets = np.arange(-p, p + 1)

    v = np.vander(offsets.astype(float), len(offsets), increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[deriv] = factorial(deriv)
    return offsets, np.linalg.solve(v, rhs)


class PeriodicChart(ChartGrid):
    """Flat torus chart [0, 2pi)^{2n} with z^k = x^k + i y^k.

    Real axes are ordered (x^1..x^n, y^1..y^n).  The background metric is
    g_{ij} = delta_ij (class tag "flat-torus").
    """

    topology = TOPOLOGY_PERIODIC

    def __init__(self, nodes_per_axis, complex_dim=1, fd_order=12):
        if complex_dim not in (1, 2):
            raise ValueError("complex dimension must be 1 or 2")
        self.complex_dim = complex_dim
        self.n_axis = int(nodes_per_axis)
        self.fd_order = int(fd_order)
        self.h = 2.0 * np.pi / self.n_axis
        axis = np.arange(self.n_axis) * self.h
        self.axes = [axis] * (2 * complex_dim)
        self.shape = (self.n_axis,) * (2 * complex_dim)
        k = np.fft.fftfreq(self.n_axis, d=1.0 / self.n_axis)
        self._ik = 1j * k
        self._offsets, self._w1 = fd_central_weights(1, self.fd_order)
        _, self._w2 = fd_central_weights(2, self.fd_order)
        self.weights = np.full(self.shape, self.h ** (2 * complex_dim))

    @property
    def nodes(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def coordinate(self, axis):
        """Broadcastable coordinate array along a real axis."""
        shape = [1] * (2 * self.complex_dim)
        shape[axis] = self.n_axis
        return self.axes[axis].reshape(shape)

    def _fft_deriv(self, values, axis, order):
        spec = np.fft.fft(values, axis=axis)
        mult = self._ik ** order
        shape = [1] * values.ndim
        shape[axis] = self.n_axis
        return np.fft.ifft(spec * mult.reshape(shape), axis=axis)

    def _fd_deriv(self, values, axis, order):
        w = self._w1 if order == 1 else self._w2
        out = np.zeros_like(values, dtype=complex)
        for off, wt in zip(self._offsets, w):
            if wt != 0.0:
                out += wt * np.roll(values, -int(off), axis=axis)
        out /= self.h ** order
        if _FD_FAULT:
            out = out + _FD_FAULT
        return out

    def dreal(self, values, axis, backend="spectral", order=1):
        """Derivative along a real axis (axis < 2n)."""
        if backend == "spectral":
            return self._fft_deriv(values, axis, order)
        return self._fd_deriv(values, axis, order)

    def dz(self, values, k, backend="spectral"):
        """Wirtinger derivative d/dz^k = (d/dx^k - i d/dy^k)/2."""
        n = self.complex_dim
        return 0.5 * (self.dreal(values, k, backend)
                      - 1j * self.dreal(values, n + k, backend))

    def dzbar(self, values, k, backend="spectral"):
        """d/dzbar^k = (d/dx^k + i d/dy^k)/2."""
        n = self.complex_dim
        return 0.5 * (self.dreal(values, k, backend)
                      + 1j * self.dreal(values, n + k, backend))

    def integrate(self, values):
        return complex(np.sum(values)) * self.h ** (2 * self.complex_dim)

    def __repr__(self):
        return (f"PeriodicChart(n_axis={self.n_axis}, "
                f"complex_dim={self.complex_dim})")


def cross_check(label, a, b, tol):
    """Raise BackendDisagreement if two backend results differ beyond tol."""
    diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0
    if not np.isfinite(diff) or diff > tol:
        raise BackendDisagreementError(label, diff, tol)
    return diff
