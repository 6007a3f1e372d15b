"""Field containers: scalars, tensors, Hermitian metrics, curvature packs.

Components are stored with the grid's node axes leading and tensor index
axes trailing.  On radial grids components live at the representative point
z = (r, 0, ..) of each orbit, expressed in the chart (south z / north
w = 1/z, split at x = 0) in which they stay regular at the poles; the
per-node chart sign is recorded in ``charts``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonPositiveError
from .grids import ChartGrid, PeriodicChart, RadialGrid

POSITIVITY_FLOOR = 1e-10  # reject metrics with min eig < floor * median eig


@dataclass
class ScalarField:
    """Real or complex scalar samples on a chart grid."""

    grid: ChartGrid
    values: np.ndarray

    def max_imag(self):
        return float(np.max(np.abs(np.imag(self.values)))) if np.iscomplexobj(self.values) else 0.0

    def real(self):
        return ScalarField(self.grid, np.real(self.values))


@dataclass
class TensorField:
    """Covariant tensor with lower indices typed 'u' (unbarred) / 'b' (barred).

    ``index_types`` records the type of each trailing index axis in order,
    e.g. ('u', 'b', 'u', 'b') for the curvature tensor R_{i jbar k lbar}.
    The valence signature of the build contract is the pair of counts.
    """

    grid: ChartGrid
    index_types: tuple
    components: np.ndarray

    def __post_init__(self):
        self.index_types = tuple(self.index_types)
        if not set(self.index_types) <= {"u", "b"}:
            raise ValueError(f"bad index types {self.index_types}")
        n = self.grid.complex_dim
        expected = self._node_shape() + (n,) * len(self.index_types)
        if tuple(self.components.shape) != expected:
            raise ValueError(
                f"component shape {self.components.shape} does not match "
                f"index types {self.index_types} on {self.grid}"
            )

    def _node_shape(self):
        if isinstance(self.grid, PeriodicChart):
            return self.grid.shape
        return (len(self.grid.nodes),)

    @property
    def valence(self):
        """(number of unbarred, number of barred) lower indices."""
        return (self.index_types.count("u"), self.index_types.count("b"))


@dataclass
class HermitianMetricField:
    """Positive-definite Hermitian metric g_{i jbar} sampled per node."""

    grid: ChartGrid
    components: np.ndarray  # (*nodes, n, n) complex
    class_tag: str = ""
    profile: Optional[object] = None  # RadialProfile for radial charts
    charts: Optional[np.ndarray] = None  # per-node chart sign on radial grids

    def check_hermitian(self, tol=1e-12):
        g = self.components
        res = float(np.max(np.abs(g - np.conj(np.swapaxes(g, -1, -2)))))
        scale = float(np.max(np.abs(g)))
        if res > tol * max(scale, 1.0):
            raise ValueError(f"metric not Hermitian: residual {res:.3e}")
        return res

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.components)

    def check_positive(self, floor=POSITIVITY_FLOOR):
        eig = self.eigenvalues()
        emin = float(eig.min())
        cutoff = floor * float(np.median(eig))
        if emin <= cutoff:
            node = np.unravel_index(int(eig.min(axis=-1).argmin()),
                                    eig.shape[:-1])
            raise NonPositiveError(node, emin)
        return emin

    def inverse(self):
        """Pointwise g^{i jbar} = ((g_{i jbar})^{-1})^T.

        The transpose matters for complex off-diagonal components: with this
        convention g^{i lbar} g_{k lbar} = delta_{ik} summed over the barred
        index, as the contraction identities require.
        """
        n = self.components.shape[-1]
        if n == 1:
            return 1.0 / self.components
        a = self.components[..., 0, 0]
        b = self.components[..., 0, 1]
        c = self.components[..., 1, 0]
        d = self.components[..., 1, 1]
        det = a * d - b * c
        inv = np.empty_like(self.components)
        inv[..., 0, 0] = d / det
        inv[..., 0, 1] = -c / det
        inv[..., 1, 0] = -b / det
        inv[..., 1, 1] = a / det
        return inv

    def det(self):
        n = self.components.shape[-1]
        if n == 1:
            return self.components[..., 0, 0]
        return (self.components[..., 0, 0] * self.components[..., 1, 1]
                - self.components[..., 0, 1] * self.components[..., 1, 0])


@dataclass
class CurvaturePack:
    """Full curvature tensor plus traces and norms at each node.

    ``rm`` holds R_{i jbar k lbar} with index axes (i, j, k, l); ``ricci``
    holds R_{i jbar}; ``scalar``, ``norm_rm_sq`` and ``norm_rc_sq`` are real
    scalars per node.  ``frame`` optionally carries chart-independent frame
    scalars for radial grids.
    """

    grid: ChartGrid
    rm: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    norm_rm_sq: np.ndarray
    norm_rc_sq: np.ndarray
    frame: Optional[dict] = None

    def symmetry_residual(self):
        """Max violation of the i<->k, jbar<->lbar, pair and conjugation symmetries."""
        rm = self.rm
        scale = max(float(np.max(np.abs(rm))), 1.0)
        r_ik = np.max(np.abs(rm - np.swapaxes(rm, -4, -2)))
        r_jl = np.max(np.abs(rm - np.swapaxes(rm, -3, -1)))
        pair = np.max(np.abs(rm - np.moveaxis(rm, (-4, -3, -2, -1), (-2, -1, -4, -3))))
        conj = np.max(np.abs(rm - np.conj(np.moveaxis(rm, (-4, -3, -2, -1),
                                                      (-3, -4, -1, -2)))))
        return float(max(r_ik, r_jl, pair, conj)) / scale
