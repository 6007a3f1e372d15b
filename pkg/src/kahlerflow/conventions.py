"""Single authority for the Kahler <-> Riemannian convention map.

The Riemannian metric of a Kahler metric g is ds^2 = 2g.  Consequences
(used by the distance/volume/entropy modules and asserted in tests):

    R_riem      = 2 R
    Lap_riem    = 2 Lap
    |grad f|^2_riem = 2 |grad f|^2
    sigma       = 2 tau    (entropy scale parameters)
    dV_riem     = 2^n dV_Kahler

The unnormalized surface Ricci flow convention dg/dt = -R g (real dimension
two) runs at twice the KRF speed: t_surface = t_KRF / 2.
"""

from __future__ import annotations

import numpy as np


def riemannian_scalar(r_kahler):
    return 2.0 * np.asarray(r_kahler)


def riemannian_laplacian(lap_kahler):
    return 2.0 * np.asarray(lap_kahler)


def riemannian_grad_sq(grad_sq_kahler):
    return 2.0 * np.asarray(grad_sq_kahler)


def sigma_of_tau(tau):
    return 2.0 * tau


def tau_of_sigma(sigma):
    return 0.5 * sigma


def riemannian_volume(vol_kahler, complex_dim):
    return (2.0 ** complex_dim) * vol_kahler


def surface_time_of_krf(t_krf):
    return 0.5 * np.asarray(t_krf)


def surface_law_residual(traj) -> np.ndarray:
    """Residual of dR/dt = Lap R + R^2 in surface (Riemannian) variables.

    Maps a stored KRF trajectory through the factor map (R -> 2R,
    Lap -> 2 Lap, t -> t/2) and evaluates the semilinear surface law; equals
    4x the Kahler (2.10) residual, so it vanishes at the same O(dt^2) rate.
    """
    from .flow import _time_derivative
    from .geometry import radial_laplacian

    if traj.lam != 0.0:
        raise ValueError("the surface law applies to the unnormalized flow")
    t_surface = surface_time_of_krf(traj.times)
    r_surface = riemannian_scalar(traj.r_profiles)
    rdot = _time_derivative(r_surface, t_surface)
    res = []
    for i in range(len(traj.times)):
        lap_k = radial_laplacian(traj.grid, traj.u_profiles[i],
                                 traj.r_profiles[i])
        lap_surface = riemannian_laplacian(2.0 * lap_k)
        res.append(np.max(np.abs(rdot[i] - lap_surface - r_surface[i] ** 2)))
    return np.array(res)
