"""Closed-form solution of the shifted problem for k = 0.

With ``k = 0`` the system decouples into six Laplace problems.  The boundary
data ``nu (x) nu - e_z (x) e_z`` splits into the degree-two solid harmonic
``H(x) = x (x) x - |x|^2 I / 3`` restricted to the sphere plus the constant
``I/3 - e_z (x) e_z``, so each piece extends harmonically by a radial factor:

* exterior of the unit ball:  ``H(x) r^-5 + (I/3 - e_z e_z) r^-1``
* shell ``1 < r < R`` with zero data at ``r = R``:
  ``H(x) (r^-5 - R^-5)/(1 - R^-5) + (I/3 - e_z e_z)(r^-1 - R^-1)/(1 - R^-1)``
"""
from __future__ import annotations

import numpy as np

from .operators import N_from_gradient
from .qtensor import E_Z, Q_INF

_CONST = np.eye(3) / 3.0 - np.outer(E_Z, E_Z)


def harmonic_solution(p, outer_radius: float | None = None) -> np.ndarray:
    """Shifted field ``Q - Q_inf`` at points ``p`` (``(..., 3)``, may be complex)."""
    p = np.asarray(p)
    r2 = np.einsum("...i,...i->...", p, p)
    r = np.sqrt(r2)
    H = np.einsum("...i,...j->...ij", p, p) - (r2 / 3.0)[..., None, None] * np.eye(3)
    if outer_radius is None:
        g2, g0 = r**-5, 1.0 / r
    else:
        R = float(outer_radius)
        g2 = (r**-5 - R**-5) / (1.0 - R**-5)
        g0 = (1.0 / r - 1.0 / R) / (1.0 - 1.0 / R)
    return H * g2[..., None, None] + _CONST * g0[..., None, None]


def harmonic_gradient(p, outer_radius: float | None = None) -> np.ndarray:
    """``G[..., i, j, l] = d_l Q_ij`` by complex step."""
    p = np.asarray(p, dtype=float)
    h = 1e-30
    out = []
    for l in range(3):
        pc = p.astype(complex)
        pc[..., l] += 1j * h
        out.append(harmonic_solution(pc, outer_radius).imag / h)
    return np.stack(out, axis=-1)


def harmonic_neumann(p, outer_radius: float | None = None, normal_sign: float = -1.0) -> np.ndarray:
    """``N(Q)`` of the oracle at sphere points ``p`` with ``nu = normal_sign * p/|p|``.

    The default ``-1`` is the outward normal of the exterior domain on the
    unit sphere; use ``+1`` on an outer truncation sphere.
    """
    p = np.asarray(p, dtype=float)
    nu = normal_sign * p / np.linalg.norm(p, axis=-1, keepdims=True)
    return N_from_gradient(harmonic_gradient(p, outer_radius), nu, 0.0)


def equatorial_ring_radius(outer_radius: float | None = None) -> float:
    """Radius where the two leading eigenvalues of the full Q exchange on the equator.

    For the unbounded exterior this is the real root of ``rho^3 = rho^2 + 1``.
    """
    from scipy.optimize import brentq

    def gap(rho):
        full = harmonic_solution(np.array([rho, 0.0, 0.0]), outer_radius) + Q_INF
        return full[0, 0] - full[2, 2]

    return float(brentq(gap, 1.0 + 1e-9, 5.0))
