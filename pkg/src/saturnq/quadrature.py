"""Product Gauss-Legendre x trapezoid quadrature on spheres."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes on the unit sphere and positive weights summing to 4 pi.

    With ``n_theta`` Gauss points in ``cos(theta)`` and ``n_phi`` uniform
    azimuths the rule integrates spherical harmonics of degree
    ``< min(2 n_theta, n_phi)`` exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    n_theta: int
    n_phi: int

    @property
    def exact_degree(self) -> int:
        return min(2 * self.n_theta - 1, self.n_phi - 1)

    def integrate(self, values) -> np.ndarray:
        """Integrate nodal values (leading axis = node) over the unit sphere."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def scaled(self, radius: float, center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on the sphere of given radius and centre."""
        return (
            np.asarray(center, dtype=float) + radius * self.points,
            self.weights * radius**2,
        )


def build_quadrature(n_theta: int, n_phi: int) -> SphereQuadrature:
    if n_theta < 2 or n_phi < 4:
        raise ValueError("need n_theta >= 2 and n_phi >= 4")
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t, phi, indexing="ij")
    S = np.sqrt(1.0 - T * T)
    pts = np.stack([S * np.cos(P), S * np.sin(P), T], axis=-1).reshape(-1, 3)
    w = np.repeat(wt * (2.0 * np.pi / n_phi), n_phi)
    return SphereQuadrature(pts, w, n_theta, n_phi)
