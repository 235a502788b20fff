"""Boundary representation formula for the shifted exterior problem.

For a point ``p`` in the exterior domain and each index pair ``(m, n)``::

    (2 - delta_mn) Q_mn(p) = - int <F^mn_p, N(Q)> dS - int <L(F^mn_p), Q> dS

over the unit sphere, with ``nu`` the outward normal of the exterior domain
(pointing into the colloid).  When the field lives on a truncated shell
``1 < |x| < R`` the outer sphere contributes the same two integrals with
``nu = x/R``; :class:`BoundaryData` carries that optional second boundary.

Kernel derivatives are exact (complex step), so quadrature is the only
discretisation in :func:`evaluate`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fundsol
from .operators import L_from_gradient
from .quadrature import SphereQuadrature, build_quadrature

log = logging.getLogger(__name__)

BoundaryFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_MARGIN = 0.2

__all__ = [
    "BoundaryData", "SphereQuadrature", "build_quadrature", "evaluate",
    "evaluate_raw", "evaluate_tensor", "evaluate_points", "recover_neumann",
    "NeumannRecovery",
]


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet and Neumann traces of the shifted field.

    ``dirichlet`` and ``neumann`` map an ``(n, 3)`` array of unit-sphere
    points to ``(n, 3, 3)`` tensors (``Q_b - Q_inf`` and ``N(Q)``).  For a
    truncated shell, ``outer_radius`` and ``outer_neumann`` describe the
    outer sphere; ``outer_dirichlet`` defaults to zero there.
    """

    dirichlet: BoundaryFn
    neumann: BoundaryFn
    outer_radius: float | None = None
    outer_neumann: BoundaryFn | None = None
    outer_dirichlet: BoundaryFn | None = None

    @classmethod
    def zero(cls) -> "BoundaryData":
        def z(pts):
            return np.zeros(np.shape(pts)[:-1] + (3, 3))

        return cls(z, z)


@dataclass(frozen=True)
class _Sampled:
    """Boundary traces sampled at quadrature nodes."""

    pts: np.ndarray
    w: np.ndarray
    nu: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray


def _sample(data: BoundaryData, quad: SphereQuadrature) -> list[_Sampled]:
    pts, w = quad.points, quad.weights
    out = [_Sampled(pts, w, -pts, np.asarray(data.dirichlet(pts)), np.asarray(data.neumann(pts)))]
    if data.outer_radius is not None:
        if data.outer_neumann is None:
            raise ValueError("outer_radius given without outer_neumann")
        R = float(data.outer_radius)
        opts, ow = quad.scaled(R)
        odir = (np.zeros((len(opts), 3, 3)) if data.outer_dirichlet is None
                else np.asarray(data.outer_dirichlet(opts)))
        out.append(_Sampled(opts, ow, quad.points.copy(), odir, np.asarray(data.outer_neumann(opts))))
    return out


def _check_point(p: np.ndarray, data: BoundaryData, margin: float) -> None:
    r = float(np.linalg.norm(p))
    if r < 1.0 + margin:
        raise ValueError(f"point at |p|={r:.4g} is within the margin {margin} of the colloid")
    if data.outer_radius is not None and r > data.outer_radius - margin:
        raise ValueError(f"point at |p|={r:.4g} is within the margin {margin} of the outer sphere")


def _raw(m: int, n: int, p: np.ndarray, sampled: list[_Sampled], k: float) -> float:
    total = 0.0
    for s in sampled:
        d = s.pts - p
        F = fundsol.fundamental(m, n, d, k)
        L = L_from_gradient(fundsol.fundamental_gradient(m, n, d, k), s.nu, k)
        integrand = np.einsum("qij,qij->q", F, s.neumann) + np.einsum("qij,qij->q", L, s.dirichlet)
        total -= float(s.w @ integrand)
    return total


def evaluate_raw(mn, p, data: BoundaryData, k: float, quad: SphereQuadrature | None = None,
                 margin: float = DEFAULT_MARGIN) -> float:
    """Right-hand side of the formula, i.e. ``(2 - delta_mn) Q_mn(p)``."""
    quad = quad or build_quadrature(64, 128)
    p = np.asarray(p, dtype=float)
    _check_point(p, data, margin)
    m, n = mn
    return _raw(m, n, p, _sample(data, quad), k)


def evaluate(mn, p, data: BoundaryData, k: float, quad: SphereQuadrature | None = None,
             margin: float = DEFAULT_MARGIN) -> float:
    """Component ``Q_mn(p)`` of the shifted field."""
    m, n = mn
    return evaluate_raw(mn, p, data, k, quad, margin) / (1.0 if m == n else 2.0)


def evaluate_points(points, data: BoundaryData, k: float, quad: SphereQuadrature | None = None,
                    margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Full tensors at each of ``points`` (``(n, 3)``); boundary data sampled once."""
    quad = quad or build_quadrature(64, 128)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    sampled = _sample(data, quad)
    out = np.empty((len(points), 3, 3))
    for a, p in enumerate(points):
        _check_point(p, data, margin)
        for m, n in fundsol.PAIRS:
            v = _raw(m, n, p, sampled, k) / (1.0 if m == n else 2.0)
            out[a, m - 1, n - 1] = v
            out[a, n - 1, m - 1] = v
    return out


def evaluate_tensor(p, data: BoundaryData, k: float, quad: SphereQuadrature | None = None,
                    margin: float = DEFAULT_MARGIN) -> np.ndarray:
    return evaluate_points(np.asarray(p, dtype=float)[None, :], data, k, quad, margin)[0]


# ---------------------------------------------------------------------------
# experimental: Neumann data from exterior collocation
# ---------------------------------------------------------------------------

@dataclass
class NeumannRecovery:
    """Result of :func:`recover_neumann`.

    ``values`` holds ``N(Q)`` at the quadrature nodes.  ``residual`` is the
    least-squares residual norm relative to the right-hand side norm.
    """

    values: np.ndarray
    residual: float
    rank: int
    n_unknowns: int
    condition: float
    singular_values: np.ndarray

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.n_unknowns


def recover_neumann(dirichlet: BoundaryFn, k: float, quad: SphereQuadrature, collocation,
                    reference: Callable[[np.ndarray], np.ndarray], rcond: float = 1e-4,
                    margin: float = DEFAULT_MARGIN) -> NeumannRecovery:
    """Least-squares Neumann trace that reproduces ``reference`` off the sphere.

    Imposes the representation formula at every collocation point (six
    equations each) with the Neumann values at the quadrature nodes as
    unknowns, expressed in the traceless basis because ``N(Q)`` is
    traceless.  At least six collocation points per node are required.
    ``reference(points)`` supplies the target tensors, e.g. a volume
    solution or the k = 0 oracle.

    The system is a first-kind integral equation and is badly conditioned,
    so it is solved by truncated SVD (``rcond``) for the unknowns
    ``sqrt(w) N``, which makes the minimum-norm solution the one of least
    L2 norm on the sphere.  Collocation points a little away from the
    sphere (|p| of 2 to 4) work best with coarse rules.  Uniqueness is not
    assumed: rank and condition number are reported, never asserted.
    """
    from .qtensor import TRACELESS_BASIS, from_vec5

    colloc = np.atleast_2d(np.asarray(collocation, dtype=float))
    nq = len(quad.points)
    if len(colloc) < 6 * nq:
        raise ValueError(f"need at least {6 * nq} collocation points (6 per node), got {len(colloc)}")
    data0 = BoundaryData(dirichlet, lambda x: np.zeros(np.shape(x)[:-1] + (3, 3)))
    sampled = _sample(data0, quad)[0]
    ref = np.asarray(reference(colloc))
    rows, rhs = [], []
    for c, p in enumerate(colloc):
        _check_point(p, data0, margin)
        d = sampled.pts - p
        for m, n in fundsol.PAIRS:
            F = fundsol.fundamental(m, n, d, k)
            proj = np.einsum("qij,aij->qa", F, TRACELESS_BASIS)
            # unknowns are sqrt(w) * N so the minimum-norm solution is L2-minimal
            rows.append((-np.sqrt(sampled.w)[:, None] * proj).ravel())
            dir_term = _raw(m, n, p, [sampled], k)  # Neumann part is zero in data0
            factor = 1.0 if m == n else 2.0
            rhs.append(factor * ref[c, m - 1, n - 1] - dir_term)
    A = np.array(rows)
    b = np.array(rhs)
    sol, _, rank, sv = np.linalg.lstsq(A, b, rcond=rcond)
    res = float(np.linalg.norm(A @ sol - b) / max(np.linalg.norm(b), 1e-300))
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if rank < A.shape[1]:
        log.info("collocation system truncated to rank %d of %d (cond %.3g)", rank, A.shape[1], cond)
    values = from_vec5(sol.reshape(nq, 5) / np.sqrt(sampled.w)[:, None])
    return NeumannRecovery(values, res, int(rank), A.shape[1], cond, sv)
