"""Q-tensor values: encodings, eigen-analysis, biaxiality and boundary data.

Tensors are plain ``numpy`` arrays of shape ``(..., 3, 3)``; every function
here broadcasts over leading axes.  Two encodings are used elsewhere in the
package:

* ``Vec6`` -- components ``(Q11, Q22, Q33, Q12, Q13, Q23)``, the ordering
  used by the Fourier symbol of the adjoint operator.
* ``Vec5`` -- coefficients in the orthonormal traceless basis ``E1..E5``
  (see :data:`TRACELESS_BASIS`), used for the finite element unknowns.  The
  basis is orthonormal for the Frobenius product, so ``|a|_2 == |Q|_F``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

#: Index pairs of the Vec6 ordering (0-based).
VEC6_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

E_Z = np.array([0.0, 0.0, 1.0])

_S2 = np.sqrt(2.0)
_S6 = np.sqrt(6.0)

TRACELESS_BASIS = np.array(
    [
        [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
        [[-1, 0, 0], [0, -1, 0], [0, 0, 2]],
        [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
        [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
        [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
    ],
    dtype=float,
) / np.array([_S2, _S6, _S2, _S2, _S2])[:, None, None]

#: Far-field state ``e_z (x) e_z - I/3`` (with s_* = 1).
Q_INF = np.outer(E_Z, E_Z) - np.eye(3) / 3.0


class EigenSystem(NamedTuple):
    """Eigenvalues sorted descending, eigenvectors stored as columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def director(self) -> np.ndarray:
        return self.vectors[..., :, 0]


def symmetrize(Q):
    Q = np.asarray(Q, dtype=float)
    return 0.5 * (Q + np.swapaxes(Q, -1, -2))


def to_vec6(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    return np.stack([Q[..., i, j] for i, j in VEC6_PAIRS], axis=-1)


def from_vec6(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    Q = np.empty(v.shape[:-1] + (3, 3))
    for c, (i, j) in enumerate(VEC6_PAIRS):
        Q[..., i, j] = v[..., c]
        Q[..., j, i] = v[..., c]
    return Q


def to_vec5(Q) -> np.ndarray:
    """Project onto the traceless basis (exact for traceless input)."""
    return np.einsum("...ij,aij->...a", np.asarray(Q, dtype=float), TRACELESS_BASIS)


def from_vec5(a) -> np.ndarray:
    Q = np.einsum("...a,aij->...ij", np.asarray(a, dtype=float), TRACELESS_BASIS)
    Q[..., 2, 2] = -(Q[..., 0, 0] + Q[..., 1, 1])  # trace exactly zero in floating point
    return Q


def frobenius(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    return np.sqrt(np.einsum("...ij,...ij->...", Q, Q))


def uniaxial_from_director(m, s: float = 1.0) -> np.ndarray:
    """Return ``s (m (x) m - I/3)`` for a unit vector ``m``."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(np.linalg.norm(m, axis=-1) - 1.0) > 1e-12):
        raise ValueError("director must be a unit vector")
    return s * (np.einsum("...i,...j->...ij", m, m) - np.eye(3) / 3.0)


def boundary_data(p) -> np.ndarray:
    """Shifted Dirichlet data ``nu (x) nu - e_z (x) e_z`` on the unit sphere.

    This is ``Q_b - Q_inf`` with ``nu = p``; it is traceless.
    """
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > 1e-9):
        raise ValueError("boundary_data expects points on the unit sphere")
    return np.einsum("...i,...j->...ij", p, p) - np.outer(E_Z, E_Z)


def biaxiality(Q) -> np.ndarray:
    """``1 - 6 tr(Q^3)^2 / tr(Q^2)^3`` clamped to [0, 1]; 0 for Q ~ 0."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    t2 = np.trace(Q2, axis1=-2, axis2=-1)
    t3 = np.einsum("...ij,...ji->...", Q2, Q)
    small = np.sqrt(np.maximum(t2, 0.0)) < 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = 1.0 - 6.0 * t3**2 / np.where(small, 1.0, t2) ** 3
    beta = np.where(small, 0.0, beta)
    out = np.clip(beta, 0.0, 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# eigen-solver
# ---------------------------------------------------------------------------

_DISC_TOL = 1e-13


def _jacobi(A: np.ndarray, sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi for one symmetric 3x3 matrix."""
    A = A.copy()
    V = np.eye(3)
    for _ in range(sweeps):
        off = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
        if off <= 1e-30 * max(np.sum(A * A), 1e-300):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if A[p, q] == 0.0:
                continue
            theta = 0.5 * np.arctan2(2.0 * A[p, q], A[q, q] - A[p, p])
            c, s = np.cos(theta), np.sin(theta)
            J = np.eye(3)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            V = V @ J
    return np.diag(A).copy(), V


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # first component with |c| > 1e-12 made positive, per column
    big = np.abs(V) > 1e-12
    first = np.argmax(big, axis=-2)
    lead = np.take_along_axis(V, first[..., None, :], axis=-2)[..., 0, :]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return V * sign[..., None, :]


def _eigvals_closed(A: np.ndarray):
    q = np.trace(A, axis1=-2, axis2=-1) / 3.0
    B = A - q[..., None, None] * np.eye(3)
    p = np.sqrt(np.einsum("...ij,...ij->...", B, B) / 6.0)
    safe = np.where(p > 0.0, p, 1.0)
    r = np.linalg.det(B / safe[..., None, None]) / 2.0
    r = np.where(p > 0.0, np.clip(r, -1.0, 1.0), 1.0)
    phi = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(phi)
    l3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3
    return np.stack([l1, l2, l3], axis=-1), 1.0 - r * r, p


def _null_vector(M: np.ndarray) -> np.ndarray:
    """Unit vector spanning the kernel of rank-2 symmetric matrices ``M``."""
    c = np.stack(
        [np.cross(M[..., 0, :], M[..., 1, :]),
         np.cross(M[..., 0, :], M[..., 2, :]),
         np.cross(M[..., 1, :], M[..., 2, :])],
        axis=-2,
    )
    n = np.linalg.norm(c, axis=-1)
    best = np.argmax(n, axis=-1)
    v = np.take_along_axis(c, best[..., None, None], axis=-2)[..., 0, :]
    return v / np.take_along_axis(n, best[..., None], axis=-1)


def eigen(Q) -> EigenSystem:
    """Eigen-decomposition of symmetric 3x3 matrices, eigenvalues descending.

    Eigenvalues come from the trigonometric closed form.  The most isolated
    eigenvector is taken from a cross product of rows of ``Q - lambda I``;
    the remaining pair comes from an exact 2x2 rotation in its orthogonal
    complement.  Matrices whose normalized cubic discriminant is below
    ``1e-13`` (a repeated eigenvalue) go to cyclic Jacobi instead.  Each
    eigenvector's first non-negligible component is positive.
    """
    A = symmetrize(Q)
    single = A.ndim == 2
    A = A.reshape(-1, 3, 3)
    lam, disc, p = _eigvals_closed(A)
    degenerate = (disc < _DISC_TOL) | (p == 0.0)
    vals = np.empty_like(lam)
    vecs = np.empty_like(A)

    ok = ~degenerate
    if np.any(ok):
        Ao, lo = A[ok], lam[ok]
        top_isolated = (lo[:, 0] - lo[:, 1]) >= (lo[:, 1] - lo[:, 2])
        s = np.where(top_isolated, 0, 2)
        ls = lo[np.arange(len(lo)), s]
        vs = _null_vector(Ao - ls[:, None, None] * np.eye(3))
        # orthonormal complement (u, w) of vs
        helper = np.where(np.abs(vs[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
        u = np.cross(vs, helper)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        w = np.cross(vs, u)
        a = np.einsum("ni,nij,nj->n", u, Ao, u)
        b = np.einsum("ni,nij,nj->n", u, Ao, w)
        d = np.einsum("ni,nij,nj->n", w, Ao, w)
        theta = 0.5 * np.arctan2(2.0 * b, a - d)
        c, sn = np.cos(theta), np.sin(theta)
        e_hi = c[:, None] * u + sn[:, None] * w  # eigenvalue (a+d)/2 + ...
        e_lo = -sn[:, None] * u + c[:, None] * w
        m = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        V = np.empty((len(lo), 3, 3))
        L = np.empty((len(lo), 3))
        # isolated top: columns (vs, e_hi, e_lo); isolated bottom: (e_hi, e_lo, vs)
        V[:, :, 0] = np.where(top_isolated[:, None], vs, e_hi)
        V[:, :, 1] = np.where(top_isolated[:, None], e_hi, e_lo)
        V[:, :, 2] = np.where(top_isolated[:, None], e_lo, vs)
        L[:, 0] = np.where(top_isolated, ls, m + rad)
        L[:, 1] = np.where(top_isolated, m + rad, m - rad)
        L[:, 2] = np.where(top_isolated, m - rad, ls)
        vals[ok] = L
        vecs[ok] = V

    for idx in np.flatnonzero(degenerate):
        w_, V_ = _jacobi(A[idx])
        order = np.argsort(-w_, kind="stable")
        vals[idx] = w_[order]
        vecs[idx] = V_[:, order]

    vecs = _fix_signs(vecs)
    if single:
        return EigenSystem(vals[0], vecs[0])
    shape = np.shape(Q)[:-2]
    return EigenSystem(vals.reshape(shape + (3,)), vecs.reshape(shape + (3, 3)))
