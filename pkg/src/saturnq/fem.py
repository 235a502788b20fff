"""P1 finite elements for the shifted problem on a shell mesh.

Unknowns are the five traceless-basis coefficients of ``Q - Q_inf`` at each
vertex, so ``tr Q = 0`` holds exactly and no multiplier field is needed.
The bilinear form is ``int grad Q : grad P + k Div Q . Div P``; for basis
functions ``lambda_i E_a`` its element matrix is::

    |T| (delta_ab g_i . g_j + k (E_a g_i) . (E_b g_j))

with ``g_i`` the constant gradient of ``lambda_i``.  All boundary vertices
are Dirichlet: ``nu (x) nu - e_z (x) e_z`` on the colloid, zero on the
outer sphere.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import INNER, OUTER, TetMesh
from .qtensor import Q_INF, TRACELESS_BASIS, boundary_data, from_vec5, to_vec5

log = logging.getLogger(__name__)

NC = 5  # unknowns per vertex
_CHUNK = 20000


class ConvergenceError(RuntimeError):
    """CG hit ``max_iter``; carries the residual history."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


class CheckpointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# element geometry
# ---------------------------------------------------------------------------

def p1_gradients(mesh: TetMesh, tets: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients ``(nt, 4, 3)`` and volumes ``(nt,)``.

    Raises ``ValueError`` naming the first degenerate tet.
    """
    tets = mesh.tets if tets is None else tets
    x = mesh.vertices[tets]
    J = np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1))  # columns are edges
    det = np.linalg.det(J)
    scale = np.max(np.abs(x[:, 1:] - x[:, :1]), axis=(1, 2)) ** 3
    bad = np.flatnonzero(~(np.abs(det) > 1e-12 * scale))
    if len(bad):
        raise ValueError(f"degenerate tet {int(bad[0])} (vertices {tets[bad[0]].tolist()})")
    inv = np.linalg.inv(J)  # rows are grad lambda_1..3
    G = np.empty((len(tets), 4, 3))
    G[:, 1:] = inv
    G[:, 0] = -inv.sum(axis=1)
    return G, np.abs(det) / 6.0


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _element_matrices(G: np.ndarray, vol: np.ndarray, k: float) -> np.ndarray:
    """``K[t, i, a, j, b]`` for one chunk."""
    GG = np.einsum("tid,tjd->tij", G, G)
    EG = np.einsum("arc,tic->tiar", TRACELESS_BASIS, G)  # (E_a g_i)_r
    K = np.einsum("tij,ab->tiajb", GG, np.eye(NC))
    if k != 0.0:
        K = K + k * np.einsum("tiar,tjbr->tiajb", EG, EG)
    return K * vol[:, None, None, None, None]


def assemble_stiffness(mesh: TetMesh, k: float) -> sp.csr_matrix:
    """Global matrix over all ``5 * n_vertices`` unknowns (dof = 5 v + a)."""
    if not k > -1.0:
        raise ValueError(f"k must exceed -1, got {k}")
    n = NC * mesh.n_vertices
    total = sp.csr_matrix((n, n))
    local = np.arange(NC)
    for start in range(0, mesh.n_tets, _CHUNK):
        tets = mesh.tets[start:start + _CHUNK]
        try:
            G, vol = p1_gradients(mesh, tets)
        except ValueError as exc:
            msg = str(exc).replace("degenerate tet ", "degenerate tet #")
            idx = int(msg.split("#")[1].split()[0]) + start
            raise ValueError(f"degenerate tet {idx} (vertices {mesh.tets[idx].tolist()})") from None
        Ke = _element_matrices(G, vol, k)
        dof = (NC * tets[:, :, None] + local).reshape(len(tets), -1)  # (t, 20)
        rows = np.repeat(dof, 4 * NC, axis=1).ravel()
        cols = np.tile(dof, (1, 4 * NC)).ravel()
        total = total + sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    # duplicate sums land in different orders for (r, c) and (c, r); averaging
    # with the transpose makes the matrix bitwise symmetric
    total = (0.5 * (total + total.T)).tocsr()
    total.sum_duplicates()
    return total


def default_dirichlet(points: np.ndarray, tags: np.ndarray) -> np.ndarray:
    """Shifted boundary values: colloid data on INNER, zero on OUTER."""
    out = np.zeros((len(points), 3, 3))
    inner = tags == INNER
    if np.any(inner):
        p = points[inner]
        out[inner] = boundary_data(p / np.linalg.norm(p, axis=1, keepdims=True))
    return out


@dataclass
class SparseSystem:
    """Reduced system ``A x = b`` over the free unknowns."""

    A: sp.csr_matrix
    b: np.ndarray
    free: np.ndarray  # global dof indices of the unknowns
    fixed: np.ndarray  # global dof indices of Dirichlet values
    fixed_values: np.ndarray
    K: sp.csr_matrix  # full matrix, kept for flux recovery
    k: float
    n_vertices: int

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Full coefficient vector from the free part."""
        c = np.empty(NC * self.n_vertices)
        c[self.free] = x
        c[self.fixed] = self.fixed_values
        return c


def _vertex_tags(mesh: TetMesh) -> np.ndarray:
    tags = np.zeros(mesh.n_vertices, dtype=np.int64)
    for tag in (OUTER, INNER):  # INNER wins on a shared vertex
        tags[mesh.boundary_vertices(tag)] = tag
    return tags


def assemble(mesh: TetMesh, k: float,
             dirichlet: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None) -> SparseSystem:
    """Assemble and eliminate Dirichlet unknowns.

    ``dirichlet(points, tags)`` returns the shifted boundary tensors at the
    boundary vertices; default :func:`default_dirichlet`.
    """
    dirichlet = default_dirichlet if dirichlet is None else dirichlet
    K = assemble_stiffness(mesh, k)
    bverts = mesh.dirichlet_vertices()
    vtags = _vertex_tags(mesh)
    values = to_vec5(np.asarray(dirichlet(mesh.vertices[bverts], vtags[bverts])))
    is_fixed = np.zeros(NC * mesh.n_vertices, dtype=bool)
    fixed = (NC * bverts[:, None] + np.arange(NC)).ravel()
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed)
    fixed_values = values.ravel()
    A = K[free][:, free].tocsr()
    b = -(K[free][:, fixed] @ fixed_values)
    return SparseSystem(A, b, free, fixed, fixed_values, K, float(k), mesh.n_vertices)


# ---------------------------------------------------------------------------
# conjugate gradients
# ---------------------------------------------------------------------------

@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    history: list[float]  # relative residual per iteration

    @property
    def residual(self) -> float:
        return self.history[-1]


def solve_cg(system: SparseSystem | sp.spmatrix, b: np.ndarray | None = None, tol: float = 1e-8,
             max_iter: int | None = None, preconditioner: str = "jacobi",
             x0: np.ndarray | None = None) -> CGResult:
    """Preconditioned CG to relative residual ``|b - A x| <= tol |b|``.

    ``preconditioner`` is ``"jacobi"`` or ``"none"``.  Raises
    :class:`ConvergenceError` after ``max_iter`` (default ``10 n``)
    iterations.
    """
    if isinstance(system, SparseSystem):
        A, b = system.A, system.b if b is None else b
    else:
        A = system
    b = np.asarray(b, dtype=float)
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    if preconditioner == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi preconditioner needs a positive diagonal")
        minv = 1.0 / d
    elif preconditioner == "none":
        minv = np.ones(n)
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, [0.0])
    r = b - A @ x
    history = [float(np.linalg.norm(r)) / bnorm]
    if history[-1] <= tol:
        return CGResult(x, 0, history)
    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise ConvergenceError(f"matrix not positive definite (p.Ap = {pAp:.3e})", history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        history.append(float(np.linalg.norm(r)) / bnorm)
        if history[-1] <= tol:
            log.debug("CG converged in %d iterations", it)
            return CGResult(x, it, history)
        z = minv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach {tol:g} in {max_iter} iterations (residual {history[-1]:.3e})", history)


# ---------------------------------------------------------------------------
# solution field
# ---------------------------------------------------------------------------

@dataclass
class QField:
    """Piecewise-linear shifted field ``Q - Q_inf`` over ``mesh``."""

    mesh: TetMesh
    coeffs: np.ndarray  # (nv, 5)
    k: float
    info: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return from_vec5(self.coeffs)

    @property
    def full(self) -> np.ndarray:
        return self.values + Q_INF

    def energy(self) -> float:
        return energy(self, self.mesh, self.k)


def energy(field_: QField | np.ndarray, mesh: TetMesh, k: float) -> float:
    """``int 1/2 |grad Q|^2 + k/2 |Div Q|^2`` (exact for P1)."""
    coeffs = field_.coeffs if isinstance(field_, QField) else np.asarray(field_)
    vals = from_vec5(coeffs) if coeffs.shape[-1] == NC else coeffs
    total = 0.0
    for start in range(0, mesh.n_tets, _CHUNK):
        tets = mesh.tets[start:start + _CHUNK]
        G, vol = p1_gradients(mesh, tets)
        grad = np.einsum("tiab,tic->tabc", vals[tets], G)  # d_c Q_ab
        div = np.einsum("tabb->ta", grad)
        dens = 0.5 * np.einsum("tabc,tabc->t", grad, grad) + 0.5 * k * np.einsum("ta,ta->t", div, div)
        total += float(vol @ dens)
    return total


def solve_exterior_problem(mesh: TetMesh, k: float, tol: float = 1e-8, max_iter: int | None = None,
                           preconditioner: str = "jacobi", x0: np.ndarray | None = None,
                           system: SparseSystem | None = None) -> QField:
    """Solve the shifted problem; ``info`` holds iterations, residual and energy."""
    system = assemble(mesh, k) if system is None else system
    res = solve_cg(system, tol=tol, max_iter=max_iter, preconditioner=preconditioner, x0=x0)
    coeffs = system.expand(res.x).reshape(-1, NC)
    out = QField(mesh, coeffs, float(k))
    out.info.update(iterations=res.iterations, residual=res.residual,
                    n_unknowns=len(system.free), energy=out.energy())
    log.info("k=%g: %d unknowns, CG %d its, energy %.6g", k, len(system.free),
             res.iterations, out.info["energy"])
    return out


# ---------------------------------------------------------------------------
# boundary flux
# ---------------------------------------------------------------------------

def boundary_mass(mesh: TetMesh, tag: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """P1 mass matrix of the tagged surface, restricted to its vertices."""
    faces = mesh.boundary_faces[mesh.boundary_tags == tag]
    verts = np.unique(faces)
    local = np.searchsorted(verts, faces)
    x = mesh.vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)
    m = (np.ones((3, 3)) + np.eye(3)) / 12.0
    data = (area[:, None, None] * m).ravel()
    rows = np.repeat(local, 3, axis=1).ravel()
    cols = np.tile(local, (1, 3)).ravel()
    M = sp.coo_matrix((data, (rows, cols)), shape=(len(verts), len(verts))).tocsr()
    return M, verts


def boundary_flux(field_: QField, system: SparseSystem, tag: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodal ``N(Q)`` on a tagged boundary, ``nu`` the outward normal of the shell.

    Uses the variational identity ``a(Q, phi) = -int <N(Q), phi>`` for
    traceless ``phi`` supported at the boundary: the residual of the full
    system at boundary unknowns, solved against the surface mass matrix.
    Returns ``(vertex_indices, tensors)``.
    """
    from scipy.sparse.linalg import spsolve

    c = field_.coeffs.ravel()
    resid = (system.K @ c).reshape(-1, NC)
    M, verts = boundary_mass(field_.mesh, tag)
    rhs = -resid[verts]
    vals = np.column_stack([spsolve(M.tocsc(), rhs[:, a]) for a in range(NC)])
    return verts, from_vec5(vals)


class SurfaceInterpolant:
    """P1 interpolation of nodal values on a tagged spherical surface.

    Query points are projected radially onto the polyhedral surface.
    """

    def __init__(self, mesh: TetMesh, tag: int, verts: np.ndarray, values: np.ndarray):
        from scipy.spatial import cKDTree

        self.faces = mesh.boundary_faces[mesh.boundary_tags == tag]
        self.corners = mesh.vertices[self.faces]
        lookup = np.full(mesh.n_vertices, -1)
        lookup[verts] = np.arange(len(verts))
        self.face_vals = np.asarray(values)[lookup[self.faces]]
        cent = self.corners.mean(axis=1)
        self.tree = cKDTree(cent / np.linalg.norm(cent, axis=1, keepdims=True))

    def _weights(self, d: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Barycentric weights of the ray ``t d`` in faces ``f`` (Cramer)."""
        a, b, c = (self.corners[f, i] for i in range(3))
        M = np.stack([a, b, c], axis=-1)  # columns
        lam = np.linalg.solve(M, d[..., None])[..., 0]
        return lam / lam.sum(axis=-1, keepdims=True)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        kq = min(12, len(self.faces))
        _, cand = self.tree.query(d, k=kq)
        cand = cand.reshape(len(d), kq)
        out = np.empty((len(d),) + self.face_vals.shape[2:])
        for q in range(len(d)):
            lam = self._weights(np.broadcast_to(d[q], (kq, 3)), cand[q])
            score = lam.min(axis=1)
            best = int(np.argmax(score))
            out[q] = np.tensordot(lam[best], self.face_vals[cand[q, best]], axes=(0, 0))
        return out


def neumann_interpolants(field_: QField, system: SparseSystem) -> dict[int, SurfaceInterpolant]:
    """Interpolated ``N(Q)`` on INNER and OUTER, ready for the representation formula."""
    out = {}
    for tag in (INNER, OUTER):
        verts, vals = boundary_flux(field_, system, tag)
        out[tag] = SurfaceInterpolant(field_.mesh, tag, verts, vals)
    return out


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(field_: QField, path) -> None:
    """CSV of vertex Vec5 coefficients with the mesh hash and k in the header."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# mesh_hash={field_.mesh.hash()}\n")
        fh.write(f"# k={field_.k!r}\n")
        w = csv.writer(fh)
        w.writerow(["vertex", "a1", "a2", "a3", "a4", "a5"])
        for i, row in enumerate(field_.coeffs.tolist()):
            w.writerow([i] + [repr(v) for v in row])


def load_checkpoint(path, mesh: TetMesh) -> QField:
    path = Path(path)
    meta: dict[str, str] = {}
    rows = []
    with path.open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            else:
                break
        reader = csv.reader([line] + fh.readlines())
        next(reader)
        for rec in reader:
            if rec:
                rows.append([float(v) for v in rec[1:]])
    if meta.get("mesh_hash") != mesh.hash():
        raise CheckpointError(f"{path}: checkpoint mesh hash {meta.get('mesh_hash')} "
                              f"does not match mesh {mesh.hash()}")
    coeffs = np.array(rows, dtype=float).reshape(-1, NC)
    if len(coeffs) != mesh.n_vertices:
        raise CheckpointError(f"{path}: {len(coeffs)} rows for {mesh.n_vertices} vertices")
    return QField(mesh, coeffs, float(meta.get("k", "nan")))
