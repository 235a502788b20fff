"""Tetrahedral meshes of the shell 1 <= |x| <= R.

Two sources: a cubed-sphere generator (lattice points on the surface of the
cube [0, n]^3, mapped equiangularly to the sphere and extruded radially)
and a reader for Gmsh MSH 2.2 ASCII files.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

INNER = 1
OUTER = 2

_TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


class MeshFormatError(ValueError):
    """Unsupported or malformed mesh file."""


@dataclass(frozen=True)
class TetMesh:
    vertices: np.ndarray  # (nv, 3)
    tets: np.ndarray  # (nt, 4), positive orientation
    boundary_faces: np.ndarray  # (nf, 3)
    boundary_tags: np.ndarray  # (nf,) INNER or OUTER
    outer_radius: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.vertices, self.tets)

    def boundary_vertices(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_faces[self.boundary_tags == tag])

    def dirichlet_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_faces)

    def hash(self) -> str:
        """sha256 of vertex coordinates and connectivity."""
        if "hash" not in self._cache:
            h = hashlib.sha256()
            h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(self.tets, dtype="<i8").tobytes())
            self._cache["hash"] = h.hexdigest()
        return self._cache["hash"]

    def validate(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` if any structural invariant fails."""
        vol = self.volumes()
        if np.any(vol <= 0):
            bad = int(np.argmin(vol))
            raise ValueError(f"tet {bad} has non-positive volume {vol[bad]:.3e}")
        r = np.linalg.norm(self.vertices, axis=1)
        for tag, target in ((INNER, 1.0), (OUTER, self.outer_radius)):
            vs = self.boundary_vertices(tag)
            if len(vs) and np.max(np.abs(r[vs] - target)) > tol:
                raise ValueError(f"boundary tag {tag} vertex off the sphere |x|={target}")
        check_face_incidence(self)


def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    x = vertices[tets]
    return np.einsum("ni,ni->n", np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), x[:, 3] - x[:, 0]) / 6.0


def _face_keys(tets: np.ndarray) -> np.ndarray:
    faces = tets[:, _TET_FACES].reshape(-1, 3)
    return np.sort(faces, axis=1)


def check_face_incidence(mesh: TetMesh) -> None:
    """Boundary triangles bound exactly one tet; every other face exactly two."""
    keys = _face_keys(mesh.tets)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise ValueError(f"{int(np.sum(counts > 2))} faces shared by more than two tets")
    single = {tuple(f) for f in uniq[counts == 1]}
    bnd = {tuple(f) for f in np.sort(mesh.boundary_faces, axis=1)}
    if single != bnd:
        missing = len(single - bnd)
        extra = len(bnd - single)
        raise ValueError(f"face incidence mismatch: {missing} untagged exposed faces, "
                         f"{extra} tagged faces not on the boundary")


def dihedral_angles(mesh: TetMesh) -> np.ndarray:
    """All six dihedral angles of every tet, in degrees, shape ``(nt, 6)``."""
    x = mesh.vertices[mesh.tets]
    # outward-ish face normals (face opposite vertex i)
    normals = []
    for i in range(4):
        a, b, c = (x[:, j] for j in _TET_FACES[i])
        nrm = np.cross(b - a, c - a)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        s = np.sign(np.einsum("ni,ni->n", nrm, a - x[:, i]))
        normals.append(nrm * s[:, None])
    out = []
    for i in range(4):
        for j in range(i + 1, 4):
            cosang = -np.einsum("ni,ni->n", normals[i], normals[j])
            out.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return np.stack(out, axis=1)


def quality_report(mesh: TetMesh) -> dict:
    ang = dihedral_angles(mesh)
    vol = mesh.volumes()
    return {
        "n_vertices": mesh.n_vertices,
        "n_tets": mesh.n_tets,
        "min_dihedral_deg": float(ang.min()),
        "max_dihedral_deg": float(ang.max()),
        "min_volume": float(vol.min()),
        "total_volume": float(vol.sum()),
    }


# ---------------------------------------------------------------------------
# cubed-sphere generator
# ---------------------------------------------------------------------------

def _cube_surface(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-sphere vertices and triangles from the lattice surface of [0, n]^3."""
    index: dict[tuple[int, int, int], int] = {}
    pts: list[tuple[int, int, int]] = []

    def vid(a: int, b: int, c: int) -> int:
        key = (a, b, c)
        if key not in index:
            index[key] = len(pts)
            pts.append(key)
        return index[key]

    tris = []
    for axis in range(3):
        u_ax, v_ax = [d for d in range(3) if d != axis]
        for sign in (-1, 1):
            for i in range(n):
                for j in range(n):
                    corner = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        c = [0, 0, 0]
                        c[axis] = 0 if sign < 0 else n
                        c[u_ax] = i + di
                        c[v_ax] = j + dj
                        corner.append(vid(*c))
                    a, b, c, d = corner
                    tris.append((a, b, c))
                    tris.append((a, c, d))
    lattice = np.array(pts, dtype=float)
    xyz = np.tan(0.25 * np.pi * (2.0 * lattice / n - 1.0))
    xyz /= np.linalg.norm(xyz, axis=1, keepdims=True)
    return xyz, np.array(tris, dtype=np.int64)


def radial_layers(n_radial: int, R: float, grading: float) -> np.ndarray:
    """Radii ``1 = r_0 < ... < r_n = R`` with thickness ratio ``grading``."""
    if grading == 1.0:
        t = np.arange(n_radial + 1) / n_radial
    else:
        t = (grading ** np.arange(n_radial + 1) - 1.0) / (grading**n_radial - 1.0)
    r = 1.0 + (R - 1.0) * t
    r[-1] = R
    return r


def balanced_n_radial(n_surface: int, R: float = 10.0, grading: float | None = None,
                      max_layers: int = 200) -> int:
    """Layer count whose radial thicknesses best match the surface spacing.

    Minimises the worst ratio between a layer's thickness and the arc
    spacing ``r * (pi/2) / n_surface`` at its inner radius (either way
    round).  With ``grading=None`` the default grading of each candidate is
    used.  Matched layers keep dihedral angles away from zero.
    """
    best, best_score = 2, np.inf
    for nr in range(2, max_layers + 1):
        g = float(R ** (1.0 / nr)) if grading is None else grading
        r = radial_layers(nr, R, g)
        thick = np.diff(r)
        if np.any(thick <= 0):
            break
        spacing = r[:-1] * 0.5 * np.pi / n_surface
        score = float(np.max(np.maximum(thick / spacing, spacing / thick)))
        if score < best_score:
            best, best_score = nr, score
    return best


def cubed_sphere_shell(n_surface: int, n_radial: int, R: float = 10.0,
                       grading: float | None = None) -> TetMesh:
    """Cubed-sphere shell mesh.

    ``grading`` is the ratio between consecutive radial layer thicknesses.
    The default ``R ** (1 / n_radial)`` gives layers whose thickness grows
    in proportion to the radius, keeping cell aspect ratios uniform.  Each
    prism (surface triangle times radial layer) is split into three tets by
    the staircase rule on the global surface indices, so neighbouring
    prisms share conforming faces; the two prisms of a cube-surface quad
    make up the six tets of the hexahedral cell.
    """
    if n_surface < 2 or n_radial < 2:
        raise ValueError("need n_surface >= 2 and n_radial >= 2")
    if R <= 1.0:
        raise ValueError("outer radius must exceed 1")
    if grading is None:
        grading = float(R ** (1.0 / n_radial))
    if grading < 1.0:
        raise ValueError("grading must be >= 1")
    surf, tris = _cube_surface(n_surface)
    ns = len(surf)
    radii = radial_layers(n_radial, R, grading)
    vertices = (radii[:, None, None] * surf[None]).reshape(-1, 3)
    vertices[:ns] = surf
    vertices[-ns:] = R * surf

    s = np.sort(tris, axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    tets = []
    for layer in range(n_radial):
        lo, hi = layer * ns, (layer + 1) * ns
        tets.append(np.stack([a + lo, b + lo, c + lo, c + hi], axis=1))
        tets.append(np.stack([a + lo, b + lo, b + hi, c + hi], axis=1))
        tets.append(np.stack([a + lo, a + hi, b + hi, c + hi], axis=1))
    tets = np.concatenate(tets)
    vol = signed_volumes(vertices, tets)
    neg = vol < 0
    tets[neg] = tets[neg][:, [1, 0, 2, 3]]

    faces = np.concatenate([tris, tris + n_radial * ns])
    tags = np.concatenate([np.full(len(tris), INNER), np.full(len(tris), OUTER)])
    mesh = TetMesh(vertices, tets, faces, tags, float(R))
    log.debug("cubed-sphere shell: %d vertices, %d tets", mesh.n_vertices, mesh.n_tets)
    return mesh


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII
# ---------------------------------------------------------------------------

def _section(lines: list[str], name: str) -> list[str]:
    try:
        start = lines.index(f"${name}")
        end = lines.index(f"$End{name}", start)
    except ValueError:
        raise MeshFormatError(f"missing ${name} section") from None
    return lines[start + 1:end]


def read_msh(path, tag_map: dict[int, int] | None = None,
             outer_radius: float | None = None) -> TetMesh:
    """Read a Gmsh 2.2 ASCII mesh.

    ``tag_map`` maps physical tags of boundary triangles to ``INNER`` or
    ``OUTER`` (default ``{1: INNER, 2: OUTER}``).  Elements other than
    triangles (type 2) and tets (type 4) are ignored.  ``outer_radius``
    defaults to the mean radius of the OUTER vertices.
    """
    tag_map = {1: INNER, 2: OUTER} if tag_map is None else dict(tag_map)
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise MeshFormatError(f"{path}: not an ASCII mesh file") from None
    lines = [ln.strip() for ln in text.splitlines()]
    fmt = _section(lines, "MeshFormat")
    if not fmt:
        raise MeshFormatError(f"{path}: empty $MeshFormat")
    head = fmt[0].split()
    version = head[0]
    if version != "2.2":
        raise MeshFormatError(f"{path}: unsupported MSH version {version!r} (need 2.2)")
    if len(head) < 2 or head[1] != "0":
        raise MeshFormatError(f"{path}: binary MSH is not supported")

    node_lines = _section(lines, "Nodes")
    n_nodes = int(node_lines[0])
    ids = np.empty(n_nodes, dtype=np.int64)
    xyz = np.empty((n_nodes, 3))
    for i, ln in enumerate(node_lines[1:1 + n_nodes]):
        parts = ln.split()
        ids[i] = int(parts[0])
        xyz[i] = [float(v) for v in parts[1:4]]
    remap = {int(g): i for i, g in enumerate(ids)}

    elem_lines = _section(lines, "Elements")
    n_elem = int(elem_lines[0])
    tets, faces, tags, untagged = [], [], [], []
    for ln in elem_lines[1:1 + n_elem]:
        parts = [int(v) for v in ln.split()]
        etype, ntags = parts[1], parts[2]
        etags = parts[3:3 + ntags]
        nodes = [remap[v] for v in parts[3 + ntags:]]
        if etype == 4:
            tets.append(nodes[:4])
        elif etype == 2:
            phys = etags[0] if etags else None
            if phys not in tag_map:
                untagged.append(parts[0])
                continue
            faces.append(nodes[:3])
            tags.append(tag_map[phys])
    if untagged:
        raise MeshFormatError(f"{path}: boundary triangles without a mapped tag: {untagged}")
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
    vol = signed_volumes(xyz, tets)
    neg = vol < 0
    tets[neg] = tets[neg][:, [1, 0, 2, 3]]
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    tags = np.array(tags, dtype=np.int64)
    if outer_radius is None:
        outer = np.unique(faces[tags == OUTER])
        outer_radius = float(np.mean(np.linalg.norm(xyz[outer], axis=1))) if len(outer) else float("nan")
    return TetMesh(xyz, tets, faces, tags, float(outer_radius))


def write_msh(mesh: TetMesh, path) -> None:
    """Write ``mesh`` as Gmsh 2.2 ASCII (boundary physical tags = INNER/OUTER)."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.vertices.tolist())]
    out += ["$EndNodes", "$Elements", str(len(mesh.boundary_faces) + mesh.n_tets)]
    eid = 1
    for f, t in zip(mesh.boundary_faces.tolist(), mesh.boundary_tags.tolist()):
        out.append(f"{eid} 2 2 {t} {t} " + " ".join(str(v + 1) for v in f))
        eid += 1
    for tet in mesh.tets.tolist():
        out.append(f"{eid} 4 2 0 1 " + " ".join(str(v + 1) for v in tet))
        eid += 1
    out.append("$EndElements")
    Path(path).write_text("\n".join(out) + "\n")
