"""Post-processing of solved fields: sampling, ring extraction, maps, decay."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import QField
from .mesh import TetMesh, _TET_FACES
from .qtensor import E_Z, Q_INF, biaxiality, eigen, frobenius

DIRECTOR_GAP = 1e-8
_BARY_TOL = 1e-10


class NoRingError(ValueError):
    """The leading eigenvalues never exchange along the scanned ray."""


# ---------------------------------------------------------------------------
# point location
# ---------------------------------------------------------------------------

class Locator:
    """Tet lookup: k-d tree candidates, then a walk, then brute force."""

    def __init__(self, mesh: TetMesh):
        from scipy.spatial import cKDTree

        self.mesh = mesh
        x = mesh.vertices[mesh.tets]
        self.origin = x[:, 0]
        self.inv = np.linalg.inv(np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1)))
        self.tree = cKDTree(x.mean(axis=1))
        self.neighbors = self._neighbors(mesh.tets)

    @staticmethod
    def _neighbors(tets: np.ndarray) -> np.ndarray:
        """``nb[t, i]`` = tet across the face opposite local vertex ``i`` (or -1)."""
        nt = len(tets)
        keys = np.sort(tets[:, _TET_FACES], axis=2).reshape(-1, 3)
        order = np.lexsort(keys.T[::-1])
        sk = keys[order]
        same = np.all(sk[1:] == sk[:-1], axis=1)
        nb = np.full(4 * nt, -1)
        a, b = order[:-1][same], order[1:][same]
        nb[a] = b // 4
        nb[b] = a // 4
        return nb.reshape(nt, 4)

    def bary(self, t, p) -> np.ndarray:
        """Barycentric coordinates of ``p`` in tets ``t`` (broadcasting)."""
        lam = np.einsum("...ij,...j->...i", self.inv[t], p - self.origin[t])
        return np.concatenate([1.0 - lam.sum(axis=-1, keepdims=True), lam], axis=-1)

    def _walk(self, p: np.ndarray, start: int, max_steps: int = 500) -> int:
        t = start
        for _ in range(max_steps):
            lam = self.bary(t, p)
            worst = int(np.argmin(lam))
            if lam[worst] >= -_BARY_TOL:
                return t
            nxt = self.neighbors[t, worst]
            if nxt < 0:
                return -1
            t = int(nxt)
        return -1

    def _brute(self, p: np.ndarray) -> tuple[int, float]:
        lam = self.bary(np.arange(len(self.inv)), p)
        score = lam.min(axis=1)
        best = int(np.argmax(score))
        return best, float(score[best])

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Tet index and barycentric weights for each point.

        Points in the physical shell ``1 <= |x| <= R`` that fall in the
        thin gaps between the flat boundary facets and the spheres are
        assigned to the nearest tet with clipped weights.  Points outside
        the shell raise ``ValueError``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        R = self.mesh.outer_radius
        bad = np.flatnonzero((r < 1.0 - 1e-9) | (r > R * (1.0 + 1e-9)))
        if len(bad):
            raise ValueError(f"point {pts[bad[0]].tolist()} is outside the shell 1 <= |x| <= {R}")
        kq = min(8, len(self.inv))
        _, cand = self.tree.query(pts, k=kq)
        cand = cand.reshape(len(pts), kq)
        lam = self.bary(cand, pts[:, None, :])
        score = lam.min(axis=2)
        pick = np.argmax(score, axis=1)
        tet = cand[np.arange(len(pts)), pick]
        ok = score[np.arange(len(pts)), pick] >= -_BARY_TOL
        for q in np.flatnonzero(~ok):
            t = self._walk(pts[q], int(tet[q]))
            if t < 0:
                t, _ = self._brute(pts[q])
            tet[q] = t
        weights = self.bary(tet, pts)
        weights = np.clip(weights, 0.0, None)
        weights /= weights.sum(axis=1, keepdims=True)
        return tet, weights


def locator(mesh: TetMesh) -> Locator:
    if "locator" not in mesh._cache:
        mesh._cache["locator"] = Locator(mesh)
    return mesh._cache["locator"]


def sample(field: QField, p) -> np.ndarray:
    """Shifted tensor at ``p``; ``(3, 3)`` for one point, ``(n, 3, 3)`` for many."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    tet, w = locator(field.mesh).locate(p)
    vals = field.values[field.mesh.tets[tet]]
    out = np.einsum("ni,niab->nab", w, vals)
    return out[0] if single else out


def sample_full(field: QField, p) -> np.ndarray:
    return sample(field, p) + Q_INF


# ---------------------------------------------------------------------------
# Saturn ring
# ---------------------------------------------------------------------------

@dataclass
class RingReport:
    radius: float
    z_offset: float
    gap_profile: np.ndarray  # (n, 2): rho, lambda1 - lambda2
    gap_at_ring: float
    band: tuple[float, float]  # rho interval with gap <= threshold
    threshold: float
    direction: np.ndarray

    def as_dict(self) -> dict:
        return {"radius": self.radius, "z_offset": self.z_offset, "gap_at_ring": self.gap_at_ring,
                "band_inner": self.band[0], "band_outer": self.band[1], "threshold": self.threshold}


def _leading_gap(Q: np.ndarray) -> np.ndarray:
    lam = eigen(Q).values
    return lam[..., 0] - lam[..., 1]


def ring_radius(field: QField, threshold: float = 0.08, direction=(1.0, 0.0, 0.0),
                rho_max: float | None = None, n_samples: int = 400) -> RingReport:
    """Radius where the radial and vertical eigenvalues of the full Q exchange.

    Along ``rho * direction`` (an equatorial unit vector) the full tensor is
    diagonal in the frame ``(e_rho, e_phi, e_z)`` by symmetry; the ring is
    the zero of ``e_rho.Q.e_rho - e_z.Q.e_z``, located by bisection between
    samples.  The ring plane offset is the height minimising
    ``lambda1 - lambda2`` on a vertical segment through the ring.
    """
    from scipy.optimize import brentq, minimize_scalar

    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if abs(d @ E_Z) > 1e-9:
        raise ValueError("direction must lie in the equatorial plane")
    R = field.mesh.outer_radius
    rho_max = min(R, 5.0) if rho_max is None else rho_max
    rho = np.linspace(1.0, rho_max, n_samples)
    Q = sample_full(field, rho[:, None] * d)

    def contrast(Qs):
        return np.einsum("...ij,i,j->...", Qs, d, d) - np.einsum("...ij,i,j->...", Qs, E_Z, E_Z)

    c = contrast(Q)
    sign_change = np.flatnonzero((c[:-1] > 0) & (c[1:] <= 0))
    if len(sign_change) == 0:
        raise NoRingError("no exchange of the leading eigenvalues along the ray")
    i = int(sign_change[0])

    def f(r):
        return float(contrast(sample_full(field, r * d)))

    radius = rho[i] if c[i] == 0 else brentq(f, rho[i], rho[i + 1], xtol=1e-12)
    gap = _leading_gap(Q)
    below = gap <= threshold
    band = (float("nan"), float("nan"))
    if below.any():
        # contiguous run containing the crossing
        lo = hi = i
        while lo > 0 and below[lo - 1]:
            lo -= 1
        while hi < len(rho) - 1 and below[hi + 1]:
            hi += 1
        band = (float(rho[lo]), float(rho[hi]))

    zlim = min(0.5, 0.5 * (radius - 1.0))

    def vgap(z):
        return float(_leading_gap(sample_full(field, radius * d + z * E_Z)))

    zs = np.linspace(-zlim, zlim, 41)
    g = np.array([vgap(z) for z in zs])
    j = int(np.argmin(g))
    lo_z, hi_z = zs[max(j - 1, 0)], zs[min(j + 1, len(zs) - 1)]
    res = minimize_scalar(vgap, bounds=(lo_z, hi_z), method="bounded", options={"xatol": 1e-6})
    z_off = float(res.x) if res.fun <= g[j] else float(zs[j])
    return RingReport(float(radius), z_off, np.column_stack([rho, gap]),
                      float(_leading_gap(sample_full(field, radius * d))), band, float(threshold), d)


# ---------------------------------------------------------------------------
# maps and profiles
# ---------------------------------------------------------------------------

_PLANES = {"xy": (0, 1, 2), "xz": (0, 2, 1), "yz": (1, 2, 0)}


@dataclass
class FieldMaps:
    """Samples of the full tensor on a regular planar grid (NaN outside the shell)."""

    u: np.ndarray
    v: np.ndarray
    points: np.ndarray  # (nv, nu, 3)
    norm: np.ndarray
    beta: np.ndarray
    director: np.ndarray  # (nv, nu, 3); NaN where undefined
    valid: np.ndarray


def field_maps(field: QField, plane: str = "xz", offset: float = 0.0,
               extent: float | None = None, resolution: int = 101) -> FieldMaps:
    """``|Q|``, ``beta(Q)`` and director of the full Q on a coordinate plane.

    ``plane`` is ``"xy"``, ``"xz"`` or ``"yz"`` at the given ``offset`` along
    the remaining axis; the grid spans ``[-extent, extent]^2``.
    """
    if plane not in _PLANES:
        raise ValueError(f"plane must be one of {sorted(_PLANES)}")
    iu, iv, iw = _PLANES[plane]
    R = field.mesh.outer_radius
    extent = R if extent is None else extent
    u = np.linspace(-extent, extent, resolution)
    v = np.linspace(-extent, extent, resolution)
    U, V = np.meshgrid(u, v)
    pts = np.zeros(U.shape + (3,))
    pts[..., iu], pts[..., iv], pts[..., iw] = U, V, offset
    r = np.linalg.norm(pts, axis=-1)
    valid = (r >= 1.0) & (r <= R)
    flat = pts.reshape(-1, 3)
    vmask = valid.ravel()
    norm = np.full(len(flat), np.nan)
    beta = np.full(len(flat), np.nan)
    director = np.full((len(flat), 3), np.nan)
    if vmask.any():
        Q = sample_full(field, flat[vmask])
        es = eigen(Q)
        norm[vmask] = frobenius(Q)
        beta[vmask] = biaxiality(Q)
        dvec = es.director.copy()
        dvec[es.values[:, 0] - es.values[:, 1] < DIRECTOR_GAP] = np.nan
        director[vmask] = dvec
    shape = U.shape
    return FieldMaps(u, v, pts, norm.reshape(shape), beta.reshape(shape),
                     director.reshape(shape + (3,)), valid)


def decay_profile(field: QField, directions, radii) -> np.ndarray:
    """``|Q - Q_inf|`` at ``radius * direction``; shape ``(n_dir, n_radii)``."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.asarray(radii, dtype=float)
    R = field.mesh.outer_radius
    if np.any(radii < 1.0) or np.any(radii > R):
        raise ValueError(f"radii must lie in [1, {R}]")
    pts = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, 3)
    return frobenius(sample(field, pts)).reshape(len(dirs), len(radii))
