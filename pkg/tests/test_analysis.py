import numpy as np
import pytest

from saturnq import analysis, fem, oracle
from saturnq.qtensor import Q_INF

SQRT23 = np.sqrt(2 / 3)


class TestSample:
    def test_at_vertex(self, solutions):
        f, _ = solutions.get("small_mesh", 5.0)
        for v in (0, 17, f.mesh.n_vertices // 2, f.mesh.n_vertices - 1):
            np.testing.assert_allclose(analysis.sample(f, f.mesh.vertices[v]), f.values[v], atol=1e-12)

    def test_at_centroid(self, solutions):
        f, _ = solutions.get("small_mesh", 5.0)
        for t in (0, 101, f.mesh.n_tets - 1):
            tet = f.mesh.tets[t]
            c = f.mesh.vertices[tet].mean(axis=0)
            np.testing.assert_allclose(analysis.sample(f, c), f.values[tet].mean(axis=0), atol=1e-12)

    def test_batch_matches_single(self, solutions, rng):
        f, _ = solutions.get("small_mesh", 0.0)
        d = rng.normal(size=(6, 3))
        p = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.0, 10.0, size=(6, 1))
        batch = analysis.sample(f, p)
        for i in range(6):
            np.testing.assert_array_equal(batch[i], analysis.sample(f, p[i]))

    def test_full_adds_far_field(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        p = np.array([0.0, 3.0, 1.0])
        np.testing.assert_allclose(analysis.sample_full(f, p), analysis.sample(f, p) + Q_INF)

    def test_gap_between_facet_and_sphere(self, solutions):
        # a point on the true unit sphere lies outside the polyhedral mesh
        f, _ = solutions.get("small_mesh", 0.0)
        for x in (np.ones(3) / np.sqrt(3), np.array([0.3, 0.4, np.sqrt(0.75)])):
            out = analysis.sample(f, x)
            assert np.all(np.isfinite(out))
            assert np.all(np.abs(out) <= 1.0 + 1e-12)

    @pytest.mark.parametrize("p", [[0, 0, 0], [0.5, 0, 0], [0, 0, 10.5]])
    def test_outside(self, solutions, p):
        f, _ = solutions.get("small_mesh", 0.0)
        with pytest.raises(ValueError, match="outside"):
            analysis.sample(f, np.array(p, dtype=float))


class TestRing:
    def test_k0(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        rep = analysis.ring_radius(f)
        assert rep.radius == pytest.approx(1.4656, abs=0.05)
        assert abs(rep.z_offset) <= 0.05
        assert rep.radius > 1.0
        assert rep.gap_at_ring <= rep.threshold
        assert rep.band[0] <= rep.radius <= rep.band[1]

    def test_oracle_roots(self):
        assert oracle.equatorial_ring_radius() == pytest.approx(1.465571231876768, abs=1e-10)
        rho = oracle.equatorial_ring_radius()
        assert rho**3 == pytest.approx(rho**2 + 1)

    def test_axisymmetry(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        base = analysis.ring_radius(f).radius
        for phi in (0.3, np.pi / 4, np.pi / 2, 2.0):
            d = (np.cos(phi), np.sin(phi), 0.0)
            assert analysis.ring_radius(f, direction=d).radius == pytest.approx(base, abs=0.02)

    def test_no_ring_for_zero_field(self, small_mesh):
        f = fem.QField(small_mesh, np.zeros((small_mesh.n_vertices, 5)), 0.0)
        with pytest.raises(analysis.NoRingError):
            analysis.ring_radius(f)

    def test_non_equatorial_direction(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        with pytest.raises(ValueError):
            analysis.ring_radius(f, direction=(1.0, 0.0, 0.1))

    def test_report_dict(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        d = analysis.ring_radius(f).as_dict()
        assert set(d) == {"radius", "z_offset", "gap_at_ring", "band_inner", "band_outer", "threshold"}


class TestMaps:
    def test_ranges(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        fm = analysis.field_maps(f, "xz", resolution=61)
        v = fm.valid
        assert np.all((fm.beta[v] >= 0) & (fm.beta[v] <= 1))
        assert np.all(fm.norm[v] <= 1.2 * SQRT23)
        assert np.all(np.isnan(fm.norm[~v]))
        # the biaxial halo around the ring
        assert np.nanmax(fm.beta) >= 0.9

    def test_far_field(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        fm = analysis.field_maps(f, "xy", resolution=41)
        r = np.linalg.norm(fm.points, axis=-1)
        far = fm.valid & (r >= 9.5)
        np.testing.assert_allclose(fm.norm[far], SQRT23, atol=0.02)
        assert np.all(fm.beta[far] <= 0.05)
        # far director is e_z up to sign
        np.testing.assert_allclose(np.abs(fm.director[far][:, 2]), 1.0, atol=1e-2)

    def test_colloid_surface_norm(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        inner = f.mesh.boundary_vertices(1)
        np.testing.assert_allclose(np.linalg.norm(f.full[inner], axis=(1, 2)), SQRT23, atol=1e-12)

    def test_grid_geometry(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        fm = analysis.field_maps(f, "yz", offset=0.5, extent=3.0, resolution=11)
        assert fm.norm.shape == (11, 11)
        assert np.all(fm.points[..., 0] == 0.5)
        assert fm.u[0] == -3.0 and fm.u[-1] == 3.0

    def test_bad_plane(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        with pytest.raises(ValueError):
            analysis.field_maps(f, "xw")


class TestDecay:
    def test_boundary_values(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        prof = analysis.decay_profile(f, [[1, 0, 0], [0, 0, 1]], [1.0, 10.0])
        assert prof[0, 0] == pytest.approx(np.sqrt(2), abs=1e-6)
        assert prof[1, 0] == pytest.approx(0.0, abs=1e-6)  # nu = e_z matches the far field
        np.testing.assert_allclose(prof[:, 1], 0.0, atol=1e-12)

    def test_monotone_decay_along_x(self, solutions):
        f, _ = solutions.get("medium_mesh", 0.0)
        prof = analysis.decay_profile(f, [1, 0, 0], np.linspace(1.0, 10.0, 30))[0]
        assert np.all(np.diff(prof) < 0)

    def test_larger_k_decays_slower_vertically(self, solutions):
        radii = [2.0, 3.0, 5.0]
        a = analysis.decay_profile(solutions.get("medium_mesh", 0.0)[0], [0, 0, 1], radii)[0]
        b = analysis.decay_profile(solutions.get("medium_mesh", 20.0)[0], [0, 0, 1], radii)[0]
        assert np.all(b > a)

    def test_radii_range(self, solutions):
        f, _ = solutions.get("small_mesh", 0.0)
        with pytest.raises(ValueError):
            analysis.decay_profile(f, [1, 0, 0], [0.5, 2.0])
