import math

import numpy as np
import pytest
from scipy import special

from excomp import dgeom, surfaces
from excomp.dgeom import (LABEL_INNER, LABEL_OUTER, capacity_discrete, clip, count_ends,
                          end_components, exit_time_discrete, first_eigenvalue_estimate,
                          flux, radial_gradient_norm, region_area, solve_dirichlet)
from excomp.errors import CoverageError, DomainError, TruncationContactError
from excomp.surfaces import TriMesh, builtin, cotangent_stiffness, tessellate


class TestRadialGradientNorm:
    def test_plane_through_pole_is_one(self, plane_128):
        vals = dgeom.radial_gradient_norms(plane_128.verts, plane_128.faces,
                                           plane_128.pole)
        assert np.allclose(vals, 1.0, rtol=0, atol=1e-12)

    def test_orthogonal_face_is_zero(self):
        verts = np.array([[1, 0, 1], [-0.5, math.sqrt(3) / 2, 1],
                          [-0.5, -math.sqrt(3) / 2, 1]], float)
        mesh = TriMesh(verts, np.array([[0, 1, 2]]))
        assert radial_gradient_norm(mesh, 0) < 1e-12

    def test_catenoid_neck_faces_small(self, catenoid_96):
        # faces whose vertices straddle the neck circle r = a = 1
        fr = catenoid_96.r[catenoid_96.faces]
        neck = np.flatnonzero((fr.min(axis=1) < 1.0 + 1e-9) & (fr.max(axis=1) < 1.01))
        assert len(neck)
        vals = dgeom.radial_gradient_norms(catenoid_96.verts,
                                           catenoid_96.faces[neck], catenoid_96.pole)
        assert vals.max() < 0.1

    def test_always_in_unit_interval(self, catenoid_96):
        vals = dgeom.radial_gradient_norms(catenoid_96.verts, catenoid_96.faces,
                                           catenoid_96.pole)
        assert vals.min() >= 0.0 and vals.max() <= 1.0


class TestClip:
    def test_disc_area(self, plane_256):
        reg = clip(plane_256, 0.0, 2.0)
        assert region_area(reg) == pytest.approx(math.pi * 4.0, rel=5e-3)

    def test_annulus_area(self, plane_256):
        reg = clip(plane_256, 1.0, 2.0)
        assert region_area(reg) == pytest.approx(math.pi * 3.0, rel=5e-3)

    def test_boundary_labels(self, plane_256):
        reg = clip(plane_256, 1.0, 2.0)
        assert reg.has_label(LABEL_INNER) and reg.has_label(LABEL_OUTER)
        inner = reg.vertex_label == LABEL_INNER
        outer = reg.vertex_label == LABEL_OUTER
        assert np.allclose(reg.r[inner], 1.0) and np.allclose(reg.r[outer], 2.0)

    def test_loops_closed(self, plane_256):
        reg = clip(plane_256, 1.0, 2.0)
        labels = sorted(l.label for l in reg.boundary_loops)
        assert labels == ["inner", "outer"]
        assert all(l.closed for l in reg.boundary_loops)

    def test_catenoid_annulus_has_two_components(self, catenoid_96):
        # the neck sits at r = a = 1 < 1.5, so the annulus splits in two bands
        reg = clip(catenoid_96, 1.5, 3.0)
        by_label = sorted((l.label, l.closed) for l in reg.boundary_loops)
        assert by_label == [("inner", True), ("inner", True),
                            ("outer", True), ("outer", True)]

    def test_precondition(self, plane_128):
        with pytest.raises(DomainError):
            clip(plane_128, 2.0, 1.0)

    def test_coverage_error(self, plane_128):
        with pytest.raises(CoverageError):
            clip(plane_128, 0.0, 10.0)

    def test_area_monotone_in_R(self, plane_128):
        radii = np.linspace(0.5, 3.0, 11)
        areas = [region_area(clip(plane_128, 0.0, float(R))) for R in radii]
        assert all(b >= a - 1e-9 for a, b in zip(areas, areas[1:]))

    def test_vertices_inside_band(self, catenoid_96):
        reg = clip(catenoid_96, 1.5, 3.0)
        eps = 1e-12 * 3.0
        assert reg.r.min() >= 1.5 - eps and reg.r.max() <= 3.0 + eps

    def test_tie_vertex_handled(self):
        # grid contains vertices with r exactly 2.0; the cut must stay manifold
        mesh = tessellate(builtin("plane", extent=4.0), 64, 64)
        assert np.any(mesh.r == 2.0)
        reg = clip(mesh, 0.0, 2.0)
        assert region_area(reg) == pytest.approx(math.pi * 4, rel=2e-2)

    @pytest.mark.parametrize("name,kwargs,rho,R", [
        ("plane", {"cover_radius": 3.2}, 1.0, 2.5),
        ("catenoid", {"a": 1.0, "cover_radius": 12.0}, 1.5, 6.0),
        ("enneper", {"cover_radius": 6.0}, 1.0, 5.0),
    ])
    def test_clip_preserves_orientation(self, name, kwargs, rho, R):
        mesh = tessellate(builtin(name, **kwargs), 64, 64)
        reg = clip(mesh, rho, R)
        f = reg.faces
        n = len(reg.verts)
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        dkeys = directed[:, 0] * np.int64(n) + directed[:, 1]
        _, counts = np.unique(dkeys, return_counts=True)
        assert counts.max() == 1  # consistent orientation
        und = np.sort(directed, axis=1)
        _, ucounts = np.unique(und[:, 0] * np.int64(n) + und[:, 1], return_counts=True)
        assert ucounts.max() <= 2  # edge-manifold


class TestFlux:
    def test_plane_circle(self, plane_256):
        assert flux(plane_256, 2.0) == pytest.approx(4 * math.pi, rel=5e-3)

    def test_catenoid_neck_flux_vanishes(self, catenoid_96, catenoid_192):
        coarse = flux(catenoid_96, 1.0)
        fine = flux(catenoid_192, 1.0)
        assert coarse < 0.1 * 2 * math.pi
        assert fine < 0.6 * coarse  # decreasing under refinement

    def test_catenoid_flux_equals_volume_quotient(self, catenoid_96):
        # Euclidean ambient identity at R = 20
        R = 20.0
        vol_q = region_area(clip(catenoid_96, 0.0, R)) / (math.pi * R * R)
        flux_q = flux(catenoid_96, R) / (2 * math.pi * R)
        assert flux_q == pytest.approx(vol_q, rel=1e-2)

    def test_coarea_derivative(self, plane_256):
        # d/dR of the radial Dirichlet energy over D_R equals the flux
        R, h = 2.0, 0.05
        e_hi = dgeom.radial_energy(plane_256, clip(plane_256, 0.0, R + h))
        e_lo = dgeom.radial_energy(plane_256, clip(plane_256, 0.0, R - h))
        fd = (e_hi - e_lo) / (2 * h)
        assert fd == pytest.approx(flux(plane_256, R), rel=0.03)


class TestLaplacianWeights:
    def test_single_equilateral_triangle(self):
        # hand value for one triangle: off-diagonal -cot(pi/3)/2 = -1/(2 sqrt 3)
        verts = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]])
        K, _ = cotangent_stiffness(verts, np.array([[0, 1, 2]]), clamp=True)
        K = K.toarray()
        off = -1.0 / (2 * math.sqrt(3))
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert K[i, j] == pytest.approx(off, rel=1e-12)

    def test_shared_edge_pair_doubles(self):
        # two equilateral triangles sharing an edge: -cot(pi/3) = -1/sqrt(3)
        verts = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0],
                          [0.5, -math.sqrt(3) / 2, 0]])
        K, _ = cotangent_stiffness(verts, np.array([[0, 1, 2], [1, 0, 3]]), clamp=True)
        assert K[0, 1] == pytest.approx(-1.0 / math.sqrt(3), rel=1e-12)

    def test_square_grid_five_point_stencil(self):
        mesh = tessellate(builtin("plane", extent=4.0), 8, 8)  # unit squares
        K, _ = cotangent_stiffness(mesh.verts, mesh.faces, clamp=True)
        K = K.tocsr()
        # interior vertex: axis neighbors -1, diagonal neighbors 0, center 4
        inner = np.flatnonzero(~mesh.boundary_vertex_mask())
        i = int(inner[len(inner) // 2])
        row = K.getrow(i).toarray().ravel()
        assert row[i] == pytest.approx(4.0, rel=1e-12)
        assert sorted(np.round(row[row != 0], 12).tolist()) == [-1.0, -1.0, -1.0, -1.0, 4.0]

    def test_unconstrained_system_rejected(self, plane_128):
        reg = clip(plane_128, 1.0, 2.0)
        with pytest.raises(DomainError):
            dgeom.assemble_laplacian(reg, {})


class TestSolves:
    def test_plane_annulus_log_potential(self, plane_256):
        reg = clip(plane_256, 1.0, math.e)
        system = dgeom.assemble_laplacian(reg, {"inner": 0.0, "outer": 1.0})
        psi = solve_dirichlet(system)
        interior = reg.vertex_label == 0
        expected = np.log(reg.r[interior])
        assert np.abs(psi[interior] - expected).max() < 0.01

    def test_constant_boundary_gives_constant(self, plane_128):
        reg = clip(plane_128, 1.0, 2.0)
        system = dgeom.assemble_laplacian(reg, {"inner": 0.7, "outer": 0.7})
        psi = solve_dirichlet(system)
        # constant up to the 1e-10 relative CG residual
        assert np.allclose(psi, 0.7, rtol=0, atol=1e-7)

    def test_maximum_principle(self, catenoid_96):
        reg = clip(catenoid_96, 1.5, 10.0)
        system = dgeom.assemble_laplacian(reg, {"inner": 0.0, "outer": 1.0})
        psi = solve_dirichlet(system)
        assert psi.min() >= -1e-9 and psi.max() <= 1.0 + 1e-9


class TestCapacity:
    def test_plane_annulus(self, plane_256):
        cap = capacity_discrete(clip(plane_256, 1.0, math.e))
        assert cap.capacity == pytest.approx(2 * math.pi, rel=0.02)
        assert cap.effective_resistance == pytest.approx(1 / cap.capacity, rel=1e-14)

    def test_catenoid_against_band_oracle(self, catenoid_192):
        # exact band solution: Cap = 4 pi / (v_R - v_rho) per the conformal
        # parametrization, v_R solving cosh^2 v + v^2 = R^2
        from scipy.optimize import brentq
        v6 = brentq(lambda v: math.cosh(v) ** 2 + v * v - 36.0, 0, 10)
        v15 = brentq(lambda v: math.cosh(v) ** 2 + v * v - 2.25, 0, 10)
        exact = 4 * math.pi / (v6 - v15)
        cap = capacity_discrete(clip(catenoid_192, 1.5, 6.0), truncation="error")
        assert cap.capacity == pytest.approx(exact, rel=0.02)

    def test_figure_claim_capacity_ratio_in_one_two(self, catenoid_192):
        cap = capacity_discrete(clip(catenoid_192, 1.5, 6.0))
        ratio = cap.capacity / (2 * math.pi / math.log(4.0))
        assert 1.0 - 0.03 < ratio < 2.0 * 1.03

    def test_resolution_guard(self, plane_128):
        with pytest.raises(DomainError):
            capacity_discrete(clip(plane_128, 1.0, 1.02))

    def test_truncation_policies(self):
        # a strip window whose truncation boundary crosses the band: the
        # reflect policy treats it as a zero-Neumann wall, error refuses
        strip = surfaces.ParamSurface(
            "strip", lambda u, v: (u, v, np.zeros_like(u + v)), -4.0, 4.0, -1.0, 1.0)
        mesh = tessellate(strip, 64, 16)
        with pytest.raises(CoverageError):
            clip(mesh, 0.5, 3.0)
        reg = clip(mesh, 0.5, 3.0, allow_truncation=True)
        assert reg.has_label(dgeom.LABEL_TRUNCATION)
        with pytest.raises(TruncationContactError):
            capacity_discrete(reg, truncation="error")
        cap = capacity_discrete(reg, truncation="reflect")
        assert cap.capacity > 0

    def test_ball_rejected(self, plane_128):
        with pytest.raises(DomainError):
            capacity_discrete(clip(plane_128, 0.0, 2.0))


class TestExitTime:
    def test_plane_profile(self, plane_256):
        reg = clip(plane_256, 0.0, 2.0)
        E = exit_time_discrete(reg)
        expected = (4.0 - reg.r ** 2) / 4.0
        assert np.abs(E - expected).max() <= 0.02 * expected.max()

    def test_boundary_exactly_zero(self, plane_128):
        reg = clip(plane_128, 0.0, 2.0)
        E = exit_time_discrete(reg)
        assert np.all(E[reg.vertex_label == LABEL_OUTER] == 0.0)

    def test_catenoid_equals_transplant(self, catenoid_192):
        # minimal in Euclidean space: E = (R^2 - r^2)/4 exactly in the limit
        reg = clip(catenoid_192, 0.0, 6.0)
        E = exit_time_discrete(reg)
        expected = (36.0 - reg.r ** 2) / 4.0
        assert np.abs(E - expected).max() <= 0.02 * expected.max()

    def test_annulus_rejected(self, plane_128):
        with pytest.raises(DomainError):
            exit_time_discrete(clip(plane_128, 1.0, 2.0))


class TestEigenvalue:
    def test_unit_disc_bessel(self, plane_256):
        lam = first_eigenvalue_estimate(clip(plane_256, 0.0, 1.0))
        j01 = float(special.jn_zeros(0, 1)[0])
        assert lam == pytest.approx(j01 ** 2, rel=0.02)

    def test_scaling_law(self, plane_256):
        lam1 = first_eigenvalue_estimate(clip(plane_256, 0.0, 1.0))
        lam2 = first_eigenvalue_estimate(clip(plane_256, 0.0, 2.0))
        assert lam2 == pytest.approx(lam1 / 4.0, rel=0.02)

    def test_catenoid_decreasing_to_zero_trend(self, catenoid_96):
        lams = [first_eigenvalue_estimate(clip(catenoid_96, 0.0, R))
                for R in (4.0, 8.0, 16.0)]
        assert lams[0] > lams[1] > lams[2]


class TestEnds:
    def test_plane_one_end(self, plane_128):
        assert count_ends(plane_128, 1.0) == 1

    def test_catenoid_two_ends(self, catenoid_96):
        assert count_ends(catenoid_96, 3.0) == 2

    def test_enneper_one_end(self, enneper_192):
        assert count_ends(enneper_192, 3.0) == 1

    def test_coverage_warning(self, plane_128):
        res = end_components(plane_128, 3.0)  # window reaches ~4.5 < 6
        assert res.warning is not None

    def test_masks_partition_faces(self, catenoid_96):
        res = end_components(catenoid_96, 3.0)
        overlap = np.logical_and(res.face_masks[0], res.face_masks[1])
        assert not overlap.any()


class TestBoundaryLoops:
    def test_truncation_contact_flags_mixed_loop(self):
        strip = surfaces.ParamSurface(
            "strip", lambda u, v: (u, v, np.zeros_like(u + v)), -4.0, 4.0, -1.0, 1.0)
        mesh = tessellate(strip, 64, 16)
        reg = clip(mesh, 0.5, 3.0, allow_truncation=True)
        labels = {l.label for l in reg.boundary_loops}
        # the window cuts the level circles: loops mixing level and truncation
        assert "mixed" in labels

    def test_closed_circles_stay_pure(self, plane_128):
        reg = clip(plane_128, 1.0, 2.0)
        assert {l.label for l in reg.boundary_loops} == {"inner", "outer"}
