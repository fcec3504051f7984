import numpy as np
import pytest

from meshes import cube_mesh, icosphere, nonwatertight_mesh
from wirecut.bspline import uniform_closed
from wirecut.geometry import Polygon2
from wirecut.material import (
    InvalidCutError,
    MaterialState,
    PrismCut,
    apply_cut,
    estimate_volume,
    extract_surface_mesh,
    is_closed_orientable,
    mesh_volume,
    termination_check,
)
from wirecut.projection import Viewpoint, camera_frame, rasterize_material_area


def circle_curve(radius, n=32, center=(0.0, 0.0)):
    ang = 2 * np.pi * np.arange(n) / n
    # control polygon slightly outside so the spline tracks the circle closely
    r_ctrl = radius / np.cos(np.pi / n) ** (2.0 / 3)
    pts = np.c_[center[0] + r_ctrl * np.cos(ang), center[1] + r_ctrl * np.sin(ang)]
    return uniform_closed(pts)


def z_axis_cut(radius):
    frame = camera_frame(Viewpoint(phi=np.pi / 2, theta=0.0, r=2.0))
    assert np.allclose(frame.view_dir, [0, 0, -1], atol=1e-12)
    return PrismCut(frame, circle_curve(radius))


def x_axis_cut(radius):
    frame = camera_frame(Viewpoint(phi=0.0, theta=0.0, r=2.0))
    return PrismCut(frame, circle_curve(radius))


class TestContains:
    def test_pristine_box(self):
        m = MaterialState()
        assert m.contains(np.array([[0.0, 0.0, 0.0]]))[0]
        assert not m.contains(np.array([[0.7, 0.0, 0.0]]))[0]
        assert m.contains(np.array([[0.5, 0.5, 0.5]]))[0]  # boundary inclusive

    def test_circular_cut_membership(self):
        m = apply_cut(MaterialState(), z_axis_cut(0.25))
        assert not m.contains(np.array([[0.3, 0.0, 0.0]]))[0]
        assert m.contains(np.array([[0.1, 0.0, 0.0]]))[0]
        # membership is independent of height along the cut axis
        assert m.contains(np.array([[0.1, 0.0, 0.45]]))[0]
        assert not m.contains(np.array([[0.3, 0.0, -0.45]]))[0]

    def test_matches_analytic_oracle_on_random_points(self):
        m = apply_cut(apply_cut(MaterialState(), z_axis_cut(0.25)), x_axis_cut(0.3))
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.6, 0.6, size=(4000, 3))
        got = m.contains(pts)
        rxy = np.hypot(pts[:, 0], pts[:, 1])
        ryz = np.hypot(pts[:, 1], pts[:, 2])
        inside_box = np.all(np.abs(pts) <= 0.5, axis=1)
        want = inside_box & (rxy <= 0.25) & (ryz <= 0.3)
        # exclude points within curve-approximation distance of either boundary
        tol = 2e-3
        sure = (np.abs(rxy - 0.25) > tol) & (np.abs(ryz - 0.3) > tol)
        assert np.array_equal(got[sure], want[sure])


class TestApplyCut:
    def test_idempotent_membership(self):
        cut = z_axis_cut(0.25)
        m1 = apply_cut(MaterialState(), cut)
        m2 = apply_cut(m1, cut)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-0.5, 0.5, size=(2000, 3))
        assert np.array_equal(m1.contains(pts), m2.contains(pts))

    def test_volume_monotone(self):
        m0 = MaterialState()
        m1 = apply_cut(m0, z_axis_cut(0.25))
        v0, _ = estimate_volume(m0, 20000, seed=0)
        v1, s1 = estimate_volume(m1, 20000, seed=0)
        assert v1 <= v0 + 3 * s1

    def test_noop_cut_box_boundary(self):
        # square curve well outside the box silhouette: removes nothing
        big = uniform_closed(np.array([[2.0, -2], [2, 2], [-2, 2], [-2, -2]]))
        cut = PrismCut(camera_frame(Viewpoint(0.0, 0.0)), big)
        m = apply_cut(MaterialState(), cut)
        v, s = estimate_volume(m, 50000, seed=2)
        assert v == pytest.approx(1.0, abs=3 * max(s, 1e-4))

    def test_enclosure_violation_raises(self):
        sil = Polygon2(np.array([[-0.4, -0.4], [0.4, -0.4], [0.4, 0.4], [-0.4, 0.4]]))
        small = z_axis_cut(0.2)  # curve radius < silhouette extent
        with pytest.raises(InvalidCutError):
            apply_cut(MaterialState(), small, silhouette=sil)

    def test_enclosing_cut_accepted(self):
        sil = Polygon2(np.array([[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]]))
        cut = z_axis_cut(0.3)
        m = apply_cut(MaterialState(), cut, silhouette=sil)
        assert len(m.cuts) == 1


class TestVolume:
    def test_pristine_box(self):
        v, s = estimate_volume(MaterialState(), 50000, seed=3)
        assert v == pytest.approx(1.0, abs=3 * max(s, 1e-9) + 1e-12)

    def test_single_cylinder(self):
        m = apply_cut(MaterialState(), z_axis_cut(0.25))
        v, s = estimate_volume(m, 200000, seed=4)
        want = np.pi / 16
        assert abs(v - want) <= 3 * s + 2e-3  # curve tracks the circle to ~1e-3

    def test_two_orthogonal_prisms_grid_oracle(self):
        m = apply_cut(apply_cut(MaterialState(), z_axis_cut(0.25)), x_axis_cut(0.25))
        v, s = estimate_volume(m, 200000, seed=5)
        # analytic-grid oracle on the ideal intersection of two cylinders in a box
        n = 256
        ax = (np.arange(n) + 0.5) / n - 0.5
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        inside = (X**2 + Y**2 <= 0.25**2) & (Y**2 + Z**2 <= 0.25**2)
        want = inside.mean()
        assert abs(v - want) <= 3 * s + 3e-3

    def test_small_budget_rejected(self):
        with pytest.raises(ValueError):
            estimate_volume(MaterialState(), 10, seed=0)


class TestMeshVolume:
    def test_unit_cube_exact(self):
        assert mesh_volume(cube_mesh()) == pytest.approx(1.0, abs=1e-12)

    def test_icosphere(self):
        m = icosphere(radius=0.4, subdivisions=3)
        want = 4.0 / 3.0 * np.pi * 0.4**3
        assert mesh_volume(m) == pytest.approx(want, rel=0.01)

    def test_orientation_sign_invariance(self):
        m = cube_mesh()
        flipped = type(m)(m.vertices, m.triangles[:, ::-1])
        assert mesh_volume(flipped) == pytest.approx(mesh_volume(m), abs=1e-12)

    def test_nonwatertight_fallback(self):
        m = nonwatertight_mesh()
        assert not is_closed_orientable(m)
        v = mesh_volume(m, voxel_resolution=128)
        want = 4.0 / 3.0 * np.pi * 0.32**3
        assert v == pytest.approx(want, rel=0.08)


class TestTermination:
    def test_pristine_vs_small_mesh(self):
        mesh = icosphere(radius=0.29, subdivisions=1)  # volume ~ 0.1
        assert not termination_check(MaterialState(), mesh, alpha=0.025,
                                     sample_budget=20000, seed=0)

    def test_close_volumes_pass(self):
        mesh = cube_mesh()
        assert termination_check(MaterialState(), mesh, alpha=0.025,
                                 material_vol=0.12, mesh_vol=0.10)

    def test_strict_inequality_at_threshold(self):
        # dyadic values so the difference is exactly representable
        mesh = cube_mesh()
        assert not termination_check(MaterialState(), mesh, alpha=0.03125,
                                     material_vol=0.53125, mesh_vol=0.5)


class TestSurfaceExtraction:
    def test_pristine_box_watertight(self):
        out = extract_surface_mesh(MaterialState(), 64)
        assert is_closed_orientable(out)
        assert mesh_volume(out) == pytest.approx(1.0, rel=0.05)
        v = out.vertices[out.triangles]
        areas = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
        assert np.all(areas > 0)

    def test_cylinder_cut_volume_crosscheck(self):
        m = apply_cut(MaterialState(), z_axis_cut(0.25))
        out = extract_surface_mesh(m, 64)
        vol_mc, s = estimate_volume(m, 100000, seed=6)
        assert mesh_volume(out) == pytest.approx(vol_mc, rel=0.05)


class TestRenderMaterial:
    def test_pristine_box_matches_box_silhouette(self):
        m = MaterialState()
        frame = camera_frame(Viewpoint(0.4, 0.9))
        img = rasterize_material_area(m, frame, 128, depth_samples=64)
        box = cube_mesh()
        from wirecut.projection import rasterize_mesh_area
        want = rasterize_mesh_area(box, frame, 128)
        overlap = (img.bits & want.bits).sum()
        union = (img.bits | want.bits).sum()
        assert overlap / union >= 0.97

    def test_cut_viewed_along_axis(self):
        m = apply_cut(MaterialState(), z_axis_cut(0.25))
        frame = camera_frame(Viewpoint(phi=np.pi / 2, theta=0.0))
        img = rasterize_material_area(m, frame, 256, depth_samples=32)
        px = 2 * frame.scale / 256
        area = img.count() * px * px
        assert area == pytest.approx(np.pi * 0.25**2, rel=0.02)

    def test_subset_monotonicity(self):
        m0 = MaterialState()
        m1 = apply_cut(m0, z_axis_cut(0.3))
        m2 = apply_cut(m1, x_axis_cut(0.28))
        frame = camera_frame(Viewpoint(0.7, 2.0))
        c0 = rasterize_material_area(m0, frame, 128, depth_samples=64).count()
        c1 = rasterize_material_area(m1, frame, 128, depth_samples=64).count()
        c2 = rasterize_material_area(m2, frame, 128, depth_samples=64).count()
        assert c0 >= c1 >= c2

    def test_depth_samples_validation(self):
        with pytest.raises(ValueError):
            rasterize_material_area(MaterialState(), camera_frame(Viewpoint(0, 0)),
                                    64, depth_samples=1)
