import numpy as np
import pytest

from wirecut.geometry import GeometryError, Polygon2, TriMesh, points_in_polygon
from wirecut.projection import (
    BOX_COVER_SCALE,
    BinaryImage,
    Viewpoint,
    area_mismatch,
    camera_frame,
    dilate_image,
    extract_outer_contour,
    rasterize_mesh_area,
    trace_pixel_boundaries,
    write_pgm,
)


def unit_cube_mesh(side=1.0, center=(0.0, 0.0, 0.0)):
    h = side / 2
    v = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    v = v + np.asarray(center)
    f = np.array([
        [0, 1, 3], [0, 3, 2],   # x = -h
        [4, 6, 7], [4, 7, 5],   # x = +h
        [0, 4, 5], [0, 5, 1],   # y = -h
        [2, 3, 7], [2, 7, 6],   # y = +h
        [0, 2, 6], [0, 6, 4],   # z = -h
        [1, 5, 7], [1, 7, 3],   # z = +h
    ])
    return TriMesh(v, f)


class TestCameraFrame:
    def test_equator(self):
        f = camera_frame(Viewpoint(phi=0.0, theta=0.0, r=2.0))
        assert np.allclose(f.position, [2, 0, 0])
        assert np.allclose(f.view_dir, [-1, 0, 0])

    def test_pole(self):
        f = camera_frame(Viewpoint(phi=np.pi / 2, theta=1.3, r=2.0))
        assert np.allclose(f.position, [0, 0, 2], atol=1e-12)

    def test_orthonormal_basis(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = Viewpoint(phi=rng.uniform(-np.pi / 2, np.pi / 2),
                          theta=rng.uniform(0, 2 * np.pi), r=2.0)
            f = camera_frame(v)
            assert abs(np.dot(f.right, f.up)) < 1e-12
            assert abs(np.dot(f.right, f.view_dir)) < 1e-12
            assert np.linalg.norm(np.cross(f.right, f.up) + f.view_dir) <= 1e-12


class TestRasterizeMesh:
    def test_full_plane_triangle(self):
        big = 10.0
        mesh = TriMesh(np.array([[0, -big, -big], [0, big, -big], [0, 0, big * 2]]),
                       np.array([[0, 1, 2]]))
        frame = camera_frame(Viewpoint(0.0, 0.0))
        img = rasterize_mesh_area(mesh, frame, 64)
        assert img.count() == 64 * 64

    def test_cube_face_area_fraction(self):
        mesh = unit_cube_mesh()
        frame = camera_frame(Viewpoint(0.0, 0.0))
        img = rasterize_mesh_area(mesh, frame, 256)
        frac = img.count() / 256**2
        want = 1.0 / (2 * BOX_COVER_SCALE) ** 2
        assert frac == pytest.approx(want, rel=0.02)

    def test_orthographic_depth_invariance(self):
        frame = camera_frame(Viewpoint(0.3, 1.1))
        m1 = unit_cube_mesh(side=0.4)
        m2 = TriMesh(m1.vertices + 5.0 * frame.view_dir, m1.triangles)
        img1 = rasterize_mesh_area(m1, frame, 128)
        img2 = rasterize_mesh_area(m2, frame, 128)
        assert np.array_equal(img1.bits, img2.bits)

    def test_conservative_superset_of_center_rule(self):
        rng = np.random.default_rng(1)
        mesh = unit_cube_mesh(side=0.6)
        for _ in range(5):
            frame = camera_frame(Viewpoint(rng.uniform(-1.2, 1.2), rng.uniform(0, 6.28)))
            center = rasterize_mesh_area(mesh, frame, 96)
            cons = rasterize_mesh_area(mesh, frame, 96, conservative=True)
            assert np.all(cons.bits[center.bits])

    def test_shared_edge_no_double_fill(self):
        # two triangles split a square: center rule must set each covered
        # pixel exactly once (no seam gaps along the shared diagonal)
        v = np.array([[0, -0.4, -0.4], [0, 0.4, -0.4], [0, 0.4, 0.4], [0, -0.4, 0.4]])
        quad = TriMesh(v, np.array([[0, 1, 2], [0, 2, 3]]))
        frame = camera_frame(Viewpoint(0.0, 0.0))
        img = rasterize_mesh_area(quad, frame, 200)
        # no interior holes: the set region must equal its 4-neighbour closure
        from scipy import ndimage
        filled = ndimage.binary_fill_holes(img.bits)
        assert np.array_equal(filled, img.bits)


class TestContour:
    def frame(self):
        return camera_frame(Viewpoint(0.0, 0.0))

    def test_single_pixel_square(self):
        bits = np.zeros((16, 16), dtype=bool)
        bits[5, 7] = True
        loops = trace_pixel_boundaries(bits)
        assert len(loops) == 1
        assert len(loops[0]) == 4

    def test_disk_area(self):
        res = 256
        yy, xx = np.mgrid[0:res, 0:res]
        bits = (xx - 128.0) ** 2 + (yy - 128.0) ** 2 <= 100.0**2
        img = BinaryImage(res, bits)
        poly = extract_outer_contour(img, self.frame())
        px = 2 * BOX_COVER_SCALE / res
        area_px = poly.signed_area / px**2
        assert area_px == pytest.approx(np.pi * 100**2, rel=0.02)

    def test_largest_loop_wins(self):
        res = 64
        bits = np.zeros((res, res), dtype=bool)
        yy, xx = np.mgrid[0:res, 0:res]
        bits |= (xx - 24.0) ** 2 + (yy - 32.0) ** 2 <= 14**2
        bits[50:53, 50:53] = True  # small separate blob
        img = BinaryImage(res, bits)
        poly = extract_outer_contour(img, self.frame())
        px = 2 * BOX_COVER_SCALE / res
        # disk center in world coordinates; must be inside the returned loop
        cx = (24.0 + 0.5) * px - BOX_COVER_SCALE
        cy = (32.0 + 0.5) * px - BOX_COVER_SCALE
        assert points_in_polygon(poly, np.array([[cx, cy]]))[0]
        assert poly.signed_area > (np.pi * 10**2) * px**2

    def test_contour_rerasterization_iou(self):
        # tracing then refilling the polygon must reproduce the region
        res = 256
        yy, xx = np.mgrid[0:res, 0:res]
        bits = ((xx - 120.0) / 80) ** 2 + ((yy - 140.0) / 50) ** 2 <= 1.0
        img = BinaryImage(res, bits)
        poly = extract_outer_contour(img, self.frame())
        px = 2 * BOX_COVER_SCALE / res
        centers = (np.arange(res) + 0.5) * px - BOX_COVER_SCALE
        X, Y = np.meshgrid(centers, centers)
        refilled = points_in_polygon(poly, np.c_[X.ravel(), Y.ravel()]).reshape(res, res)
        inter = (refilled & bits).sum()
        union = (refilled | bits).sum()
        assert inter / union >= 0.98

    def test_empty_image_raises(self):
        img = BinaryImage(8, np.zeros((8, 8), dtype=bool))
        with pytest.raises(GeometryError):
            extract_outer_contour(img, self.frame())

    def test_ccw_output(self):
        bits = np.zeros((32, 32), dtype=bool)
        bits[10:20, 8:25] = True
        poly = extract_outer_contour(BinaryImage(32, bits), self.frame())
        assert poly.signed_area > 0
        assert len(poly.vertices) == 4  # rectangle collapses to 4 corners


class TestMismatch:
    def test_identical(self):
        img = BinaryImage(16, np.zeros((16, 16), dtype=bool))
        assert area_mismatch(img, img) == 0

    def test_all_ones_vs_zeros(self):
        a = BinaryImage(256, np.ones((256, 256), dtype=bool))
        b = BinaryImage(256, np.zeros((256, 256), dtype=bool))
        assert area_mismatch(a, b) == 65536

    def test_subset_difference(self):
        rng = np.random.default_rng(2)
        b = rng.random((64, 64)) < 0.5
        m = b & (rng.random((64, 64)) < 0.5)
        ib, im = BinaryImage(64, b), BinaryImage(64, m)
        assert area_mismatch(ib, im) == int(b.sum() - m.sum())
        assert area_mismatch(ib, im) == area_mismatch(im, ib)

    def test_resolution_mismatch(self):
        a = BinaryImage(16, np.zeros((16, 16), dtype=bool))
        b = BinaryImage(32, np.zeros((32, 32), dtype=bool))
        with pytest.raises(ValueError):
            area_mismatch(a, b)


class TestPgm:
    def test_roundtrip_header(self, tmp_path):
        bits = np.zeros((8, 8), dtype=bool)
        bits[0, 0] = True
        path = tmp_path / "img.pgm"
        write_pgm(BinaryImage(8, bits), path)
        data = path.read_bytes()
        assert data.startswith(b"P5\n8 8\n255\n")
        body = data.split(b"255\n", 1)[1]
        assert len(body) == 64
        assert body[-8] == 255  # bottom-left pixel is last row, first col

    def test_dilate(self):
        bits = np.zeros((8, 8), dtype=bool)
        bits[4, 4] = True
        out = dilate_image(BinaryImage(8, bits))
        assert out.count() == 9
