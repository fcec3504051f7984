"""Implicit remnant material: unit stock box intersected with prism cuts.

Each cut removes everything whose projection onto the cut's image plane falls
outside the cut curve, so membership decomposes into per-cut 2D polygon tests
against a dense polygonal sampling of each curve.  Two query paths exist: an
exact one (prepared polygon predicates, boundary inclusive) used for volume
estimates and safety checks, and a quantized conservative mask used only by
the renderer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import Polygon as ShapelyPolygon
from skimage import measure

from .bspline import ClosedBSpline2
from .geometry import GeometryError, Polygon2, TriMesh, points_in_polygon, \
    polyline_intersects_polygon
from .projection import CameraFrame

CURVE_MEMBERSHIP_SAMPLES = 2048
RENDER_MASK_RESOLUTION = 1024


class InvalidCutError(ValueError):
    """Cut curve does not enclose the shape silhouette under its frame."""


@dataclass(frozen=True)
class Workbench:
    """Support cylinder under the stock box (axis = z)."""

    radius: float = 0.3
    z_top: float = -0.5
    z_bottom: float = -1.0


class PrismCut:
    """One cut: a closed curve in a camera frame, extruded along the view axis.

    Membership of a 3D point is point-in-polygon of its image-plane projection
    against a 2048-vertex sampling of the curve.
    """

    def __init__(self, frame: CameraFrame, curve: ClosedBSpline2):
        self.frame = frame
        self.curve = curve
        self.polygon = curve.sample(CURVE_MEMBERSHIP_SAMPLES)
        self._shape = ShapelyPolygon(self.polygon)
        shapely.prepare(self._shape)
        self._mask = None
        self._mask_geom = None

    def project(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.stack([pts @ self.frame.right, pts @ self.frame.up], axis=1)

    def contains_projected(self, points: np.ndarray) -> np.ndarray:
        """Exact boundary-inclusive membership of 3D points (projected)."""
        q = self.project(points)
        return shapely.intersects_xy(self._shape, q[:, 0], q[:, 1])

    # -- quantized conservative mask (render path only) ----------------------

    def _build_mask(self):
        res = RENDER_MASK_RESOLUTION
        lo = self.polygon.min(axis=0) - 1e-6
        hi = self.polygon.max(axis=0) + 1e-6
        span = hi - lo
        dx, dy = span / res
        grid = _scanline_fill(self.polygon, lo, (dx, dy), res)
        # one-cell conservative dilation: the boundary band counts as inside
        grid = ndimage.binary_dilation(grid, structure=np.ones((3, 3), dtype=bool))
        self._mask = grid
        self._mask_geom = (lo, np.array([dx, dy]))

    def contains_projected_fast(self, points: np.ndarray) -> np.ndarray:
        """Mask-quantized membership, biased outward by one mask cell."""
        if self._mask is None:
            self._build_mask()
        lo, cell = self._mask_geom
        q = self.project(points)
        ij = np.floor((q - lo) / cell).astype(int)
        res = RENDER_MASK_RESOLUTION
        ok = (ij[:, 0] >= 0) & (ij[:, 0] < res) & (ij[:, 1] >= 0) & (ij[:, 1] < res)
        out = np.zeros(len(q), dtype=bool)
        sel = np.flatnonzero(ok)
        out[sel] = self._mask[ij[sel, 1], ij[sel, 0]]
        return out


def _scanline_fill(polygon: np.ndarray, lo, cell, res: int) -> np.ndarray:
    """Exact even-odd fill of a polygon at cell centers of a res x res grid."""
    dx, dy = cell
    cy = lo[1] + (np.arange(res) + 0.5) * dy
    x0, y0 = polygon[:, 0], polygon[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)

    # edge k crosses the scanline of row r where (y0 <= cy) != (y1 <= cy)
    straddle = (y0[:, None] <= cy[None, :]) != (y1[:, None] <= cy[None, :])
    e_idx, r_idx = np.nonzero(straddle)
    denom = y1[e_idx] - y0[e_idx]
    xc = x0[e_idx] + (cy[r_idx] - y0[e_idx]) * (x1[e_idx] - x0[e_idx]) / denom

    # each crossing toggles every cell whose center x exceeds xc
    j = np.clip(np.ceil((xc - lo[0]) / dx - 0.5).astype(int), 0, res)
    delta = np.zeros((res, res + 1))
    np.add.at(delta, (r_idx, j), 1.0)
    counts = np.cumsum(delta[:, :-1], axis=1)
    return (counts % 2) >= 1


@dataclass(frozen=True)
class MaterialState:
    """Immutable remnant solid: unit box (plus optional workbench) minus cuts."""

    cuts: tuple = ()
    workbench: Workbench | None = None
    box_half: float = 0.5

    def clip_aabb(self):
        lo = np.array([-self.box_half] * 3)
        hi = np.array([self.box_half] * 3)
        if self.workbench is not None:
            lo = np.minimum(lo, [-self.workbench.radius, -self.workbench.radius,
                                 self.workbench.z_bottom])
            hi = np.maximum(hi, [self.workbench.radius, self.workbench.radius,
                                 self.workbench.z_top])
        return lo, hi

    def _base_membership(self, pts: np.ndarray) -> np.ndarray:
        inside = np.all(np.abs(pts) <= self.box_half, axis=1)
        if self.workbench is not None:
            w = self.workbench
            in_cyl = (pts[:, 0] ** 2 + pts[:, 1] ** 2 <= w.radius ** 2) \
                & (pts[:, 2] >= w.z_bottom) & (pts[:, 2] <= w.z_top)
            inside |= in_cyl
        return inside

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Exact membership of 3D points; boundary counts as inside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        alive = self._base_membership(pts)
        idx = np.flatnonzero(alive)
        for cut in self.cuts:
            if len(idx) == 0:
                break
            keep = cut.contains_projected(pts[idx])
            idx = idx[keep]
        out = np.zeros(len(pts), dtype=bool)
        out[idx] = True
        return out

    def membership_fast(self, points: np.ndarray) -> np.ndarray:
        """Render-path membership using the quantized conservative cut masks."""
        pts = np.atleast_2d(points)
        alive = self._base_membership(pts)
        idx = np.flatnonzero(alive)
        for cut in self.cuts:
            if len(idx) == 0:
                break
            keep = cut.contains_projected_fast(pts[idx])
            idx = idx[keep]
        out = np.zeros(len(pts), dtype=bool)
        out[idx] = True
        return out


def apply_cut(material: MaterialState, cut: PrismCut,
              silhouette: Polygon2 | None = None) -> MaterialState:
    """New state with the cut appended; the input state is unmodified.

    When the shape's silhouette polygon under the cut's frame is provided,
    the enclosure precondition is asserted: the curve must not touch the
    silhouette and every silhouette vertex must lie inside the curve region.
    """
    if silhouette is not None:
        gon = Polygon2(cut.polygon)
        if polyline_intersects_polygon(cut.polygon, silhouette, closed=True):
            raise InvalidCutError("cut curve touches the shape silhouette")
        if not points_in_polygon(gon, silhouette.vertices).all():
            raise InvalidCutError("cut curve does not enclose the silhouette")
    return MaterialState(cuts=material.cuts + (cut,), workbench=material.workbench,
                         box_half=material.box_half)


def estimate_volume(material: MaterialState, sample_budget: int, seed: int):
    """Monte-Carlo remnant volume over the unit box: (volume, standard_error)."""
    if sample_budget < 1000:
        raise ValueError("sample_budget must be >= 1000")
    rng = np.random.default_rng(seed)
    side = 2 * material.box_half
    pts = rng.uniform(-material.box_half, material.box_half, size=(sample_budget, 3))
    p = float(material.contains(pts).mean())
    box_volume = side ** 3
    stderr = float(np.sqrt(p * (1 - p) / sample_budget)) * box_volume
    return p * box_volume, stderr


def is_closed_orientable(mesh: TriMesh) -> bool:
    """Every directed edge appears exactly once and is matched by its reverse."""
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    keys = directed[:, 0].astype(np.int64) * len(mesh.vertices) + directed[:, 1]
    if len(np.unique(keys)) != len(keys):
        return False
    rev = directed[:, 1].astype(np.int64) * len(mesh.vertices) + directed[:, 0]
    return np.array_equal(np.sort(keys), np.sort(rev))


def mesh_volume(mesh: TriMesh, voxel_resolution: int = 256) -> float:
    """Enclosed mesh volume.

    Closed orientable meshes use the exact divergence-theorem sum; anything
    else falls back to parity-count voxelization so non-watertight inputs
    still produce a usable number.
    """
    if is_closed_orientable(mesh):
        v = mesh.vertices[mesh.triangles]
        det = np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2]))
        return abs(float(det.sum())) / 6.0
    return _voxel_parity_volume(mesh, voxel_resolution)


def _voxel_parity_volume(mesh: TriMesh, res: int) -> float:
    """Even-odd voxel volume by casting +z rays through all (x, y) columns."""
    lo, hi = mesh.bounds()
    span = hi - lo
    span = np.where(span <= 0, 1e-9, span)
    pad = 1e-6 * span
    lo = lo - pad
    span = span + 2 * pad
    dx, dy = span[0] / res, span[1] / res
    cx = lo[0] + (np.arange(res) + 0.5) * dx
    cy = lo[1] + (np.arange(res) + 0.5) * dy

    tri = mesh.vertices[mesh.triangles]
    crossings = [[] for _ in range(res * res)]
    for a, b, c in tri:
        minx, maxx = min(a[0], b[0], c[0]), max(a[0], b[0], c[0])
        miny, maxy = min(a[1], b[1], c[1]), max(a[1], b[1], c[1])
        i0 = max(0, int(np.ceil((minx - lo[0]) / dx - 0.5)))
        i1 = min(res - 1, int(np.floor((maxx - lo[0]) / dx - 0.5)))
        j0 = max(0, int(np.ceil((miny - lo[1]) / dy - 0.5)))
        j1 = min(res - 1, int(np.floor((maxy - lo[1]) / dy - 0.5)))
        if i0 > i1 or j0 > j1:
            continue
        X, Y = np.meshgrid(cx[i0:i1 + 1], cy[j0:j1 + 1])
        d1 = (b[:2] - a[:2])
        d2 = (c[:2] - a[:2])
        den = d1[0] * d2[1] - d1[1] * d2[0]
        if den == 0:
            continue
        px = X - a[0]
        py = Y - a[1]
        u = (px * d2[1] - py * d2[0]) / den
        w = (py * d1[0] - px * d1[1]) / den
        hit = (u >= 0) & (w >= 0) & (u + w <= 1)
        if not hit.any():
            continue
        z = a[2] + u * (b[2] - a[2]) + w * (c[2] - a[2])
        jj, ii = np.nonzero(hit)
        for j, i, zz in zip(jj + j0, ii + i0, z[hit]):
            crossings[j * res + i].append(zz)

    cell_area = dx * dy
    volume = 0.0
    for zs in crossings:
        if len(zs) < 2:
            continue
        zs.sort()
        for k in range(0, len(zs) - 1, 2):
            volume += (zs[k + 1] - zs[k]) * cell_area
    return volume


def termination_check(material: MaterialState, mesh: TriMesh, alpha: float,
                      sample_budget: int = 100_000, seed: int = 0,
                      mesh_vol: float | None = None,
                      material_vol: float | None = None) -> bool:
    """True iff remnant volume exceeds the mesh volume by strictly less than alpha."""
    if material_vol is None:
        material_vol, _ = estimate_volume(material, sample_budget, seed)
    if mesh_vol is None:
        mesh_vol = mesh_volume(mesh)
    return (material_vol - mesh_vol) < alpha


def extract_surface_mesh(material: MaterialState, grid_resolution: int = 64) -> TriMesh:
    """Marching-cubes surface of the membership indicator over the stock box."""
    if grid_resolution < 16:
        raise ValueError("grid_resolution must be >= 16")
    margin = 1.1 * material.box_half
    axis = np.linspace(-margin, margin, grid_resolution)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    field = material.contains(pts).reshape(X.shape).astype(float)
    if field.max() == 0.0:
        raise GeometryError("empty material")
    spacing = (axis[1] - axis[0],) * 3
    verts, faces, _, _ = measure.marching_cubes(field, level=0.5, spacing=spacing)
    verts = verts + np.array([-margin, -margin, -margin])
    return TriMesh(verts, faces)
