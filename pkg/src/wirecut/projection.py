"""Orthographic view-sphere camera, binary rasterization and contour tracing.

Images are square boolean occupancy grids in a y-up frame: row index grows
with the camera's up axis, column index with its right axis.  The camera
always looks at the origin from a sphere of radius r; the image half-extent
covers the unit stock box with a 10% margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import GeometryError, Polygon2, TriMesh, merge_collinear_vertices

# world units per image half-extent: unit box diagonal/2, plus 10% margin
BOX_COVER_SCALE = 1.1 * np.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Viewpoint:
    """Camera location on the view sphere: elevation, azimuth, radius."""

    phi: float
    theta: float
    r: float = 2.0

    def __post_init__(self):
        if not (self.r > 0):
            raise GeometryError("viewpoint radius must be positive")
        if not (-np.pi / 2 - 1e-12 <= self.phi <= np.pi / 2 + 1e-12):
            raise GeometryError("elevation out of range")
        object.__setattr__(self, "theta", float(np.mod(self.theta, 2 * np.pi)))
        object.__setattr__(self, "phi", float(np.clip(self.phi, -np.pi / 2, np.pi / 2)))

    def position(self) -> np.ndarray:
        cp = np.cos(self.phi)
        return self.r * np.array([cp * np.cos(self.theta),
                                  cp * np.sin(self.theta),
                                  np.sin(self.phi)])

    def unit_direction(self) -> np.ndarray:
        return self.position() / self.r


@dataclass(frozen=True)
class CameraFrame:
    """Orthonormal right-handed camera basis; view_dir points at the origin."""

    position: np.ndarray
    view_dir: np.ndarray
    right: np.ndarray
    up: np.ndarray
    scale: float = BOX_COVER_SCALE

    def project(self, points: np.ndarray) -> np.ndarray:
        """Orthographic image-plane coordinates (world scale) of 3D points."""
        pts = np.atleast_2d(points)
        return np.stack([pts @ self.right, pts @ self.up], axis=1)

    def lift(self, points2: np.ndarray) -> np.ndarray:
        """Image-plane points back to 3D on the plane through the origin."""
        pts = np.atleast_2d(points2)
        return pts[:, :1] * self.right[None, :] + pts[:, 1:2] * self.up[None, :]


def camera_frame(v: Viewpoint) -> CameraFrame:
    """Build the camera frame for a viewpoint.

    The roll convention projects global +z onto the image plane as "up";
    within 10 degrees of the poles +x is used instead.
    """
    pos = v.position()
    back = pos / np.linalg.norm(pos)
    up_hint = np.array([0.0, 0.0, 1.0])
    if abs(v.phi) > np.deg2rad(80.0):
        up_hint = np.array([1.0, 0.0, 0.0])
    right = np.cross(up_hint, back)
    right /= np.linalg.norm(right)
    up = np.cross(back, right)
    return CameraFrame(position=pos, view_dir=-back, right=right, up=up)


@dataclass(frozen=True)
class BinaryImage:
    """Square boolean occupancy image."""

    resolution: int
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != (self.resolution, self.resolution):
            raise GeometryError("bits shape must match resolution")
        object.__setattr__(self, "bits", b)

    def count(self) -> int:
        return int(self.bits.sum())


def area_mismatch(img_b: BinaryImage, img_m: BinaryImage) -> int:
    """Number of differing pixels (squared Frobenius norm for 0/1 images)."""
    if img_b.resolution != img_m.resolution:
        raise ValueError("image resolutions differ")
    return int(np.sum(img_b.bits != img_m.bits))


def write_pgm(image: BinaryImage, path) -> None:
    """Binary P5 PGM dump, 0/255, top row first."""
    data = np.where(image.bits[::-1], 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.resolution} {image.resolution}\n255\n".encode())
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# triangle rasterization


def rasterize_mesh_area(mesh: TriMesh, frame: CameraFrame, resolution: int,
                        conservative: bool = False) -> BinaryImage:
    """Binary coverage image of the mesh's orthographic projection.

    Default rule: a pixel is set iff its center lies inside some projected
    triangle (top-left tie-break on shared edges, so the image is
    deterministic).  conservative=True instead sets every pixel whose square
    overlaps a projected triangle, which is the safe over-approximation used
    when contours feed collision constraints.
    """
    if len(mesh.triangles) == 0:
        raise GeometryError("empty mesh")
    pts2 = frame.project(mesh.vertices)
    px = 2.0 * frame.scale / resolution
    # pixel coordinates: center of pixel (row, col) at (col + 0.5, row + 0.5)
    pix = (pts2 + frame.scale) / px
    tris = pix[mesh.triangles]  # (m, 3, 2)

    bits = np.zeros((resolution, resolution), dtype=bool)
    for tri in tris:
        _fill_triangle(bits, tri, resolution, conservative)
    return BinaryImage(resolution, bits)


def _fill_triangle(bits, tri, resolution, conservative):
    a, b, c = tri
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area2 < 0:
        b, c = c, b
        area2 = -area2
    if area2 == 0.0:
        if conservative:
            for p, q in ((a, b), (b, c), (c, a)):
                _fill_segment_cover(bits, p, q, resolution)
        return

    lo = np.floor(np.minimum(np.minimum(a, b), c) - (0.5 if conservative else 0.0)).astype(int)
    hi = np.ceil(np.maximum(np.maximum(a, b), c) + (0.5 if conservative else 0.0)).astype(int)
    x0 = max(lo[0], 0)
    x1 = min(hi[0] + 1, resolution)
    y0 = max(lo[1], 0)
    y1 = min(hi[1] + 1, resolution)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1) + 0.5
    ys = np.arange(y0, y1) + 0.5
    X, Y = np.meshgrid(xs, ys)

    inside = np.ones(X.shape, dtype=bool)
    for (p, q) in ((a, b), (b, c), (c, a)):
        e = q - p
        E = e[0] * (Y - p[1]) - e[1] * (X - p[0])
        if conservative:
            support = 0.5 * (abs(e[1]) + abs(e[0]))
            inside &= E >= -support
        else:
            # top-left rule: boundary centers belong to top (e pointing -x)
            # and left (e pointing -y) edges only
            top_left = (e[1] < 0) or (e[1] == 0 and e[0] < 0)
            inside &= (E >= 0) if top_left else (E > 0)
    bits[y0:y1, x0:x1] |= inside


def _fill_segment_cover(bits, p, q, resolution):
    """Conservative cover of a segment in pixel coordinates (half-pixel pad)."""
    n = max(2, int(np.ceil(np.linalg.norm(q - p) * 2)) + 1)
    t = np.linspace(0.0, 1.0, n)
    pts = p[None, :] + t[:, None] * (q - p)[None, :]
    for dx in (-0.5, 0.0, 0.5):
        for dy in (-0.5, 0.0, 0.5):
            ix = np.floor(pts[:, 0] + dx).astype(int)
            iy = np.floor(pts[:, 1] + dy).astype(int)
            ok = (ix >= 0) & (ix < resolution) & (iy >= 0) & (iy < resolution)
            bits[iy[ok], ix[ok]] = True


def dilate_image(image: BinaryImage, iterations: int = 1) -> BinaryImage:
    """8-neighbourhood binary dilation (adds one pixel ring per iteration)."""
    grown = ndimage.binary_dilation(image.bits, structure=np.ones((3, 3), dtype=bool),
                                    iterations=iterations)
    return BinaryImage(image.resolution, grown)


# ---------------------------------------------------------------------------
# material rendering (ray-sampled membership)


def rasterize_material_area(material, frame: CameraFrame, resolution: int,
                            depth_samples: int = 256) -> BinaryImage:
    """Binary area image of an implicit material state.

    A pixel is set iff any of depth_samples points along its orthographic
    view ray (clipped to the material's bounding volume) satisfies material
    membership.  Rays are processed in depth chunks with early exit.
    """
    if depth_samples < 2:
        raise ValueError("depth_samples must be >= 2")
    px = 2.0 * frame.scale / resolution
    centers = (np.arange(resolution) + 0.5) * px - frame.scale
    X, Y = np.meshgrid(centers, centers)
    origins = (X.ravel()[:, None] * frame.right[None, :]
               + Y.ravel()[:, None] * frame.up[None, :])
    d = frame.view_dir

    lo, hi = material.clip_aabb()
    t0, t1 = _clip_rays_aabb(origins, d, lo, hi)
    alive = np.flatnonzero(t1 > t0)
    hit = np.zeros(resolution * resolution, dtype=bool)

    chunk = 16
    for j0 in range(0, depth_samples, chunk):
        if len(alive) == 0:
            break
        js = np.arange(j0, min(j0 + chunk, depth_samples))
        frac = (js + 0.5) / depth_samples
        ts = t0[alive, None] + frac[None, :] * (t1 - t0)[alive, None]
        pts = origins[alive, None, :] + ts[:, :, None] * d[None, None, :]
        member = material.membership_fast(pts.reshape(-1, 3)).reshape(len(alive), len(js))
        found = member.any(axis=1)
        hit[alive[found]] = True
        alive = alive[~found]

    return BinaryImage(resolution, hit.reshape(resolution, resolution))


def _clip_rays_aabb(origins, d, lo, hi):
    """Entry/exit parameters of rays origin + t*d against an AABB."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(d == 0.0, np.inf, 1.0 / d)
    t_lo = (lo[None, :] - origins) * inv[None, :]
    t_hi = (hi[None, :] - origins) * inv[None, :]
    # where d == 0: inside slab iff lo <= o <= hi
    para = d == 0.0
    if para.any():
        inside = (origins >= lo[None, :]) & (origins <= hi[None, :])
        t_lo = np.where(para[None, :], np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(para[None, :], np.where(inside, np.inf, -np.inf), t_hi)
    near = np.minimum(t_lo, t_hi).max(axis=1)
    far = np.maximum(t_lo, t_hi).min(axis=1)
    return near, far


# ---------------------------------------------------------------------------
# contour extraction


def extract_outer_contour(image: BinaryImage, frame: CameraFrame) -> Polygon2:
    """Outer contour polygon of the set-pixel region, in image-plane world units.

    Boundary edges of the pixel union are chained into closed loops; the loop
    with the largest enclosed area is returned CCW, with collinear staircase
    runs merged.
    """
    if image.count() == 0:
        raise GeometryError("empty image")
    loops = trace_pixel_boundaries(image.bits)
    best = max(loops, key=_loop_area)
    if _loop_area(best) <= 0:
        raise GeometryError("no outer loop found")
    px = 2.0 * frame.scale / image.resolution
    world = np.asarray(best, dtype=float) * px - frame.scale
    world = merge_collinear_vertices(world, tol=1e-9)
    return Polygon2(world)


def _loop_area(loop):
    v = np.asarray(loop, dtype=float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def trace_pixel_boundaries(bits: np.ndarray) -> list:
    """Chain the boundary edges of a boolean pixel grid into closed loops.

    Pixels are unit squares; every edge between a set and an unset pixel (or
    the border) is directed with the set pixel on its left, so outer loops
    come out CCW and holes CW.  Vertices are integer grid corners (x, y).
    At checkerboard corners the left-turning continuation is preferred, which
    keeps diagonally touching pixels in one loop.
    """
    res_y, res_x = bits.shape
    padded = np.zeros((res_y + 2, res_x + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits

    edges = {}  # start corner -> list of (end corner, direction code)

    def add_edge(x0, y0, x1, y1):
        edges.setdefault((x0, y0), []).append((x1, y1))

    ys, xs = np.nonzero(bits)
    for y, x in zip(ys, xs):
        if not padded[y, x + 1]:        # neighbour below unset: bottom edge
            add_edge(x, y, x + 1, y)
        if not padded[y + 1, x + 2]:    # right edge
            add_edge(x + 1, y, x + 1, y + 1)
        if not padded[y + 2, x + 1]:    # top edge
            add_edge(x + 1, y + 1, x, y + 1)
        if not padded[y + 1, x]:        # left edge
            add_edge(x, y + 1, x, y)

    loops = []
    while edges:
        start = next(iter(edges))
        loop = [start]
        cur = start
        prev_dir = None
        while True:
            outs = edges.get(cur)
            if not outs:
                break
            if len(outs) == 1 or prev_dir is None:
                nxt = outs.pop()
            else:
                # prefer the left turn relative to the incoming direction
                def turn(cand):
                    d = (cand[0] - cur[0], cand[1] - cur[1])
                    return prev_dir[0] * d[1] - prev_dir[1] * d[0]
                outs.sort(key=turn)
                nxt = outs.pop()  # largest cross product = left turn
            if not edges[cur]:
                del edges[cur]
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            if nxt == start:
                break
            loop.append(nxt)
            cur = nxt
        if len(loop) >= 4:
            loops.append(loop)
    return loops
