"""Planar and mesh geometry primitives: polygons, convex hulls, triangle meshes.

All 2D polygons used by the planner are simple and counter-clockwise; boundary
points count as inside.  Coordinates are plain float64 numpy arrays in stock-box
units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle soup.

    vertices: (n, 3) float array.
    triangles: (m, 3) int array of vertex indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise GeometryError("vertices must be an (n, 3) array")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) < 1:
            raise GeometryError("mesh needs at least one triangle")
        if t.min() < 0 or t.max() >= len(v):
            raise GeometryError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def d_bb(self) -> float:
        """Length of the axis-aligned bounding-box diagonal."""
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        d = float(np.linalg.norm(ext))
        if d <= 0.0:
            raise GeometryError("degenerate mesh: zero bounding box")
        return d

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class Polygon2:
    """Simple closed polygon, CCW, implicit last-to-first edge."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def signed_area(self) -> float:
        return shoelace_area(self.vertices)

    def centroid(self) -> np.ndarray:
        """Area centroid; falls back to the vertex mean for zero-area input."""
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = 0.5 * cr.sum()
        if abs(a) < 1e-300:
            return v.mean(axis=0)
        return (v + w).T @ cr / (6.0 * a)

    def edges(self):
        """(k, 2, 2) array of edge endpoints."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def perimeter(self) -> float:
        v = self.vertices
        return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex CCW polygon (no collinear vertices)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("convex polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", v)

    def as_polygon(self) -> Polygon2:
        return Polygon2(self.vertices)


def shoelace_area(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def ensure_ccw(vertices: np.ndarray) -> np.ndarray:
    if shoelace_area(vertices) < 0.0:
        return vertices[::-1].copy()
    return np.asarray(vertices, dtype=float)


# ---------------------------------------------------------------------------
# point/segment/polygon predicates


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points (m, 2) to each segment of (a[k], b[k]): (m, k)."""
    points = np.atleast_2d(points)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    e = b - a  # (k,2)
    pe = points[:, None, :] - a[None, :, :]  # (m,k,2)
    ee = np.einsum("kd,kd->k", e, e)
    ee = np.where(ee == 0.0, 1.0, ee)
    t = np.clip(np.einsum("mkd,kd->mk", pe, e) / ee, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * e[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=2)


def distance_to_polygon_boundary(points: np.ndarray, poly: Polygon2) -> np.ndarray:
    """Minimum distance from each point to the polygon boundary."""
    v = poly.vertices
    return point_segment_distance(points, v, np.roll(v, -1, axis=0)).min(axis=1)


def points_in_polygon(poly: Polygon2 | np.ndarray, points: np.ndarray,
                      boundary_eps: float = 1e-12) -> np.ndarray:
    """Even-odd membership test; boundary points count as inside.

    Accepts a Polygon2 or a raw (k, 2) vertex array.  boundary_eps is the
    absolute tolerance of the on-boundary classification.
    """
    verts = poly.vertices if isinstance(poly, Polygon2) else np.asarray(poly, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=bool)
    chunk = max(1, int(4_000_000 // max(len(verts), 1)))
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = _pip_chunk(verts, pts[s:s + chunk], boundary_eps)
    return out


def _pip_chunk(verts: np.ndarray, pts: np.ndarray, eps: float) -> np.ndarray:
    x = pts[:, 0, None]
    y = pts[:, 1, None]
    x0 = verts[None, :, 0]
    y0 = verts[None, :, 1]
    x1 = np.roll(verts[:, 0], -1)[None, :]
    y1 = np.roll(verts[:, 1], -1)[None, :]
    straddle = (y0 <= y) != (y1 <= y)
    denom = np.where(y1 == y0, 1.0, y1 - y0)
    xi = x0 + (y - y0) * (x1 - x0) / denom
    inside = ((straddle & (x < xi)).sum(axis=1) % 2).astype(bool)
    if eps > 0.0:
        d = point_segment_distance(pts, verts, np.roll(verts, -1, axis=0)).min(axis=1)
        inside |= d <= eps
    return inside


def point_in_polygon(poly: Polygon2, p: np.ndarray, boundary_eps: float = 1e-12) -> bool:
    return bool(points_in_polygon(poly, np.asarray(p, dtype=float)[None, :], boundary_eps)[0])


def segments_intersect_any(p0: np.ndarray, p1: np.ndarray,
                           q0: np.ndarray, q1: np.ndarray,
                           eps: float = 0.0) -> bool:
    """True if any segment (p0[i], p1[i]) touches any segment (q0[j], q1[j]).

    Touching (shared endpoint or collinear overlap) counts as intersecting.
    Vectorized over both families with chunking to bound memory; eps loosens
    the orientation and bounding tests.
    """
    p0 = np.atleast_2d(p0); p1 = np.atleast_2d(p1)
    q0 = np.atleast_2d(q0); q1 = np.atleast_2d(q1)
    chunk = max(1, int(2_000_000 // max(len(q0), 1)))
    for s in range(0, len(p0), chunk):
        if segment_pairs_intersecting(p0[s:s + chunk], p1[s:s + chunk], q0, q1, eps).any():
            return True
    return False


def segment_pairs_intersecting(p0, p1, q0, q1, eps: float = 0.0) -> np.ndarray:
    """(m, k) boolean matrix of segment-pair intersections (touch inclusive)."""
    p0 = np.atleast_2d(p0); p1 = np.atleast_2d(p1)
    q0 = np.atleast_2d(q0); q1 = np.atleast_2d(q1)
    A = p0[:, None, :]
    B = p1[:, None, :]
    C = q0[None, :, :]
    D = q1[None, :, :]

    def orient(o, a, b):
        return ((a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1])
                - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0]))

    o1 = orient(C, D, A)
    o2 = orient(C, D, B)
    o3 = orient(A, B, C)
    o4 = orient(A, B, D)
    proper = (((o1 > eps) & (o2 < -eps)) | ((o1 < -eps) & (o2 > eps))) \
        & (((o3 > eps) & (o4 < -eps)) | ((o3 < -eps) & (o4 > eps)))

    def on_segment(o, s0, s1, p):
        within = ((np.minimum(s0[..., 0], s1[..., 0]) - eps <= p[..., 0])
                  & (p[..., 0] <= np.maximum(s0[..., 0], s1[..., 0]) + eps)
                  & (np.minimum(s0[..., 1], s1[..., 1]) - eps <= p[..., 1])
                  & (p[..., 1] <= np.maximum(s0[..., 1], s1[..., 1]) + eps))
        return (np.abs(o) <= eps) & within

    touch = (on_segment(o1, C, D, A) | on_segment(o2, C, D, B)
             | on_segment(o3, A, B, C) | on_segment(o4, A, B, D))
    return proper | touch


def polyline_intersects_polygon(polyline: np.ndarray, poly: Polygon2,
                                closed: bool = True, eps: float = 0.0) -> bool:
    """True if the (closed) polyline touches any edge of the polygon."""
    pts = np.asarray(polyline, dtype=float)
    p0 = pts
    p1 = np.roll(pts, -1, axis=0) if closed else pts[1:]
    if not closed:
        p0 = pts[:-1]
    v = poly.vertices
    return segments_intersect_any(p0, p1, v, np.roll(v, -1, axis=0), eps)


# ---------------------------------------------------------------------------
# convex hulls


def convex_hull(points: np.ndarray) -> ConvexPolygon:
    """Monotone-chain convex hull; strictly convex CCW output.

    Raises GeometryError when all points are collinear.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        raise GeometryError("convex hull needs at least 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise GeometryError("degenerate hull: collinear input")
    return ConvexPolygon(hull)


def hausdorff_convex(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Symmetric Hausdorff distance between two convex polygons with interiors.

    For convex sets the farthest point of one region from the other is a
    vertex, so the distance reduces to vertex-to-region queries.
    """
    def one_sided(src: ConvexPolygon, dst: ConvexPolygon) -> float:
        v = src.vertices
        inside = points_in_polygon(dst.as_polygon(), v)
        d = distance_to_polygon_boundary(v, dst.as_polygon())
        d[inside] = 0.0
        return float(d.max())

    return max(one_sided(a, b), one_sided(b, a))


def simplify_convex_hull(hull: ConvexPolygon, beta: float,
                         min_vertices: int) -> ConvexPolygon:
    """Greedy vertex deletion keeping the Hausdorff distance to `hull` small.

    Repeatedly drops the vertex whose removal stays closest to the original
    hull while the best candidate distance is below beta and more than
    min_vertices (and more than 3) vertices remain.
    """
    current = hull.vertices.copy()
    while len(current) > max(min_vertices, 3):
        best_j, best_d = -1, np.inf
        for j in range(len(current)):
            candidate = np.delete(current, j, axis=0)
            d = hausdorff_convex(hull, ConvexPolygon(candidate))
            if d < best_d:
                best_j, best_d = j, d
        if best_d < beta:
            current = np.delete(current, best_j, axis=0)
        else:
            break
    return ConvexPolygon(current)


# ---------------------------------------------------------------------------
# polygon boundary sampling


def sample_polygon_boundary(poly: Polygon2, n: int, origin_vertex: int = 0):
    """n points uniformly spaced in arc length along the boundary.

    Sampling starts at `origin_vertex` and runs in vertex order.  Returns
    (points (n, 2), fractions (n,)) where fractions are arc-length ratios
    measured from the origin vertex.
    """
    v = np.roll(poly.vertices, -origin_vertex, axis=0)
    seg = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(seg, axis=1)
    total = lengths.sum()
    if total <= 0:
        raise GeometryError("zero-length polygon boundary")
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = (np.arange(n) + 0.0) / n * total
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
    local = (s - cum[idx]) / np.where(lengths[idx] == 0, 1.0, lengths[idx])
    pts = v[idx] + local[:, None] * seg[idx]
    return pts, s / total


def arc_length_fraction(poly: Polygon2, vertex_index: int, origin_vertex: int) -> float:
    """Arc-length ratio of a vertex measured from origin_vertex along the boundary."""
    v = poly.vertices
    seg = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    total = seg.sum()
    i = origin_vertex
    dist = 0.0
    while i != vertex_index:
        dist += seg[i]
        i = (i + 1) % len(v)
    return dist / total


def merge_collinear_vertices(vertices: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Drop vertices lying on the segment between their neighbours (within tol)."""
    v = np.asarray(vertices, dtype=float)
    keep = np.ones(len(v), dtype=bool)
    prev = np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0)
    e = nxt - prev
    cross = np.abs((v[:, 0] - prev[:, 0]) * e[:, 1] - (v[:, 1] - prev[:, 1]) * e[:, 0])
    norm = np.linalg.norm(e, axis=1)
    keep = cross > tol * np.where(norm == 0, 1.0, norm)
    if keep.sum() < 3:
        return v
    return v[keep]
