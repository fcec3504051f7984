"""Ruled-surface cut planning for linear hot-wire rough machining.

The planner wraps a triangle mesh in a unit stock box and produces a short
sequence of collision-free vertical ruled cutting surfaces: each cut is the
extrusion of a smooth closed curve fitted around the shape's outer contour
under an automatically selected viewpoint.
"""

from .geometry import ConvexPolygon, GeometryError, Polygon2, TriMesh
from .bspline import ClosedBSpline2

__all__ = [
    "ClosedBSpline2",
    "ConvexPolygon",
    "GeometryError",
    "Polygon2",
    "TriMesh",
]

__version__ = "0.1.0"
