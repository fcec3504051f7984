"""Closed (periodic) planar B-spline curves.

The curve is defined by n control points and n knot values in [0, 1), both
indexed cyclically: control point i is paired with knot i, and the knot
sequence repeats with period 1.  Uniform cubic curves are the default; knot
insertion keeps the geometry bit-stable so collision certificates survive
refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError


class SingularParameterError(ValueError):
    """First derivative vanished where a Frenet frame was requested."""


@dataclass(frozen=True)
class ClosedBSpline2:
    """Periodic planar B-spline c(u), u in [0, 1], c(0) == c(1)."""

    degree: int
    control_points: np.ndarray   # (n, 2)
    knots: np.ndarray            # (n,) nondecreasing values in [0, 1)

    def __post_init__(self):
        p = np.asarray(self.control_points, dtype=float)
        k = np.asarray(self.knots, dtype=float)
        if self.degree < 1:
            raise GeometryError("degree must be >= 1")
        if p.ndim != 2 or p.shape[1] != 2:
            raise GeometryError("control points must be (n, 2)")
        if len(p) < self.degree + 1:
            raise GeometryError("need at least degree+1 control points")
        if k.shape != (len(p),):
            raise GeometryError("knot count must equal control point count")
        if np.any(np.diff(k) < 0) or k[0] < 0 or k[-1] >= k[0] + 1:
            raise GeometryError("knots must be nondecreasing within one period")
        # multiplicity within the cyclic sequence must not exceed the degree
        ext = np.concatenate([k, k[: self.degree] + 1.0])
        for i in range(len(k)):
            if ext[i + self.degree] - ext[i] <= 0:
                raise GeometryError("knot multiplicity exceeds degree")
        object.__setattr__(self, "control_points", p)
        object.__setattr__(self, "knots", k)

    @property
    def n(self) -> int:
        return len(self.control_points)

    # -- evaluation ---------------------------------------------------------

    def _wrap(self, u):
        """Map parameters into the fundamental period [knots[0], knots[0]+1)."""
        u0 = self.knots[0]
        return u0 + np.mod(np.asarray(u, dtype=float) - u0, 1.0)

    def _unwrapped_knot(self, idx):
        """Knot value at any integer index: knots[i mod n] + floor(i / n)."""
        idx = np.asarray(idx)
        return self.knots[np.mod(idx, self.n)] + np.floor_divide(idx, self.n)

    def _spans_and_basis(self, u, nders: int):
        """Span index and nonzero basis values/derivatives at each parameter.

        Returns (span (m,), basis (m, nders+1, degree+1)) where span s means
        u lies in [knots[s], knots[s+1]) cyclically and basis[:, d, j] is the
        d-th derivative of the basis of control point (s - degree + j) mod n.
        """
        u = np.atleast_1d(self._wrap(u))
        n, p = self.n, self.degree
        span = np.searchsorted(self.knots, u, side="right") - 1
        # skip zero-length spans (repeated knots): step left to a real span
        for _ in range(p):
            width = self._unwrapped_knot(span + 1) - self._unwrapped_knot(span)
            bad = width <= 0
            if not bad.any():
                break
            span = np.where(bad, span - 1, span)

        m = len(u)
        # Cox-de Boor triangle, vectorized over the batch (NURBS book A2.3)
        ndu = np.zeros((m, p + 1, p + 1))
        ndu[:, 0, 0] = 1.0
        left = np.zeros((m, p + 1))
        right = np.zeros((m, p + 1))
        for j in range(1, p + 1):
            left[:, j] = u - self._unwrapped_knot(span + 1 - j)
            right[:, j] = self._unwrapped_knot(span + j) - u
            saved = np.zeros(m)
            for r in range(j):
                denom = right[:, r + 1] + left[:, j - r]
                denom = np.where(denom == 0.0, 1.0, denom)
                ndu[:, j, r] = denom
                temp = ndu[:, r, j - 1] / denom
                ndu[:, r, j] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            ndu[:, j, j] = saved

        ders = np.zeros((m, nders + 1, p + 1))
        ders[:, 0, :] = ndu[:, :, p]
        if nders >= 1:
            for r in range(p + 1):
                a = np.zeros((m, 2, p + 1))
                a[:, 0, 0] = 1.0
                s1, s2 = 0, 1
                for k in range(1, nders + 1):
                    d = np.zeros(m)
                    rk, pk = r - k, p - k
                    if r >= k:
                        a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                        d = a[:, s2, 0] * ndu[:, rk, pk]
                    j1 = 1 if rk >= -1 else -rk
                    j2 = k - 1 if r - 1 <= pk else p - r
                    for j in range(j1, j2 + 1):
                        a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                        d += a[:, s2, j] * ndu[:, rk + j, pk]
                    if r <= pk:
                        a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                        d += a[:, s2, k] * ndu[:, r, pk]
                    ders[:, k, r] = d
                    s1, s2 = s2, s1
            fac = 1.0
            for k in range(1, nders + 1):
                fac *= (p - k + 1)
                ders[:, k, :] *= fac
        return span, ders

    def evaluate(self, u, order: int = 0) -> np.ndarray:
        """Point (order 0) or derivative vector (order 1, 2) at parameter u.

        Accepts a scalar or an array; returns (2,) or (m, 2).
        """
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        scalar = np.isscalar(u) or np.ndim(u) == 0
        span, ders = self._spans_and_basis(u, order)
        idx = np.mod(span[:, None] - self.degree + np.arange(self.degree + 1)[None, :], self.n)
        pts = np.einsum("mj,mjd->md", ders[:, order, :], self.control_points[idx])
        return pts[0] if scalar else pts

    def design_matrix(self, u, order: int = 0) -> np.ndarray:
        """Dense (m, n) matrix D with evaluate(u, order) == D @ control_points."""
        u = np.atleast_1d(u)
        span, ders = self._spans_and_basis(u, order)
        idx = np.mod(span[:, None] - self.degree + np.arange(self.degree + 1)[None, :], self.n)
        D = np.zeros((len(u), self.n))
        np.add.at(D, (np.arange(len(u))[:, None], idx), ders[:, order, :])
        return D

    def sample(self, count: int) -> np.ndarray:
        """Closed polyline of `count` samples at uniform parameters (last != first)."""
        return self.evaluate(np.arange(count) / count)

    # -- differential geometry ----------------------------------------------

    def frenet(self, u):
        """Unit tangent, unit normal and curvature radius at parameter(s) u.

        The normal is oriented so that the curvature centre sits at local
        coordinates (0, rho).  Straight regions report rho = +inf with the
        left-of-tangent normal.  Raises SingularParameterError when the first
        derivative vanishes.
        """
        scalar = np.isscalar(u) or np.ndim(u) == 0
        d1 = np.atleast_2d(self.evaluate(u, order=1))
        d2 = np.atleast_2d(self.evaluate(u, order=2))
        speed = np.linalg.norm(d1, axis=1)
        if np.any(speed < 1e-14):
            raise SingularParameterError("zero first derivative")
        T = d1 / speed[:, None]
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        kappa = cross / speed**3
        left = np.stack([-T[:, 1], T[:, 0]], axis=1)  # 90 deg CCW rotation of T
        sign = np.where(kappa >= 0, 1.0, -1.0)
        N = left * sign[:, None]
        with np.errstate(divide="ignore"):
            rho = np.where(np.abs(kappa) < 1e-12, np.inf, 1.0 / np.abs(kappa))
        if scalar:
            return T[0], N[0], float(rho[0])
        return T, N, rho

    # -- refinement ----------------------------------------------------------

    def insert_knot(self, u: float) -> "ClosedBSpline2":
        """Insert one knot at u, preserving the curve geometry exactly.

        Cyclic Boehm insertion: the p controls whose bases are nonzero at u
        are re-blended and one control is added.  Raises GeometryError when
        the insertion would push a knot multiplicity past the degree.
        """
        n, p = self.n, self.degree
        u = float(self._wrap(u))
        mult = int(np.sum(np.abs(self.knots - u) == 0.0))
        if mult >= p:
            raise GeometryError("knot multiplicity would exceed degree")
        s = int(np.searchsorted(self.knots, u, side="right") - 1)

        uk = self._unwrapped_knot
        # One period of the refined cyclic sequence, window i in [s-n+1, s+1]:
        # pairs (knot_i, ctrl_i) with the Boehm blend applied on (s-p, s].
        new_knots = []
        new_ctrl = []
        for i in range(s - n + 1, s + 2):
            if i == s + 1:
                kv = u
                cv = self.control_points[s % n]
            else:
                kv = float(uk(i))
                if i > s - p:
                    alpha = (u - uk(i)) / (uk(i + p) - uk(i))
                    cv = (1 - alpha) * self.control_points[(i - 1) % n] \
                        + alpha * self.control_points[i % n]
                else:
                    cv = self.control_points[i % n]
            new_knots.append(kv)
            new_ctrl.append(cv)

        knots = np.mod(np.asarray(new_knots), 1.0)
        ctrl = np.asarray(new_ctrl)
        # rotate so the knot list is nondecreasing and starts at its minimum
        drops = np.flatnonzero(np.diff(knots) < 0)
        if len(drops):
            r = drops[0] + 1
            knots = np.roll(knots, -r)
            ctrl = np.roll(ctrl, -r, axis=0)
        return ClosedBSpline2(self.degree, ctrl, knots)


def uniform_closed(control_points: np.ndarray, degree: int = 3) -> ClosedBSpline2:
    """Closed spline with uniformly spaced knots."""
    pts = np.asarray(control_points, dtype=float)
    n = len(pts)
    return ClosedBSpline2(degree, pts, np.arange(n) / n)


def from_circle_points(knots: np.ndarray, angles: np.ndarray, radius: float,
                       center: np.ndarray | None = None, degree: int = 3) -> ClosedBSpline2:
    """Closed spline whose control points sit on a circle at the given angles."""
    knots = np.asarray(knots, dtype=float)
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    pts = c + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return ClosedBSpline2(degree, pts, knots)
