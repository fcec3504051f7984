"""Continuous collision detection for a linearly moving polyline.

Every sample point moves along its own straight line (sample + t * velocity);
the obstacle is a static simple polygon.  First contact between the moving
polyline and the obstacle boundary is always a vertex-edge event, so the exact
maximum step solves linear (moving vertex vs static edge) and quadratic
(static vertex vs moving edge) crossing times.
"""

from __future__ import annotations

import numpy as np

from .geometry import Polygon2, segments_intersect_any


class CollisionStateError(ValueError):
    """The polyline already touches the obstacle at t = 0."""


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def ccd_max_step(samples: np.ndarray, velocities: np.ndarray, obstacle: Polygon2,
                 displacement_cap: float = np.inf, closed: bool = False) -> float:
    """Largest step t so the moving polyline never touches the obstacle on [0, t].

    samples, velocities: matching (m, 2) arrays; sample i travels to
    samples[i] + t * velocities[i].  displacement_cap bounds the returned step
    so that no sample moves farther than that length.  closed joins the last
    sample back to the first.

    Raises CollisionStateError if the polyline intersects the obstacle at t=0.
    """
    a = np.atleast_2d(np.asarray(samples, dtype=float))
    v = np.atleast_2d(np.asarray(velocities, dtype=float))
    if a.shape != v.shape:
        raise ValueError("samples and velocities must have matching shapes")
    verts = obstacle.vertices
    e0 = verts
    e1 = np.roll(verts, -1, axis=0)

    if len(a) >= 2:
        p1 = np.roll(a, -1, axis=0) if closed else a[1:]
        p0 = a if closed else a[:-1]
        if segments_intersect_any(p0, p1, e0, e1):
            raise CollisionStateError("polyline already touches the obstacle")

    max_speed = float(np.linalg.norm(v, axis=1).max(initial=0.0))
    cap = np.inf if max_speed == 0.0 else displacement_cap / max_speed

    # conservative bounding box prefilter: obstacle geometry entirely outside
    # the swept region (samples plus capped displacement) can never be hit
    if np.isfinite(cap):
        swept_lo = np.minimum(a, a + cap * v).min(axis=0)
        swept_hi = np.maximum(a, a + cap * v).max(axis=0)
        elo = np.minimum(e0, e1)
        ehi = np.maximum(e0, e1)
        near = np.all(ehi >= swept_lo, axis=1) & np.all(elo <= swept_hi, axis=1)
        e0, e1 = e0[near], e1[near]
        verts = verts[np.all(verts >= swept_lo, axis=1) & np.all(verts <= swept_hi, axis=1)]
        if len(e0) == 0 and len(verts) == 0:
            return cap

    t_hit = np.inf

    # moving vertex a_i(t) crossing a static edge: linear in t,
    # cross(e, a0 - e0) + t * cross(e, v) == 0
    e = e1 - e0                                       # (k,2)
    denom = _cross(e[None, :, :], v[:, None, :])      # (m,k)
    num = _cross(e[None, :, :], e0[None, :, :] - a[:, None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / denom
    valid = np.isfinite(t) & (t >= 0.0)
    if valid.any():
        ts = np.where(valid, t, 0.0)
        hit = a[:, None, :] + ts[..., None] * v[:, None, :]
        w = np.einsum("mkd,kd->mk", hit - e0[None, :, :], e)
        ee = np.einsum("kd,kd->k", e, e)
        on_edge = (w >= 0.0) & (w <= ee[None, :])
        tt = np.where(valid & on_edge, t, np.inf)
        t_hit = min(t_hit, float(tt.min(initial=np.inf)))

    # static vertex q crossing a moving segment: quadratic in t
    if len(a) >= 2:
        i0 = np.arange(len(a) if closed else len(a) - 1)
        i1 = (i0 + 1) % len(a)
        A0, B0 = a[i0], a[i1]
        U, W = v[i0], v[i1]
        d0 = B0 - A0
        dd = W - U
        for q in verts:
            eq = q[None, :] - A0
            c0 = _cross(d0, eq)
            c1 = _cross(dd, eq) - _cross(d0, U)
            c2 = -_cross(dd, U)
            roots = _quadratic_roots(c2, c1, c0)
            for t_arr in roots:
                ok = np.isfinite(t_arr) & (t_arr >= 0.0)
                if not ok.any():
                    continue
                At = A0 + t_arr[:, None] * U
                Bt = B0 + t_arr[:, None] * W
                seg = Bt - At
                seg2 = np.einsum("md,md->m", seg, seg)
                s = np.einsum("md,md->m", q[None, :] - At, seg)
                on = ok & (s >= 0.0) & (s <= seg2)
                if on.any():
                    t_hit = min(t_hit, float(t_arr[on].min()))

    return float(min(t_hit, cap))


def _quadratic_roots(a, b, c):
    """Real roots of a t^2 + b t + c = 0, elementwise; NaN where absent."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    out0 = np.full(a.shape, np.nan)
    out1 = np.full(a.shape, np.nan)

    lin = np.abs(a) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        out0 = np.where(lin & (np.abs(b) > 0), -c / b, out0)

    disc = b * b - 4 * a * c
    quad = ~lin & (disc >= 0)
    if quad.any():
        sq = np.sqrt(np.where(quad, disc, 0.0))
        # numerically stable split
        qq = -0.5 * (b + np.sign(np.where(b == 0, 1.0, b)) * sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            r0 = np.where(quad, qq / a, np.nan)
            r1 = np.where(quad & (np.abs(qq) > 0), c / qq, np.nan)
        out0 = np.where(quad, r0, out0)
        out1 = np.where(quad, r1, out1)
    return out0, out1
