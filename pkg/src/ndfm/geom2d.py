"""Planar geometry kernel: frames, fracture curves, and cell clipping.

Cells are convex polygons given as (nv, 2) arrays of counter-clockwise
vertices (nv = 3 or 4).  Fracture paths are either straight segments,
polylines, or smooth parametric curves; every operation reduces to finding
the parameter sub-intervals of a path that lie inside a closed cell.

All functions are pure; nothing here mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Relative tolerance used to treat a path lying within round-off of a cell
# edge as belonging to the (closed) cell.  Scaled by the cell diameter.
EDGE_REL_TOL = 1e-12

# Half-plane padding used during clipping, scaled by coordinate magnitude.
# Only absorbs arithmetic round-off (a few ulp); keeps clipped interval
# endpoints accurate to ~1e-14 so edge-aligned pieces reproduce exact edge
# lengths to near machine precision.
CLIP_PAD_REL = 4e-15


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Rigid frames


@dataclass(frozen=True)
class Transform2:
    """Rotation by ``theta`` about the origin after subtracting ``shift``."""

    theta: float
    shift: tuple = (0.0, 0.0)

    def rotation(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [-s, c]])


def to_local(tf: Transform2, p):
    """Map global coordinates to the frame's (xi, eta) coordinates."""
    p = np.asarray(p, dtype=float)
    q = p - np.asarray(tf.shift, dtype=float)
    return q @ tf.rotation().T


def to_global(tf: Transform2, q):
    """Inverse of :func:`to_local`."""
    q = np.asarray(q, dtype=float)
    return q @ tf.rotation() + np.asarray(tf.shift, dtype=float)


# ---------------------------------------------------------------------------
# Segments and parameter intervals


@dataclass(frozen=True)
class Segment2:
    a: tuple
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", (float(self.a[0]), float(self.a[1])))
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))

    @property
    def length(self):
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def point(self, t):
        ax, ay = self.a
        bx, by = self.b
        return np.array([ax + t * (bx - ax), ay + t * (by - ay)])


@dataclass(frozen=True)
class ParamInterval:
    t_a: float
    t_b: float

    def __post_init__(self):
        if self.t_a > self.t_b:
            raise GeometryError(f"interval endpoints out of order: {self.t_a} > {self.t_b}")

    @property
    def width(self):
        return self.t_b - self.t_a

    def midpoint(self):
        return 0.5 * (self.t_a + self.t_b)


# ---------------------------------------------------------------------------
# Curves


class CurveDescriptor:
    """A fracture path: straight segment, polyline, or parametric curve.

    Parameterization conventions:
      * segment: t in [0, 1], constant velocity b - a
      * polyline: t = arc length in [0, L], unit speed
      * parametric: user-supplied domain; velocity is the user derivative

    Non-degeneracy (positive speed everywhere) is checked on construction by
    sampling at least 1000 parameter values.
    """

    def __init__(self, kind, point_fn, velocity_fn, domain, breakpoints=(), check_samples=1000):
        self.kind = kind
        self._point = point_fn
        self._velocity = velocity_fn
        self.domain = (float(domain[0]), float(domain[1]))
        if not self.domain[0] < self.domain[1]:
            raise GeometryError("curve parameter domain must have positive width")
        self.breakpoints = tuple(float(b) for b in breakpoints)
        ts = np.linspace(self.domain[0], self.domain[1], max(int(check_samples), 1000))
        speeds = np.linalg.norm(self.velocity(ts), axis=-1)
        if not np.all(speeds > 0.0):
            raise GeometryError("degenerate curve: zero velocity inside parameter domain")
        self._max_speed = float(speeds.max())
        self._arclength_table = None
        self.circle = None  # (cx, cy, r) when built as a circular arc
        self.polyline_vertices = None

    # -- factories ---------------------------------------------------------

    @staticmethod
    def from_segment(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        if np.hypot(*d) == 0.0:
            raise GeometryError("degenerate segment: endpoints coincide")

        def pt(t):
            t = np.asarray(t, dtype=float)
            return a + np.multiply.outer(t, d)

        def vel(t):
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(d, t.shape + (2,)).copy()

        return CurveDescriptor("segment", pt, vel, (0.0, 1.0))

    @staticmethod
    def from_polyline(vertices):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 2 or verts.shape[1] != 2:
            raise GeometryError("polyline needs at least two 2d vertices")
        seglen = np.linalg.norm(np.diff(verts, axis=0), axis=1)
        if np.any(seglen == 0.0):
            raise GeometryError("degenerate polyline: repeated consecutive vertices")
        cum = np.concatenate([[0.0], np.cumsum(seglen)])
        tangents = np.diff(verts, axis=0) / seglen[:, None]

        def locate(t):
            t = np.asarray(t, dtype=float)
            k = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(seglen) - 1)
            return k

        def pt(t):
            t = np.asarray(t, dtype=float)
            k = locate(t)
            return verts[k] + (t - cum[k])[..., None] * tangents[k]

        def vel(t):
            t = np.asarray(t, dtype=float)
            k = locate(t)
            return tangents[k].reshape(t.shape + (2,)).copy()

        curve = CurveDescriptor(
            "polyline", pt, vel, (0.0, float(cum[-1])), breakpoints=cum[1:-1]
        )
        curve.polyline_vertices = verts
        return curve

    @staticmethod
    def from_parametric(point_fn, velocity_fn, domain, check_samples=1000):
        def pt(t):
            t = np.asarray(t, dtype=float)
            x, y = point_fn(t)
            return np.stack(np.broadcast_arrays(x, y), axis=-1)

        def vel(t):
            t = np.asarray(t, dtype=float)
            vx, vy = velocity_fn(t)
            return np.stack(np.broadcast_arrays(vx, vy), axis=-1)

        return CurveDescriptor("parametric", pt, vel, domain, check_samples=check_samples)

    @staticmethod
    def from_circular_arc(center, radius, t0, t1):
        cx, cy = float(center[0]), float(center[1])
        r = float(radius)
        if r <= 0.0:
            raise GeometryError("circular arc needs a positive radius")
        curve = CurveDescriptor.from_parametric(
            lambda t: (cx + r * np.cos(t), cy + r * np.sin(t)),
            lambda t: (-r * np.sin(t), r * np.cos(t)),
            (t0, t1),
        )
        curve.circle = (cx, cy, r)
        return curve

    # -- queries -----------------------------------------------------------

    def point(self, t):
        return self._point(t)

    def velocity(self, t):
        return self._velocity(t)

    @property
    def max_speed(self):
        return self._max_speed

    def interior_breakpoints(self, t_a, t_b):
        """Parameters strictly inside (t_a, t_b) where velocity may jump."""
        return [b for b in self.breakpoints if t_a < b < t_b]

    def arclength_between(self, t_a, t_b):
        """Arc length of the sub-path [t_a, t_b]."""
        if self.kind == "segment":
            return (t_b - t_a) * float(np.linalg.norm(self.velocity(0.0)))
        if self.kind == "polyline":
            return t_b - t_a
        return self._arclength_at(t_b) - self._arclength_at(t_a)

    def total_length(self):
        return self.arclength_between(self.domain[0], self.domain[1])

    def _arclength_at(self, t):
        # cumulative table on 1024 panels with 4-point Gauss per panel
        if self._arclength_table is None:
            t0, t1 = self.domain
            edges = np.linspace(t0, t1, 1025)
            gx, gw = np.polynomial.legendre.leggauss(4)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * (edges[1:] - edges[:-1])
            pts = mid[:, None] + half[:, None] * gx[None, :]
            speeds = np.linalg.norm(self.velocity(pts.ravel()), axis=-1).reshape(pts.shape)
            panel = (speeds * gw[None, :]).sum(axis=1) * half
            self._arclength_table = (edges, np.concatenate([[0.0], np.cumsum(panel)]))
        edges, cum = self._arclength_table
        t = float(np.clip(t, edges[0], edges[-1]))
        k = min(int(np.searchsorted(edges, t, side="right")) - 1, len(edges) - 2)
        # finish the partial panel with the same 4-point Gauss
        gx, gw = np.polynomial.legendre.leggauss(4)
        a, b = edges[k], t
        if b > a:
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            speeds = np.linalg.norm(self.velocity(mid + half * gx), axis=-1)
            extra = float((speeds * gw).sum() * half)
        else:
            extra = 0.0
        return float(cum[k]) + extra


# ---------------------------------------------------------------------------
# Convex cell predicates


def _as_cell(cell):
    c = np.asarray(cell, dtype=float)
    if c.ndim != 2 or c.shape[0] < 3 or c.shape[1] != 2:
        raise GeometryError("cell must be an (nv, 2) vertex array with nv >= 3")
    return c


def polygon_area(poly):
    """Signed area (positive for counter-clockwise vertices)."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def cell_diameter(cell):
    c = _as_cell(cell)
    d = 0.0
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            d = max(d, float(np.hypot(*(c[i] - c[j]))))
    return d


def _edge_normals(cell):
    """Inward normals and anchor points of a CCW convex cell's edges."""
    nxt = np.roll(cell, -1, axis=0)
    edges = nxt - cell
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    return normals, cell


def point_in_cell(p, cell, tol=0.0):
    """Closed-cell membership with an optional absolute slack ``tol``."""
    c = _as_cell(cell)
    normals, anchors = _edge_normals(c)
    p = np.asarray(p, dtype=float)
    rel = p[..., None, :] - anchors
    side = np.einsum("...ki,ki->...k", rel, normals)
    scale = np.linalg.norm(normals, axis=1)
    return np.all(side >= -tol * scale, axis=-1)


def point_segment_distance(p, a, b):
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    denom = float(d @ d)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * d)))


def cell_boundary_distance(p, cell):
    """Distance from a point to the nearest cell edge."""
    c = _as_cell(cell)
    nxt = np.roll(c, -1, axis=0)
    return min(point_segment_distance(p, c[k], nxt[k]) for k in range(len(c)))


# ---------------------------------------------------------------------------
# Straight clipping


def clip_segment_cell(seg: Segment2, cell, tol_len=None):
    """Maximal sub-interval of a segment inside a closed convex cell.

    Returns a ParamInterval in the segment's own t in [0, 1], or None when
    the intersection is empty or shorter than ``tol_len`` (model units).
    The cell is padded by EDGE_REL_TOL * diameter so a path lying on a
    shared edge is reported for both incident cells.
    """
    c = _as_cell(cell)
    if polygon_area(c) <= 0.0:
        raise GeometryError("degenerate cell: non-positive area")
    diam = cell_diameter(c)
    pad = CLIP_PAD_REL * max(diam, float(np.abs(c).max()))
    seglen = seg.length
    if tol_len is None:
        tol_len = EDGE_REL_TOL * max(diam, seglen)

    a = np.asarray(seg.a, dtype=float)
    d = np.asarray(seg.b, dtype=float) - a
    normals, anchors = _edge_normals(c)
    t0, t1 = 0.0, 1.0
    for n, q in zip(normals, anchors):
        scale = float(np.hypot(*n))
        lo = float(n @ (a - q)) + pad * scale
        slope = float(n @ d)
        # inside the half plane when lo + t * slope >= 0
        if slope == 0.0:
            if lo < 0.0:
                return None
            continue
        crossing = -lo / slope
        if slope > 0.0:
            t0 = max(t0, crossing)
        else:
            t1 = min(t1, crossing)
        if t0 >= t1:
            return None
    if (t1 - t0) * seglen < tol_len:
        return None
    return ParamInterval(t0, t1)


# ---------------------------------------------------------------------------
# Curve tracing


def _bisect_membership(curve, cell, t_in, t_out, tol, pad):
    """Shrink the bracket between an inside and an outside parameter."""
    while abs(t_out - t_in) > tol:
        mid = 0.5 * (t_in + t_out)
        if point_in_cell(curve.point(mid), cell, tol=pad):
            t_in = mid
        else:
            t_out = mid
    return 0.5 * (t_in + t_out)


def trace_curve_cell(curve: CurveDescriptor, cell, tol, tol_len=None):
    """All maximal parameter intervals of a curve inside a closed cell.

    Boundary crossings are located by bisection to within ``tol`` in
    parameter.  Intervals are disjoint, sorted by t_a; slivers shorter than
    ``tol_len`` in arc length are dropped.
    """
    if tol <= 0.0:
        raise GeometryError("tol must be positive")
    c = _as_cell(cell)
    if polygon_area(c) <= 0.0:
        raise GeometryError("degenerate cell: non-positive area")
    diam = cell_diameter(c)
    if tol_len is None:
        tol_len = EDGE_REL_TOL * diam
    pad = CLIP_PAD_REL * max(diam, float(np.abs(c).max()))

    if curve.kind in ("segment", "polyline"):
        return _trace_straight(curve, c, tol, tol_len)

    t0, t1 = curve.domain
    # step so each chord is at most a quarter cell diameter
    step = 0.25 * diam / curve.max_speed
    n = max(int(math.ceil((t1 - t0) / step)), 32)
    ts = np.linspace(t0, t1, n + 1)
    inside = point_in_cell(curve.point(ts), c, tol=pad)

    intervals = []
    start = ts[0] if inside[0] else None
    for k in range(n):
        if inside[k] and not inside[k + 1]:
            end = _bisect_membership(curve, c, ts[k], ts[k + 1], tol, pad)
            intervals.append((start, end))
            start = None
        elif not inside[k] and inside[k + 1]:
            start = _bisect_membership(curve, c, ts[k + 1], ts[k], tol, pad)
    if start is not None:
        intervals.append((start, ts[-1]))

    out = []
    for a, b in intervals:
        if b > a and curve.arclength_between(a, b) >= tol_len:
            out.append(ParamInterval(a, b))
    return out


def _trace_straight(curve, cell, tol, tol_len):
    """Exact tracing for segment/polyline curves via half-plane clipping."""
    if curve.kind == "segment":
        a = curve.point(curve.domain[0])
        b = curve.point(curve.domain[1])
        iv = clip_segment_cell(Segment2(tuple(a), tuple(b)), cell, tol_len=tol_len)
        return [] if iv is None else [iv]

    # polyline: clip each leg, map to arc-length parameters, merge at joints
    cuts = [curve.domain[0], *curve.breakpoints, curve.domain[1]]
    raw = []
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        p0 = curve.point(s0)
        p1 = curve.point(s1)
        iv = clip_segment_cell(Segment2(tuple(p0), tuple(p1)), cell, tol_len=0.0)
        if iv is not None:
            raw.append((s0 + iv.t_a * (s1 - s0), s0 + iv.t_b * (s1 - s0)))
    raw.sort()
    merged = []
    for a, b in raw:
        if merged and a - merged[-1][1] <= tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [ParamInterval(a, b) for a, b in merged if b - a >= tol_len]


# ---------------------------------------------------------------------------
# Convex polygon overlap (for cross-mesh error measures)


def clip_polygon_convex(subject, clip):
    """Sutherland-Hodgman clip of a convex subject against a convex window."""
    sub = [tuple(p) for p in np.asarray(subject, dtype=float)]
    win = _as_cell(clip)
    normals, anchors = _edge_normals(win)
    for n, q in zip(normals, anchors):
        if not sub:
            return np.zeros((0, 2))
        out = []
        prev = sub[-1]
        prev_side = n @ (np.asarray(prev) - q)
        for cur in sub:
            cur_side = n @ (np.asarray(cur) - q)
            if cur_side >= 0.0:
                if prev_side < 0.0:
                    t = prev_side / (prev_side - cur_side)
                    out.append(
                        (
                            prev[0] + t * (cur[0] - prev[0]),
                            prev[1] + t * (cur[1] - prev[1]),
                        )
                    )
                out.append(cur)
            elif prev_side >= 0.0:
                t = prev_side / (prev_side - cur_side)
                out.append(
                    (
                        prev[0] + t * (cur[0] - prev[0]),
                        prev[1] + t * (cur[1] - prev[1]),
                    )
                )
            prev, prev_side = cur, cur_side
        sub = out
    return np.asarray(sub, dtype=float).reshape(-1, 2)


def overlap_area(poly_a, poly_b):
    """Area of the intersection of two convex polygons."""
    inter = clip_polygon_convex(poly_a, poly_b)
    if len(inter) < 3:
        return 0.0
    return abs(polygon_area(inter))
