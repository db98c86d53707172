"""Reference discretizations used to validate the fracture scheme.

Two independent oracles:

* A fully resolved heterogeneous model: fractures rasterized as thin
  high-permeability strips on a fine rectangular mesh, so the strip
  conductance width * K_f matches the line conductance eps * k_f.
* The classical conforming scheme: explicit 1-d line elements on mesh
  edges, valid only when every fracture lies along edge chains.
"""

from __future__ import annotations

import numpy as np

from ..assembly import LinearSystem, _dedup_triplets, _dirichlet_data, _load_vector, _matrix_triplets
from ..exprlang import parse_expr
from ..geom2d import point_segment_distance
from ..mesh import Mesh, build_rect_mesh
from ..model import (
    BoundarySpec,
    FractureNetwork,
    MatrixPermeability,
    Problem,
    validate_problem,
)


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Rasterized heterogeneous reference


def _segment_distance_many(points, a, b):
    d = b - a
    den = float(d @ d)
    t = np.clip((points - a) @ d / den, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def _distance_to_curve(points, curve):
    """Distance from each point to the fracture centerline."""
    points = np.asarray(points, dtype=float)
    if curve.kind == "segment":
        return _segment_distance_many(points, curve.point(0.0), curve.point(1.0))
    if curve.polyline_vertices is not None:
        verts = curve.polyline_vertices
        best = np.full(len(points), np.inf)
        for a, b in zip(verts[:-1], verts[1:]):
            best = np.minimum(best, _segment_distance_many(points, a, b))
        return best
    if curve.circle is not None:
        cx, cy, r = curve.circle
        t0, t1 = curve.domain
        rel = points - np.array([cx, cy])
        rho = np.linalg.norm(rel, axis=1)
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        # is the closest circle point within the swept arc?
        span = t1 - t0
        offset = np.mod(ang - t0, 2.0 * np.pi)
        on_arc = (span >= 2.0 * np.pi - 1e-14) | (offset <= span)
        ends = np.stack([curve.point(t0), curve.point(t1)])
        d_ends = np.minimum(
            np.linalg.norm(points - ends[0], axis=1),
            np.linalg.norm(points - ends[1], axis=1),
        )
        return np.where(on_arc, np.abs(rho - r), d_ends)
    # generic fallback: dense chords, chunked over points
    t0, t1 = curve.domain
    ts = np.linspace(t0, t1, 4097)
    poly = curve.point(ts)
    best = np.full(len(points), np.inf)
    d = poly[1:] - poly[:-1]
    den = np.einsum("kd,kd->k", d, d)
    for p0 in range(0, len(points), 256):
        chunk = points[p0 : p0 + 256]
        rel = chunk[:, None, :] - poly[None, :-1, :]
        t = np.clip(np.einsum("pkd,kd->pk", rel, d) / den[None, :], 0.0, 1.0)
        proj = poly[None, :-1, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(chunk[:, None, :] - proj, axis=2).min(axis=1)
        best[p0 : p0 + 256] = dist
    return best


def rasterize_equi_dim(cfg, resolution, widths):
    """Fully resolved heterogeneous problem for a scenario's fracture set.

    Builds a ``resolution x resolution`` rectangular mesh on the scenario
    bounding box and assigns isotropic K_f = (eps * k_f) / width to every
    cell whose center lies within width/2 normal distance of a fracture
    centerline; ties exactly on the strip boundary go to the side where the
    center's signed distance along the fracture normal is negative (the
    lower / left cell for axis-aligned fractures).  No fracture network is
    attached: the output is a plain heterogeneous problem.
    """
    from .scenario import build_problem  # local import to avoid a cycle

    base = build_problem(cfg)
    mesh0 = base.mesh
    xmin, ymin, xmax, ymax = mesh0.bbox
    if abs((xmax - xmin) - (ymax - ymin)) > 1e-12 * max(xmax - xmin, ymax - ymin):
        # non-square domains keep the cell size isotropic
        nx = int(resolution)
        ny = max(int(round(resolution * (ymax - ymin) / (xmax - xmin))), 1)
    else:
        nx = ny = int(resolution)
    fractures = list(base.network)
    if np.isscalar(widths):
        widths = [float(widths)] * len(fractures)
    widths = [float(w) for w in widths]
    if len(widths) != len(fractures):
        raise OracleError("need one strip width per fracture (or a scalar)")

    h = max((xmax - xmin) / nx, (ymax - ymin) / ny)
    for w in widths:
        if w < 3.0 * h:
            need = int(np.ceil(3.0 * (xmax - xmin) / w))
            raise OracleError(
                f"strip width {w} under-resolved at resolution {nx} "
                f"(needs >= 3 cells across; use resolution >= {need})"
            )

    mesh = build_rect_mesh(nx, ny, (xmin, ymin, xmax, ymax))
    centers = mesh.vertices[mesh.cells].mean(axis=1)
    km = base.perm.for_mesh(mesh0)[0]  # constant matrix permeability expected
    if base.perm.per_cell_table is not None:
        raise OracleError("rasterized reference expects a constant matrix permeability")
    table = np.broadcast_to(km, (len(mesh.cells), 2, 2)).copy()

    for frac, width in zip(fractures, widths):
        curve = frac.geometry
        length = curve.total_length()
        cond = frac.eps_kf(0.5 * length)
        kf = cond / width
        dist = _distance_to_curve(centers, curve)
        inside = dist < 0.5 * width
        # break exact boundary ties toward the lower side along the normal
        tie = np.isclose(dist, 0.5 * width, rtol=0.0, atol=1e-12 * max(width, 1.0))
        if np.any(tie):
            t_mid = 0.5 * (curve.domain[0] + curve.domain[1])
            v = curve.velocity(t_mid)
            normal = np.array([-v[1], v[0]]) / np.hypot(*v)
            anchor = curve.point(t_mid)
            signed = (centers[tie] - anchor) @ normal
            inside[np.flatnonzero(tie)[signed < 0.0]] = True
        table[inside] = kf * np.eye(2)

    problem = Problem(
        mesh=mesh,
        perm=MatrixPermeability(per_cell=table),
        network=FractureNetwork([]),
        bcs=base.bcs,
        source=base.source,
    )
    return problem


# ---------------------------------------------------------------------------
# Classical conforming scheme


def _edge_chain_on_fracture(mesh, frac, tol):
    """Mesh edges lying on a straight fracture, or None if not edge-aligned."""
    curve = frac.geometry
    if curve.kind != "segment":
        return None
    a = curve.point(0.0)
    b = curve.point(1.0)
    d = b - a
    length = float(np.hypot(*d))
    u = d / length

    edges = np.stack([mesh.cells, np.roll(mesh.cells, -1, axis=1)], axis=2).reshape(-1, 2)
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    va = mesh.vertices[edges[:, 0]]
    vb = mesh.vertices[edges[:, 1]]

    def on_segment(p):
        return point_segment_distance(p, a, b) < tol

    chain = []
    params = []
    for k in range(len(edges)):
        if on_segment(va[k]) and on_segment(vb[k]):
            ta = float((va[k] - a) @ u) / length
            tb = float((vb[k] - a) @ u) / length
            lo, hi = min(ta, tb), max(ta, tb)
            if hi - lo < 1e-14:
                continue
            chain.append((lo, hi, int(edges[k, 0]), int(edges[k, 1])))
            params.append((lo, hi))
    if not chain:
        return None
    chain.sort()
    covered = 0.0
    for lo, hi, _, _ in chain:
        if lo > covered + tol / length:
            return None
        covered = max(covered, hi)
    if covered < 1.0 - tol / length:
        return None
    return chain


def classical_dfm_assemble(pb: Problem, *, keep_full=False) -> LinearSystem:
    """Conforming-mesh scheme: cell stiffness plus 1-d line elements.

    Every fracture must coincide with a chain of mesh edges (within
    1e-12 * mesh diameter); otherwise the call is refused.  Each edge of
    length h contributes the 1-d two-point stiffness (integral of eps*k_f
    over the edge) / h^2 * [[1,-1],[-1,1]].
    """
    report = validate_problem(pb)
    if not report.ok:
        raise OracleError(str(report))
    mesh = pb.mesh
    tol = 1e-12 * mesh.diameter
    n = len(mesh.vertices)

    rows, cols, vals = _matrix_triplets(mesh, pb.perm.for_mesh(mesh))
    rows, cols, vals = list(rows), list(cols), list(vals)

    gauss = np.polynomial.legendre.leggauss(3)
    for fid, frac in enumerate(pb.network):
        chain = _edge_chain_on_fracture(mesh, frac, tol)
        if chain is None:
            raise OracleError(
                f"fracture {fid} is not aligned with mesh edges; the classical scheme needs a conforming mesh"
            )
        length = frac.geometry.total_length()
        for lo, hi, v0, v1 in chain:
            h = (hi - lo) * length
            # integral of eps*k_f over the edge by 3-point Gauss in arc length
            mid_s = 0.5 * (lo + hi) * length
            half_s = 0.5 * (hi - lo) * length
            svals = mid_s + half_s * gauss[0]
            cond = sum(w * frac.eps_kf(float(s)) for s, w in zip(svals, gauss[1])) * half_s
            k = cond / (h * h)
            for (vi, vj, v) in ((v0, v0, k), (v0, v1, -k), (v1, v0, -k), (v1, v1, k)):
                rows.append(vi)
                cols.append(vj)
                vals.append(v)

    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)

    b_full = _load_vector(mesh, pb)
    is_dirichlet, dir_values = _dirichlet_data(mesh, pb)
    if not is_dirichlet.any():
        raise OracleError("no Dirichlet vertex: refusing to build a singular system")
    free_index = np.full(n, -1, dtype=np.int64)
    free_ids = np.flatnonzero(~is_dirichlet)
    free_index[free_ids] = np.arange(len(free_ids))

    A_full = _dedup_triplets(rows, cols, vals, n) if keep_full else None
    row_free = ~is_dirichlet[rows]
    col_free = ~is_dirichlet[cols]
    keep = row_free & col_free
    A = _dedup_triplets(free_index[rows[keep]], free_index[cols[keep]], vals[keep], len(free_ids))
    b = b_full[free_ids].copy()
    move = row_free & ~col_free
    np.subtract.at(b, free_index[rows[move]], vals[move] * dir_values[cols[move]])

    return LinearSystem(
        A=A,
        b=b,
        free_index=free_index,
        dirichlet_values=np.where(is_dirichlet, dir_values, 0.0),
        n_vertices=n,
        A_full=A_full,
    )
