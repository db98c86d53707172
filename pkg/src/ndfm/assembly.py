"""Fracture tracing over a mesh, global sparse assembly, Dirichlet elimination.

The global matrix accumulates per-cell stiffness from the matrix
permeability plus, for every (cell, fracture-piece) pair produced by the
tracer, the line integral of tangential shape-function derivatives weighted
by the fracture conductance.  No mesh alignment with fractures is assumed:
a fracture lying along shared edges is simply the special case where the
traced pieces coincide with edges, and single-owner deduplication keeps the
line integral counted once.

Assembly is deterministic: cells ascending, then fractures ascending, then
pieces ascending; the triplet list is sorted and summed in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem_core
from .exprlang import eval_expr, free_vars, is_constant
from .geom2d import (
    ParamInterval,
    Segment2,
    cell_boundary_distance,
    clip_segment_cell,
    trace_curve_cell,
)
from .mesh import Mesh
from .model import DIRICHLET, NEUMANN, FractureNetwork, Problem, validate_problem


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tracing


@dataclass(frozen=True)
class TracePiece:
    cell: int
    interval: ParamInterval
    on_edge: bool


@dataclass
class FractureTrace:
    fracture: int
    pieces: list

    def total_arclength(self, curve):
        return sum(curve.arclength_between(p.interval.t_a, p.interval.t_b) for p in self.pieces)


def _candidate_cells(mesh, curve):
    """Cells whose bins the curve passes through (chords <= bin size)."""
    t0, t1 = curve.domain
    size = mesh._bins[0]
    n = max(int(np.ceil(curve.max_speed * (t1 - t0) / (0.5 * size))), 8)
    pts = curve.point(np.linspace(t0, t1, n + 1))
    out = set()
    # pad each sample by one bin so grazing cells are not missed
    for p in pts:
        out.update(mesh.candidate_cells(p - size, p + size))
    return sorted(out)


def trace_network(mesh: Mesh, network: FractureNetwork):
    """Decompose every fracture into per-cell parameter intervals.

    Pieces running along a shared edge appear in both incident cells
    geometrically; ownership goes to the lower cell id only, with the
    on_edge flag set.  Out-of-mesh portions are clipped away.
    """
    tol_len = 1e-12 * mesh.diameter
    traces = []
    for fid, frac in enumerate(network):
        curve = frac.geometry
        t0, t1 = curve.domain
        param_tol = max(1e-13 * (t1 - t0), 5e-16)
        raw = []
        for cid in _candidate_cells(mesh, curve):
            coords = mesh.cell_coords(cid)
            if curve.kind == "segment":
                a = curve.point(t0)
                b = curve.point(t1)
                iv = clip_segment_cell(Segment2(tuple(a), tuple(b)), coords, tol_len=tol_len)
                ivs = [] if iv is None else [iv]
            else:
                ivs = trace_curve_cell(curve, coords, tol=param_tol, tol_len=tol_len)
            raw.extend((iv.t_a, iv.t_b, cid) for iv in ivs)

        # single-owner sweep: sort by (start, cell) and trim away overlap
        raw.sort()
        pieces = []
        covered = -np.inf
        for t_a, t_b, cid in raw:
            start = max(t_a, covered)
            if t_b <= start:
                continue
            iv = ParamInterval(start, t_b)
            if curve.arclength_between(iv.t_a, iv.t_b) < tol_len:
                continue
            coords = mesh.cell_coords(cid)
            mid_pt = curve.point(iv.midpoint())
            on_edge = cell_boundary_distance(mid_pt, coords) < 1e-12 * mesh.diameter
            pieces.append(TracePiece(cid, iv, on_edge))
            covered = t_b
        traces.append(FractureTrace(fid, pieces))
    return traces


# ---------------------------------------------------------------------------
# Linear system container


@dataclass
class LinearSystem:
    """Reduced SPD system over non-Dirichlet vertices.

    free_index maps vertex -> row (or -1 for Dirichlet vertices whose value
    is in dirichlet_values).  A holds both triangles explicitly.
    """

    A: sp.csr_matrix
    b: np.ndarray
    free_index: np.ndarray
    dirichlet_values: np.ndarray
    n_vertices: int
    A_full: sp.csr_matrix | None = None

    @property
    def n_free(self):
        return self.A.shape[0]

    def expand(self, x_free):
        """Nodal vector over all vertices with Dirichlet values re-inserted."""
        out = np.array(self.dirichlet_values, dtype=float)
        free = self.free_index >= 0
        out[free] = np.asarray(x_free, dtype=float)[self.free_index[free]]
        return out

    def symmetry_defect(self):
        d = self.A - self.A.T
        amax = abs(self.A).max() if self.A.nnz else 0.0
        return (abs(d).max() / amax) if amax else 0.0


def system_to_coo_text(system: LinearSystem) -> str:
    """Coordinate text dump 'i j value' (1-based) of the reduced matrix."""
    coo = system.A.tocoo()
    lines = [
        f"{i + 1} {j + 1} {v:.17g}" for i, j, v in zip(coo.row, coo.col, coo.data)
    ]
    return "\n".join(lines) + "\n"


def _dedup_triplets(rows, cols, vals, n):
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new = np.empty(len(rows), dtype=bool)
        new[0] = True
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new)
        summed = np.add.reduceat(vals, starts)
        rows, cols, vals = rows[starts], cols[starts], summed
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


# ---------------------------------------------------------------------------
# Assembly


def _matrix_triplets(mesh, km_table):
    """Vectorized cell-stiffness triplets for the whole mesh."""
    coords = mesh.vertices[mesh.cells]  # (M, nv, 2)
    if mesh.cell_kind == "tri3":
        x = coords[:, :, 0]
        y = coords[:, :, 1]
        area = mesh.cell_areas
        g = np.empty(coords.shape)  # (M, 3, 2)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = y[:, j] - y[:, k]
            g[:, i, 1] = x[:, k] - x[:, j]
        g /= (2.0 * area)[:, None, None]
        local = np.einsum("mik,mkl,mjl->mij", g, km_table, g) * area[:, None, None]
    else:
        rule = fem_core.quad_quadrature(2)
        local = np.zeros((len(mesh.cells), 4, 4))
        for (xi, eta), w in zip(rule.points, rule.weights):
            dN = fem_core.quad_ref_gradients(xi, eta)  # (4, 2)
            J = np.einsum("va,mvb->mab", dN, coords)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            inv = np.empty_like(J)
            inv[:, 0, 0] = J[:, 1, 1]
            inv[:, 0, 1] = -J[:, 0, 1]
            inv[:, 1, 0] = -J[:, 1, 0]
            inv[:, 1, 1] = J[:, 0, 0]
            inv /= det[:, None, None]
            g = np.einsum("mba,va->mvb", inv, dN)  # physical gradients
            local += (w * det)[:, None, None] * np.einsum("mik,mkl,mjl->mij", g, km_table, g)
    nv = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, nv, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, nv)).ravel()
    return rows, cols, local.ravel()


def _fracture_nq(frac, cell_kind, nq_curved):
    if frac.geometry.kind in ("segment", "polyline"):
        if not (is_constant(frac.aperture) and is_constant(frac.tang_perm)):
            return 4
        return 1 if cell_kind == "tri3" else 2
    return nq_curved


def _fracture_triplets(mesh, network, traces, nq_curved):
    rows, cols, vals = [], [], []
    for trace in traces:
        frac = network[trace.fracture]
        curve = frac.geometry
        nq = _fracture_nq(frac, mesh.cell_kind, nq_curved)
        conductance = (
            frac.eps_kf(0.0)
            if is_constant(frac.aperture) and is_constant(frac.tang_perm)
            else frac.eps_kf
        )
        for piece in trace.pieces:
            coords = mesh.cell_coords(piece.cell)
            verts = mesh.cells[piece.cell]
            # split at polyline joints so each sub-piece is smooth
            cuts = [piece.interval.t_a]
            cuts += curve.interior_breakpoints(piece.interval.t_a, piece.interval.t_b)
            cuts.append(piece.interval.t_b)
            for a, b in zip(cuts[:-1], cuts[1:]):
                if b <= a:
                    continue
                local = fem_core.local_fracture_stiffness(
                    mesh.cell_kind, coords, curve, ParamInterval(a, b), conductance, nq
                )
                for i, vi in enumerate(verts):
                    for j, vj in enumerate(verts):
                        rows.append(vi)
                        cols.append(vj)
                        vals.append(local[i, j])
    return (
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(vals, dtype=float),
    )


def _load_vector(mesh, pb):
    b = np.zeros(len(mesh.vertices))
    if not (is_constant(pb.source) and eval_expr(pb.source, {}) == 0.0):
        fn = pb.source_fn()
        coords = mesh.vertices[mesh.cells]
        if mesh.cell_kind == "tri3":
            rule = fem_core.tri_quadrature(7)
            lam = rule.points
            shape = np.column_stack([1.0 - lam[:, 0] - lam[:, 1], lam[:, 0], lam[:, 1]])
            # physical points: v0 + lam @ [v1-v0, v2-v0]
            pts = np.einsum("qn,mnd->mqd", shape, coords)
            wgt = (2.0 * mesh.cell_areas)[:, None] * rule.weights[None, :]
            fv = np.asarray(fn(pts[:, :, 0], pts[:, :, 1]), dtype=float)
            contrib = np.einsum("mq,qn->mn", wgt * fv, shape)
        else:
            rule = fem_core.quad_quadrature(4)
            contrib = np.zeros((len(mesh.cells), 4))
            for (xi, eta), w in zip(rule.points, rule.weights):
                N = fem_core.quad_ref_values(xi, eta)
                dN = fem_core.quad_ref_gradients(xi, eta)
                J = np.einsum("va,mvb->mab", dN, coords)
                det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
                pts = np.einsum("n,mnd->md", N, coords)
                fv = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
                contrib += (w * det * fv)[:, None] * N[None, :]
        np.add.at(b, mesh.cells.ravel(), contrib.ravel())

    for v0, v1, tag in mesh.boundary_edges:
        cond = pb.bcs.conditions[int(tag)]
        if cond.kind != NEUMANN:
            continue
        if is_constant(cond.expr) and eval_expr(cond.expr, {}) == 0.0:
            continue
        edge = (mesh.vertices[v0], mesh.vertices[v1])
        load = fem_core.neumann_load(edge, cond)
        b[v0] += load[0]
        b[v1] += load[1]
    return b


def _dirichlet_data(mesh, pb):
    is_dirichlet = np.zeros(len(mesh.vertices), dtype=bool)
    values = np.zeros(len(mesh.vertices))
    for v0, v1, tag in mesh.boundary_edges:
        cond = pb.bcs.conditions[int(tag)]
        if cond.kind != DIRICHLET:
            continue
        for v in (int(v0), int(v1)):
            is_dirichlet[v] = True
            values[v] = float(cond(mesh.vertices[v, 0], mesh.vertices[v, 1]))
    return is_dirichlet, values


def assemble(pb: Problem, *, keep_full=False, nq_curved=4, traces=None) -> LinearSystem:
    """Assemble the reduced linear system of a validated problem.

    Dirichlet vertices are eliminated: their columns times the boundary
    values move to the right-hand side with a minus sign, and their
    rows/columns are dropped.  Set ``keep_full`` to retain the unreduced
    matrix (useful for conservation checks).
    """
    report = validate_problem(pb)
    if not report.ok:
        raise AssemblyError(str(report))
    mesh = pb.mesh
    n = len(mesh.vertices)

    km_table = pb.perm.for_mesh(mesh)
    rows, cols, vals = _matrix_triplets(mesh, km_table)
    if traces is None:
        traces = trace_network(mesh, pb.network)
    fr, fc, fv = _fracture_triplets(mesh, pb.network, traces, nq_curved)
    rows = np.concatenate([rows, fr])
    cols = np.concatenate([cols, fc])
    vals = np.concatenate([vals, fv])

    b_full = _load_vector(mesh, pb)
    is_dirichlet, dir_values = _dirichlet_data(mesh, pb)
    if not is_dirichlet.any():
        raise AssemblyError("no Dirichlet vertex: refusing to build a singular system")

    free_index = np.full(n, -1, dtype=np.int64)
    free_ids = np.flatnonzero(~is_dirichlet)
    free_index[free_ids] = np.arange(len(free_ids))

    A_full = _dedup_triplets(rows, cols, vals, n) if keep_full else None

    row_free = ~is_dirichlet[rows]
    col_free = ~is_dirichlet[cols]
    keep = row_free & col_free
    A = _dedup_triplets(
        free_index[rows[keep]], free_index[cols[keep]], vals[keep], len(free_ids)
    )

    b = b_full[free_ids].copy()
    move = row_free & ~col_free
    np.subtract.at(b, free_index[rows[move]], vals[move] * dir_values[cols[move]])

    dirichlet_values = np.where(is_dirichlet, dir_values, 0.0)
    return LinearSystem(
        A=A,
        b=b,
        free_index=free_index,
        dirichlet_values=dirichlet_values,
        n_vertices=n,
        A_full=A_full,
    )
