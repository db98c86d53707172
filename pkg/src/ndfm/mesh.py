"""Mesh data structures, a rectangular-grid generator, text IO, point location.

A mesh is homogeneous: all cells are 3-node triangles (tri3) or 4-node
quadrilaterals (quad4) with counter-clockwise connectivity.  Boundary edges
carry small integer tags used to attach boundary conditions.

Text format (UTF-8, line oriented, '#' starts a comment):

    MESH tri3|quad4
    VERTICES n
    x y                 (n lines, up to 17 significant digits)
    CELLS m
    i j k [l]           (m lines, zero-based vertex indices)
    BOUNDARY k
    v0 v1 tag           (k lines)
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .geom2d import polygon_area


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    """Malformed mesh file; message names the offending line."""


_VERTS_PER_CELL = {"tri3": 3, "quad4": 4}


class Mesh:
    """Immutable planar mesh of triangles or quadrilaterals."""

    def __init__(self, vertices, cells, cell_kind, boundary_edges):
        if cell_kind not in _VERTS_PER_CELL:
            raise MeshError(f"unknown cell kind {cell_kind!r}")
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.cell_kind = cell_kind
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self._validate()

    # -- construction checks -------------------------------------------------

    def _validate(self):
        nv = _VERTS_PER_CELL[self.cell_kind]
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != nv:
            raise MeshError(f"{self.cell_kind} cells must be an (M, {nv}) array")
        if self.boundary_edges.ndim != 2 or self.boundary_edges.shape[1] != 3:
            raise MeshError("boundary_edges must be an (K, 3) array of (v0, v1, tag)")
        n = len(self.vertices)
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= n):
            raise MeshError("cell vertex index out of range")
        if self.boundary_edges.size and (
            self.boundary_edges[:, :2].min() < 0 or self.boundary_edges[:, :2].max() >= n
        ):
            raise MeshError("boundary edge vertex index out of range")
        if np.any(self.cell_areas <= 0.0):
            bad = int(np.argmax(self.cell_areas <= 0.0))
            raise MeshError(f"cell {bad} has non-positive area")

        # every interior edge is shared by two cells, boundary edges by one,
        # and the tagged list must be exactly the topological boundary
        edges = np.stack([self.cells, np.roll(self.cells, -1, axis=1)], axis=2).reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.size and counts.max() > 2:
            raise MeshError("an edge is shared by more than two cells")
        topo = uniq[counts == 1]
        tagged = np.sort(self.boundary_edges[:, :2], axis=1)
        order = np.lexsort((tagged[:, 1], tagged[:, 0]))
        tagged = tagged[order]
        if len(tagged) > 1 and np.any(np.all(np.diff(tagged, axis=0) == 0, axis=1)):
            raise MeshError("duplicate boundary edge")
        if tagged.shape != topo.shape or not np.array_equal(tagged, topo):
            raise MeshError(
                f"boundary list does not match mesh boundary "
                f"({len(tagged)} tagged vs {len(topo)} topological edges)"
            )

    # -- cached geometry -------------------------------------------------------

    @cached_property
    def cell_areas(self):
        coords = self.vertices[self.cells]
        x = coords[:, :, 0]
        y = coords[:, :, 1]
        xn = np.roll(x, -1, axis=1)
        yn = np.roll(y, -1, axis=1)
        return 0.5 * np.sum(x * yn - xn * y, axis=1)

    @cached_property
    def bbox(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @cached_property
    def diameter(self):
        xmin, ymin, xmax, ymax = self.bbox
        return math.hypot(xmax - xmin, ymax - ymin)

    @cached_property
    def cell_diameters(self):
        coords = self.vertices[self.cells]
        nv = coords.shape[1]
        d = np.zeros(len(self.cells))
        for i in range(nv):
            for j in range(i + 1, nv):
                d = np.maximum(d, np.linalg.norm(coords[:, i] - coords[:, j], axis=1))
        return d

    def cell_coords(self, cell_id):
        return self.vertices[self.cells[cell_id]]

    @cached_property
    def boundary_tags(self):
        return sorted({int(t) for t in self.boundary_edges[:, 2]}) if len(self.boundary_edges) else []

    # -- background bins for spatial queries -----------------------------------

    @cached_property
    def _bins(self):
        xmin, ymin, xmax, ymax = self.bbox
        size = 2.0 * float(np.median(self.cell_diameters))
        nx = max(int(math.ceil((xmax - xmin) / size)), 1)
        ny = max(int(math.ceil((ymax - ymin) / size)), 1)
        grid = [[[] for _ in range(ny)] for _ in range(nx)]
        coords = self.vertices[self.cells]
        los = coords.min(axis=1)
        his = coords.max(axis=1)
        for cid in range(len(self.cells)):
            i0 = min(max(int((los[cid, 0] - xmin) / size), 0), nx - 1)
            i1 = min(max(int((his[cid, 0] - xmin) / size), 0), nx - 1)
            j0 = min(max(int((los[cid, 1] - ymin) / size), 0), ny - 1)
            j1 = min(max(int((his[cid, 1] - ymin) / size), 0), ny - 1)
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    grid[i][j].append(cid)
        return size, nx, ny, grid

    def candidate_cells(self, lo, hi):
        """Cell ids whose bounding boxes may meet the box [lo, hi] (sorted)."""
        size, nx, ny, grid = self._bins
        xmin, ymin, _, _ = self.bbox
        i0 = min(max(int((lo[0] - xmin) / size), 0), nx - 1)
        i1 = min(max(int((hi[0] - xmin) / size), 0), nx - 1)
        j0 = min(max(int((lo[1] - ymin) / size), 0), ny - 1)
        j1 = min(max(int((hi[1] - ymin) / size), 0), ny - 1)
        out = set()
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                out.update(grid[i][j])
        return sorted(out)

    def __repr__(self):
        return (
            f"Mesh({self.cell_kind}, {len(self.vertices)} vertices, "
            f"{len(self.cells)} cells, {len(self.boundary_edges)} boundary edges)"
        )


# ---------------------------------------------------------------------------
# Generator


def build_rect_mesh(nx, ny, bbox=(0.0, 0.0, 1.0, 1.0)):
    """Uniform quad4 mesh: boundary tags 1=left, 2=right, 3=bottom, 4=top."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    if not (xmax > xmin and ymax > ymin):
        raise MeshError("degenerate bounding box")

    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    cells = np.empty((nx * ny, 4), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            cells[k] = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
            k += 1

    edges = []
    for j in range(ny):
        edges.append((vid(0, j), vid(0, j + 1), 1))
        edges.append((vid(nx, j), vid(nx, j + 1), 2))
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0), 3))
        edges.append((vid(i, ny), vid(i + 1, ny), 4))
    return Mesh(vertices, cells, "quad4", np.array(edges, dtype=np.int64))


# ---------------------------------------------------------------------------
# Text IO


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def load_mesh(text: str) -> Mesh:
    """Parse the mesh text format; flips negatively oriented cells."""
    lines = list(_content_lines(text))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of file while reading {what}")
        item = lines[pos]
        pos += 1
        return item

    lineno, header = take("header")
    parts = header.split()
    if len(parts) != 2 or parts[0] != "MESH" or parts[1] not in _VERTS_PER_CELL:
        raise MeshFormatError(f"line {lineno}: expected 'MESH tri3|quad4', got {header!r}")
    cell_kind = parts[1]
    nv_cell = _VERTS_PER_CELL[cell_kind]

    def section(keyword):
        lineno, line = take(f"{keyword} header")
        parts = line.split()
        if len(parts) != 2 or parts[0] != keyword:
            raise MeshFormatError(f"line {lineno}: expected '{keyword} <count>', got {line!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad count {parts[1]!r}") from None
        if count < 0:
            raise MeshFormatError(f"line {lineno}: negative count")
        return count

    nverts = section("VERTICES")
    vertices = np.empty((nverts, 2))
    for k in range(nverts):
        lineno, line = take("vertex")
        parts = line.split()
        if len(parts) != 2:
            raise MeshFormatError(f"line {lineno}: expected 'x y', got {line!r}")
        try:
            vertices[k] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad coordinate in {line!r}") from None

    ncells = section("CELLS")
    cells = np.empty((ncells, nv_cell), dtype=np.int64)
    for k in range(ncells):
        lineno, line = take("cell")
        parts = line.split()
        if len(parts) != nv_cell:
            raise MeshFormatError(
                f"line {lineno}: {cell_kind} cell needs {nv_cell} vertex indices, got {len(parts)}"
            )
        try:
            idx = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad vertex index in {line!r}") from None
        for i in idx:
            if i < 0 or i >= nverts:
                raise MeshFormatError(f"line {lineno}: vertex index {i} out of range 0..{nverts - 1}")
        area = polygon_area(vertices[idx])
        if area == 0.0:
            raise MeshFormatError(f"line {lineno}: cell has zero area")
        if area < 0.0:
            idx = idx[::-1]
        cells[k] = idx

    nedges = section("BOUNDARY")
    bedges = np.empty((nedges, 3), dtype=np.int64)
    for k in range(nedges):
        lineno, line = take("boundary edge")
        parts = line.split()
        if len(parts) != 3:
            raise MeshFormatError(f"line {lineno}: expected 'v0 v1 tag', got {line!r}")
        try:
            bedges[k] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad boundary entry in {line!r}") from None

    if pos != len(lines):
        lineno, line = lines[pos]
        raise MeshFormatError(f"line {lineno}: unexpected extra content {line!r}")
    try:
        return Mesh(vertices, cells, cell_kind, bedges)
    except MeshError as exc:
        raise MeshFormatError(str(exc)) from None


def save_mesh(mesh: Mesh) -> str:
    """Serialize with 17 significant digits so load/save round-trips exactly."""
    out = [f"MESH {mesh.cell_kind}"]
    out.append(f"VERTICES {len(mesh.vertices)}")
    out.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    out.append(f"CELLS {len(mesh.cells)}")
    out.extend(" ".join(str(int(v)) for v in cell) for cell in mesh.cells)
    out.append(f"BOUNDARY {len(mesh.boundary_edges)}")
    out.extend(f"{int(a)} {int(b)} {int(t)}" for a, b, t in mesh.boundary_edges)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Point location


def _cells_containing(mesh, p, tol):
    hits = []
    for cid in mesh.candidate_cells(p, p):
        coords = mesh.cell_coords(cid)
        nxt = np.roll(coords, -1, axis=0)
        edge = nxt - coords
        normal = np.stack([-edge[:, 1], edge[:, 0]], axis=1)
        side = np.einsum("ki,ki->k", p - coords, normal)
        scale = np.linalg.norm(normal, axis=1)
        if np.all(side >= -tol * scale):
            hits.append(cid)
    return hits


def locate_point(mesh: Mesh, p):
    """Cell id whose closed region contains p (lowest id wins ties), or None.

    Points farther than 1e-12 * mesh diameter outside every cell are
    reported as outside.
    """
    p = np.asarray(p, dtype=float)
    hits = _cells_containing(mesh, p, 0.0)
    if not hits:
        hits = _cells_containing(mesh, p, 1e-12 * mesh.diameter)
    return min(hits) if hits else None
