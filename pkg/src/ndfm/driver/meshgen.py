"""Structured generators for the shipped benchmark meshes.

These exist to (re)build the mesh files under scenarios/meshes: a polar
triangulation of the unit disk whose radial edges carry the conforming
fracture set of the consistency benchmark, and transfinite triangulations
of the groundwater-benchmark polygon with its piecewise-linear top surface.
"""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh


def unit_circle_mesh(n_rings=20, n_sectors=36):
    """Triangulated unit disk: rings x sectors fan, boundary tag 1.

    Radial chains exist at every sector angle 2*pi*j/n_sectors, so any
    diameter segment whose endpoints sit on ring radii k/n_rings and whose
    angle is a sector multiple lies exactly on mesh edges.
    """
    if n_rings < 2 or n_sectors < 6:
        raise ValueError("need at least 2 rings and 6 sectors")
    angles = 2.0 * np.pi * np.arange(n_sectors) / n_sectors
    verts = [(0.0, 0.0)]
    for k in range(1, n_rings + 1):
        r = k / n_rings
        for a in angles:
            verts.append((r * np.cos(a), r * np.sin(a)))
    vertices = np.array(verts)

    def vid(ring, j):
        if ring == 0:
            return 0
        return 1 + (ring - 1) * n_sectors + (j % n_sectors)

    cells = []
    for j in range(n_sectors):
        cells.append((0, vid(1, j), vid(1, j + 1)))
    for k in range(1, n_rings):
        for j in range(n_sectors):
            a0, a1 = vid(k, j), vid(k, j + 1)
            b0, b1 = vid(k + 1, j), vid(k + 1, j + 1)
            cells.append((a0, b0, b1))
            cells.append((a0, b1, a1))
    edges = [(vid(n_rings, j), vid(n_rings, j + 1), 1) for j in range(n_sectors)]
    return Mesh(vertices, np.array(cells), "tri3", np.array(edges))


HYDRO_TOP_POINTS = ((0.0, 150.0), (400.0, 100.0), (800.0, 150.0), (1200.0, 100.0), (1600.0, 150.0))
HYDRO_BOTTOM = -1000.0


def _top_height(x):
    xs = np.array([p[0] for p in HYDRO_TOP_POINTS])
    ys = np.array([p[1] for p in HYDRO_TOP_POINTS])
    return np.interp(x, xs, ys)


def hydrocoin_mesh(nx=42, ny=31):
    """Transfinite triangulation of the groundwater benchmark cross-section.

    x spans [0, 1600]; each column is graded from the flat bottom at
    z = -1000 up to the piecewise-linear surface through the five ridge and
    valley points.  Tags: 1=left, 2=right, 3=bottom, 4=top.  The default
    42 x 31 grid gives 2604 triangles; 55 x 41 gives 4510.
    """
    xs = np.linspace(0.0, 1600.0, nx + 1)
    tops = _top_height(xs)
    verts = np.empty(((nx + 1) * (ny + 1), 2))
    for j in range(ny + 1):
        frac = j / ny
        verts[j * (nx + 1) : (j + 1) * (nx + 1), 0] = xs
        verts[j * (nx + 1) : (j + 1) * (nx + 1), 1] = HYDRO_BOTTOM + frac * (tops - HYDRO_BOTTOM)

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    edges = []
    for j in range(ny):
        edges.append((vid(0, j), vid(0, j + 1), 1))
        edges.append((vid(nx, j), vid(nx, j + 1), 2))
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0), 3))
        edges.append((vid(i, ny), vid(i + 1, ny), 4))
    return Mesh(verts, np.array(cells), "tri3", np.array(edges))
