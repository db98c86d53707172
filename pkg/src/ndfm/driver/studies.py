"""Refinement and perturbation studies with tabulated results.

The convergence study solves the kinked reference problem (unit matrix
permeability plus one straight fracture of conductance 2 through the
origin of [-pi, pi]^2) on a sequence of rectangular meshes and tabulates
L1/L2/Linf errors with observed orders.  The consistency study keeps a
conforming mesh fixed, nudges the fracture network off the edges by
decreasing amounts, and records the max-norm solution drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import postproc
from ..exprlang import parse_expr
from ..geom2d import CurveDescriptor
from ..linsolve import solve_cg
from ..mesh import build_rect_mesh
from ..model import (
    BoundaryCondition,
    BoundarySpec,
    DIRICHLET,
    Fracture,
    FractureNetwork,
    MatrixPermeability,
    Problem,
    analytic_ex3,
)
from .scenario import solve_problem


@dataclass
class StudyTable:
    headers: list
    rows: list

    def to_text(self):
        cols = len(self.headers)
        cells = [[_fmt_cell(v) for v in row] for row in self.rows]
        widths = [
            max(len(self.headers[c]), *(len(r[c]) for r in cells)) if cells else len(self.headers[c])
            for c in range(cols)
        ]
        lines = ["  ".join(h.rjust(w) for h, w in zip(self.headers, widths))]
        for r in cells:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        return "\n".join(lines)

    def column(self, name):
        k = self.headers.index(name)
        return [row[k] for row in self.rows]


def _fmt_cell(v):
    if v is None:
        return "--"
    if isinstance(v, float):
        return f"{v:.3e}" if (abs(v) < 0.1 or abs(v) >= 1000) and v != 0.0 else f"{v:.3f}"
    return str(v)


def observed_orders(errors):
    """log2(e_coarse / e_fine) per refinement step; first entry None."""
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 else None)
    return out


# ---------------------------------------------------------------------------
# Convergence against the analytic kinked solution


def _fracture_through_origin(theta, reach=10.0):
    u = np.array([math.cos(theta), math.sin(theta)])
    geo = CurveDescriptor.from_segment(-reach * u, reach * u)
    # conductance eps * k_f = 2, matching the analytic solution
    return Fracture(geo, parse_expr("2"), parse_expr("1"))


def convergence_problem(theta, n, bbox=(-math.pi, -math.pi, math.pi, math.pi)):
    mesh = build_rect_mesh(n, n, bbox)
    cond = BoundaryCondition(DIRICHLET, parse_expr(_dirichlet_text(theta)))
    bcs = BoundarySpec({tag: cond for tag in mesh.boundary_tags})
    return Problem(
        mesh=mesh,
        perm=MatrixPermeability.isotropic(1.0),
        network=FractureNetwork([_fracture_through_origin(theta)]),
        bcs=bcs,
        source=parse_expr("0"),
    )


def _dirichlet_text(theta):
    c, s = math.cos(theta), math.sin(theta)
    return f"sin({c!r}*x+{s!r}*y)*exp(abs({-s!r}*x+{c!r}*y))"


def convergence_study(theta, mesh_sizes, tol=1e-12) -> StudyTable:
    """Solve on each n x n mesh and tabulate errors and observed orders.

    Linf is taken over the interior quadrature points, consistent with how
    the norm rows are compared across refinements.
    """
    exact = lambda x, y: analytic_ex3(theta, np.stack([x, y], axis=-1))[0]
    l1s, l2s, lis = [], [], []
    for n in mesh_sizes:
        pb = convergence_problem(theta, n)
        fld, report, _ = solve_problem(pb, tol=tol)
        if not report.converged:
            raise RuntimeError(f"solver did not converge on the {n}x{n} mesh")
        norms = postproc.norms_vs_analytic(fld, exact)
        l1s.append(norms.l1)
        l2s.append(norms.l2)
        lis.append(norms.linf_quad)
    o1, o2, oi = observed_orders(l1s), observed_orders(l2s), observed_orders(lis)
    rows = [
        (f"{n}x{n}", l1s[k], o1[k], l2s[k], o2[k], lis[k], oi[k])
        for k, n in enumerate(mesh_sizes)
    ]
    return StudyTable(["mesh", "L1", "order", "L2", "order", "Linf", "order"], rows)


# ---------------------------------------------------------------------------
# Consistency under perturbation of a conforming network


def _perturbed_network(network, dx, dy, dtheta):
    """Rotate every fracture about the coordinate origin, then shift."""
    c, s = math.cos(dtheta), math.sin(dtheta)
    R = np.array([[c, -s], [s, c]])
    shift = np.array([dx, dy])
    out = []
    for frac in network:
        geo = frac.geometry
        if geo.kind == "segment":
            a = R @ geo.point(0.0) + shift
            b = R @ geo.point(1.0) + shift
            new_geo = CurveDescriptor.from_segment(a, b)
        elif geo.kind == "polyline":
            verts = geo.polyline_vertices @ R.T + shift
            new_geo = CurveDescriptor.from_polyline(verts)
        else:
            raise ValueError("consistency perturbations support straight and polyline fractures")
        out.append(Fracture(new_geo, frac.aperture, frac.tang_perm))
    return FractureNetwork(out)


def consistency_study(pb: Problem, perturbations, tol=1e-12) -> StudyTable:
    """Max-norm drift of the solution as the network leaves the mesh edges.

    ``perturbations`` is a list of (dx, dy, dtheta) triples applied to the
    base (conforming) network; the mesh never changes.
    """
    base_field, base_report, _ = solve_problem(pb, tol=tol)
    if not base_report.converged:
        raise RuntimeError("solver did not converge on the base problem")
    rows = []
    for dx, dy, dtheta in perturbations:
        network = _perturbed_network(pb.network, dx, dy, dtheta)
        perturbed = Problem(
            mesh=pb.mesh,
            perm=pb.perm,
            network=network,
            bcs=pb.bcs,
            source=pb.source,
        )
        fld, report, _ = solve_problem(perturbed, tol=tol)
        if not report.converged:
            raise RuntimeError(f"solver did not converge for perturbation {(dx, dy, dtheta)}")
        diff = float(np.abs(fld.values - base_field.values).max())
        rows.append((dx, dy, dtheta, diff))
    return StudyTable(["dx", "dy", "dtheta", "max_diff"], rows)
