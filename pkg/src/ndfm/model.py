"""Problem definition: permeability, fractures, boundary data, source.

A fracture is a curve carrying an aperture eps(s) and a tangential
permeability k_f(s); only their product (the line conductance) enters the
flow equations.  Fracture network file format (UTF-8, line oriented, '#'
comments; the two trailing fields are expression strings in s, quoted when
they contain spaces):

    SEG  x1 y1 x2 y2                 eps_expr kf_expr
    POLY n x1 y1 ... xn yn           eps_expr kf_expr
    CIRC cx cy r t0 t1               eps_expr kf_expr
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field

import numpy as np

from . import exprlang
from .exprlang import Expr, eval_expr, parse_expr
from .geom2d import CurveDescriptor, Transform2, to_local
from .mesh import Mesh


class ModelError(ValueError):
    pass


class NetworkFormatError(ModelError):
    """Malformed fracture network file; message names the offending line."""


# ---------------------------------------------------------------------------
# Matrix permeability


class MatrixPermeability:
    """Symmetric positive definite 2x2 tensor, constant or per cell."""

    def __init__(self, tensor=None, per_cell=None):
        if (tensor is None) == (per_cell is None):
            raise ModelError("give either a constant tensor or a per-cell table")
        if tensor is not None:
            self.tensor = _check_spd(np.asarray(tensor, dtype=float))
            self.per_cell_table = None
        else:
            table = np.asarray(per_cell, dtype=float)
            if table.ndim != 3 or table.shape[1:] != (2, 2):
                raise ModelError("per-cell table must have shape (ncells, 2, 2)")
            for k in range(len(table)):
                _check_spd(table[k], where=f"cell {k}")
            self.tensor = None
            self.per_cell_table = table

    @staticmethod
    def isotropic(k):
        return MatrixPermeability(tensor=float(k) * np.eye(2))

    def for_mesh(self, mesh: Mesh):
        """Per-cell (ncells, 2, 2) tensor table."""
        if self.per_cell_table is not None:
            if len(self.per_cell_table) != len(mesh.cells):
                raise ModelError("per-cell permeability table does not match the mesh")
            return self.per_cell_table
        return np.broadcast_to(self.tensor, (len(mesh.cells), 2, 2))

    def violations(self):
        try:
            if self.tensor is not None:
                _check_spd(self.tensor)
            else:
                for k in range(len(self.per_cell_table)):
                    _check_spd(self.per_cell_table[k], where=f"cell {k}")
        except ModelError as exc:
            return [str(exc)]
        return []


def _check_spd(t, where="matrix permeability"):
    if t.shape == ():
        t = float(t) * np.eye(2)
    if t.shape != (2, 2):
        raise ModelError(f"{where}: tensor must be 2x2")
    scale = max(abs(t).max(), 1.0)
    if abs(t[0, 1] - t[1, 0]) > 1e-15 * scale:
        raise ModelError(f"{where}: tensor is not symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (t + t.T))
    if eigs.min() <= 0.0:
        raise ModelError(f"{where}: tensor is not positive definite (eigenvalues {eigs})")
    return t


# ---------------------------------------------------------------------------
# Fractures


@dataclass
class Fracture:
    """A conductive curve: geometry plus aperture and tangential permeability."""

    geometry: CurveDescriptor
    aperture: Expr
    tang_perm: Expr

    def __post_init__(self):
        for name, e in (("aperture", self.aperture), ("tang_perm", self.tang_perm)):
            extra = exprlang.free_vars(e) - {"s"}
            if extra:
                raise ModelError(f"{name} may only depend on s, found {sorted(extra)}")

    def eps_kf(self, s):
        """Line conductance eps(s) * k_f(s)."""
        return eval_expr(self.aperture, {"s": s}) * eval_expr(self.tang_perm, {"s": s})

    @property
    def is_straight(self):
        return self.geometry.kind == "segment"

    def straight_frame(self):
        """(theta, nu, sigma, xi1, xi2, eta0) of a straight fracture.

        The local frame rotates the fracture onto the xi axis: nu is the unit
        tangent, sigma the unit normal (nu rotated by +pi/2), and the
        endpoints sit at (xi1, eta0), (xi2, eta0).
        """
        if not self.is_straight:
            raise ModelError("straight_frame is only defined for segment fractures")
        a = self.geometry.point(0.0)
        b = self.geometry.point(1.0)
        theta = math.atan2(b[1] - a[1], b[0] - a[0])
        nu = np.array([math.cos(theta), math.sin(theta)])
        sigma = np.array([-math.sin(theta), math.cos(theta)])
        tf = Transform2(theta)
        la = to_local(tf, a)
        lb = to_local(tf, b)
        eta0 = 0.5 * (la[1] + lb[1])
        return theta, nu, sigma, float(la[0]), float(lb[0]), float(eta0)


@dataclass
class FractureNetwork:
    fractures: list = field(default_factory=list)

    def __len__(self):
        return len(self.fractures)

    def __iter__(self):
        return iter(self.fractures)

    def __getitem__(self, i):
        return self.fractures[i]


def parse_network(text: str) -> FractureNetwork:
    """Parse the fracture network text format."""
    fractures = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            parts = shlex.split(line)
        except ValueError as exc:
            raise NetworkFormatError(f"line {lineno}: {exc}") from None
        kind = parts[0].upper()
        try:
            if kind == "SEG":
                if len(parts) != 7:
                    raise NetworkFormatError(
                        f"line {lineno}: SEG needs 'x1 y1 x2 y2 eps kf', got {len(parts) - 1} fields"
                    )
                x1, y1, x2, y2 = (float(v) for v in parts[1:5])
                geo = CurveDescriptor.from_segment((x1, y1), (x2, y2))
                eps_text, kf_text = parts[5], parts[6]
            elif kind == "POLY":
                n = int(parts[1])
                if len(parts) != 2 + 2 * n + 2:
                    raise NetworkFormatError(
                        f"line {lineno}: POLY {n} needs {2 * n} coordinates plus eps and kf"
                    )
                coords = [float(v) for v in parts[2 : 2 + 2 * n]]
                verts = np.array(coords).reshape(n, 2)
                geo = CurveDescriptor.from_polyline(verts)
                eps_text, kf_text = parts[2 + 2 * n], parts[3 + 2 * n]
            elif kind == "CIRC":
                if len(parts) != 8:
                    raise NetworkFormatError(
                        f"line {lineno}: CIRC needs 'cx cy r t0 t1 eps kf', got {len(parts) - 1} fields"
                    )
                cx, cy, r, t0, t1 = (float(v) for v in parts[1:6])
                geo = CurveDescriptor.from_circular_arc((cx, cy), r, t0, t1)
                eps_text, kf_text = parts[6], parts[7]
            else:
                raise NetworkFormatError(f"line {lineno}: unknown record {parts[0]!r}")
            fractures.append(
                Fracture(geo, parse_expr(eps_text), parse_expr(kf_text))
            )
        except NetworkFormatError:
            raise
        except (ValueError, ModelError) as exc:
            raise NetworkFormatError(f"line {lineno}: {exc}") from None
    return FractureNetwork(fractures)


def load_network(path) -> FractureNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


# ---------------------------------------------------------------------------
# Boundary conditions


DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    expr: Expr

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise ModelError(f"unknown boundary condition kind {self.kind!r}")
        extra = exprlang.free_vars(self.expr) - {"x", "y"}
        if extra:
            raise ModelError(f"boundary expression may only use x, y; found {sorted(extra)}")

    def __call__(self, x, y):
        return eval_expr(self.expr, {"x": x, "y": y})


@dataclass
class BoundarySpec:
    """Map from boundary tag to a Dirichlet or Neumann condition."""

    conditions: dict

    @staticmethod
    def dirichlet_everywhere(mesh, expr_text):
        e = parse_expr(expr_text)
        return BoundarySpec({tag: BoundaryCondition(DIRICHLET, e) for tag in mesh.boundary_tags})

    def violations(self, mesh):
        out = []
        for tag in mesh.boundary_tags:
            if tag not in self.conditions:
                out.append(f"boundary tag {tag} has no condition")
        for tag in self.conditions:
            if tag not in mesh.boundary_tags:
                out.append(f"condition given for tag {tag} absent from the mesh")
        if not any(c.kind == DIRICHLET for c in self.conditions.values()):
            out.append("no Dirichlet boundary: the flow problem would be singular")
        return out


# ---------------------------------------------------------------------------
# Full problem


@dataclass
class Problem:
    mesh: Mesh
    perm: MatrixPermeability
    network: FractureNetwork
    bcs: BoundarySpec
    source: Expr

    def source_fn(self):
        e = self.source
        return lambda x, y: eval_expr(e, {"x": x, "y": y})


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self):
        return not self.violations

    def __str__(self):
        if self.ok:
            return "problem valid"
        return "problem invalid:\n" + "\n".join(f"  - {v}" for v in self.violations)


def validate_problem(pb: Problem) -> ValidationReport:
    """Check tensors, boundary coverage, and fracture positivity.

    Violations are returned as data, not raised.
    """
    out = []
    out.extend(pb.perm.violations())
    if pb.perm.per_cell_table is not None and len(pb.perm.per_cell_table) != len(pb.mesh.cells):
        out.append("per-cell permeability table does not match the mesh")
    out.extend(pb.bcs.violations(pb.mesh))
    extra = exprlang.free_vars(pb.source) - {"x", "y"}
    if extra:
        out.append(f"source may only use x, y; found {sorted(extra)}")
    for i, frac in enumerate(pb.network):
        length = frac.geometry.total_length()
        for s in np.linspace(0.0, length, 100):
            try:
                eps = eval_expr(frac.aperture, {"s": s})
                kf = eval_expr(frac.tang_perm, {"s": s})
            except exprlang.ExprEvalError as exc:
                out.append(f"fracture {i}: property evaluation failed at s={s:.6g}: {exc}")
                break
            if not eps > 0.0:
                out.append(f"fracture {i}: aperture is not positive at s={s:.6g}")
                break
            if not kf > 0.0:
                out.append(f"fracture {i}: tangential permeability is not positive at s={s:.6g}")
                break
    return ValidationReport(out)


# ---------------------------------------------------------------------------
# Built-in analytic solution (kinked across a line through the origin)


def analytic_ex3(theta, p):
    """Reference solution sin(xi) * exp(|eta|) in the frame rotated by theta.

    Solves the fracture flow equation for a unit matrix permeability and a
    single straight fracture of conductance 2 along eta = 0.  Returns
    (value, gradient); on the kink line the gradient takes its limit from
    eta > 0.
    """
    p = np.asarray(p, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    xi = c * p[..., 0] + s * p[..., 1]
    eta = -s * p[..., 0] + c * p[..., 1]
    ae = np.abs(eta)
    value = np.sin(xi) * np.exp(ae)
    sign = np.where(eta >= 0.0, 1.0, -1.0)
    dxi = np.cos(xi) * np.exp(ae)
    deta = np.sin(xi) * sign * np.exp(ae)
    gx = dxi * c - deta * s
    gy = dxi * s + deta * c
    return value, np.stack([gx, gy], axis=-1)
