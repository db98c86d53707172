"""Finite element solver for single-phase Darcy flow in fractured porous media.

Fractures are one-dimensional conductive curves that may cross mesh cells
freely: their contribution to the stiffness matrix is a line integral of
tangential shape-function derivatives over the fracture path, so no mesh
alignment is required.  On meshes that do conform to the fractures the
scheme reduces to the classical coupled cell/line-element discretization.
"""

from .assembly import LinearSystem, assemble, trace_network
from .exprlang import eval_expr, parse_expr
from .geom2d import CurveDescriptor, ParamInterval, Segment2, Transform2
from .linsolve import estimate_cond2, solve_cg
from .mesh import Mesh, build_rect_mesh, load_mesh, locate_point, save_mesh
from .model import (
    BoundaryCondition,
    BoundarySpec,
    Fracture,
    FractureNetwork,
    MatrixPermeability,
    Problem,
    analytic_ex3,
    load_network,
    parse_network,
    validate_problem,
)
from .postproc import (
    PressureField,
    evaluate,
    export_field,
    norms_vs_analytic,
    relative_errors,
    slice_profile,
)

__version__ = "0.1.0"
