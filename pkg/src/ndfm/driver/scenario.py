"""Declarative scenario configs: load, materialize, run.

A scenario is one JSON document:

    {
      "mesh":         {"kind": "rect", "nx": 50, "ny": 50, "bbox": [0,0,1,1]}
                      or {"kind": "file", "path": "meshes/foo.mesh"},
      "fractures":    {"path": "foo.frac"} or {"inline": ["SEG ...", ...]},
      "permeability": {"tensor": k | [kxx,kxy,kyy]}
                      or {"regions": {"default": ..., "boxes": [{"box": [...], "tensor": ...}]}},
      "bc":           {"<tag>": {"kind": "dirichlet"|"neumann", "expr": "..."}},
      "source":       "0",
      "solver":       {"tol": 1e-12, "maxit": 0},
      "output":       {"field": true, "formats": [...], "slices": [{"from": [..], "to": [..], "n": 101}]}
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import postproc
from ..assembly import assemble
from ..exprlang import parse_expr
from ..linsolve import solve_cg
from ..mesh import build_rect_mesh, load_mesh
from ..model import (
    BoundaryCondition,
    BoundarySpec,
    FractureNetwork,
    MatrixPermeability,
    Problem,
    load_network,
    parse_network,
    validate_problem,
)


class ScenarioError(ValueError):
    pass


_TOP_KEYS = {"mesh", "fractures", "permeability", "bc", "source", "solver", "output"}


@dataclass
class ScenarioConfig:
    data: dict
    base_dir: Path
    name: str = "scenario"

    def resolve(self, relpath):
        return (self.base_dir / relpath).resolve()


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from None
    cfg = ScenarioConfig(data, path.parent, path.stem)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    data = cfg.data
    if not isinstance(data, dict):
        raise ScenarioError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown config keys: {sorted(unknown)}")
    for key in ("mesh", "permeability", "bc", "source"):
        if key not in data:
            raise ScenarioError(f"config is missing {key!r}")


def _tensor_from(value):
    if np.isscalar(value):
        return MatrixPermeability.isotropic(float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        t = np.array([[arr[0], arr[1]], [arr[1], arr[2]]])
    elif arr.shape == (2, 2):
        t = arr
    else:
        raise ScenarioError("tensor must be a scalar, [kxx,kxy,kyy], or a 2x2 array")
    return MatrixPermeability(tensor=t)


def _tensor_components(value):
    return _tensor_from(value).tensor


def build_mesh(cfg: ScenarioConfig):
    spec = cfg.data["mesh"]
    kind = spec.get("kind")
    if kind == "rect":
        return build_rect_mesh(int(spec["nx"]), int(spec["ny"]), tuple(spec["bbox"]))
    if kind == "file":
        path = cfg.resolve(spec["path"])
        if not path.exists():
            raise ScenarioError(f"mesh file not found: {path}")
        return load_mesh(path.read_text(encoding="utf-8"))
    raise ScenarioError(f"unknown mesh kind {kind!r}")


def build_network(cfg: ScenarioConfig) -> FractureNetwork:
    spec = cfg.data.get("fractures")
    if spec is None:
        return FractureNetwork([])
    if "path" in spec:
        path = cfg.resolve(spec["path"])
        if not path.exists():
            raise ScenarioError(f"fracture network file not found: {path}")
        return load_network(path)
    if "inline" in spec:
        return parse_network("\n".join(spec["inline"]))
    raise ScenarioError("fractures needs either 'path' or 'inline'")


def build_permeability(cfg: ScenarioConfig, mesh):
    spec = cfg.data["permeability"]
    if "tensor" in spec:
        return _tensor_from(spec["tensor"])
    if "regions" in spec:
        reg = spec["regions"]
        default = _tensor_components(reg["default"])
        table = np.broadcast_to(default, (len(mesh.cells), 2, 2)).copy()
        centers = mesh.vertices[mesh.cells].mean(axis=1)
        for box_spec in reg.get("boxes", []):
            xmin, ymin, xmax, ymax = (float(v) for v in box_spec["box"])
            t = _tensor_components(box_spec["tensor"])
            inside = (
                (centers[:, 0] >= xmin)
                & (centers[:, 0] <= xmax)
                & (centers[:, 1] >= ymin)
                & (centers[:, 1] <= ymax)
            )
            table[inside] = t
        return MatrixPermeability(per_cell=table)
    raise ScenarioError("permeability needs either 'tensor' or 'regions'")


def build_bcs(cfg: ScenarioConfig) -> BoundarySpec:
    conditions = {}
    for tag, spec in cfg.data["bc"].items():
        conditions[int(tag)] = BoundaryCondition(spec["kind"], parse_expr(str(spec["expr"])))
    return BoundarySpec(conditions)


def build_problem(cfg: ScenarioConfig) -> Problem:
    mesh = build_mesh(cfg)
    pb = Problem(
        mesh=mesh,
        perm=build_permeability(cfg, mesh),
        network=build_network(cfg),
        bcs=build_bcs(cfg),
        source=parse_expr(str(cfg.data["source"])),
    )
    report = validate_problem(pb)
    if not report.ok:
        raise ScenarioError(f"{cfg.name}: {report}")
    return pb


def solver_settings(cfg: ScenarioConfig):
    spec = cfg.data.get("solver", {})
    tol = float(spec.get("tol", 1e-12))
    maxit = int(spec.get("maxit", 0)) or None
    return tol, maxit


@dataclass
class RunResult:
    field: postproc.PressureField
    report: object
    slices: list
    written: list = field(default_factory=list)


def solve_problem(pb: Problem, tol=1e-12, maxit=None, *, keep_full=False):
    """Assemble + solve + wrap as a nodal field."""
    system = assemble(pb, keep_full=keep_full)
    x, report = solve_cg(system, tol=tol, maxit=maxit)
    return postproc.PressureField(pb.mesh, system.expand(x)), report, system


def run_scenario(cfg: ScenarioConfig, outdir=None) -> RunResult:
    """Assemble, solve, post-process, and write requested outputs."""
    t0 = time.perf_counter()
    pb = build_problem(cfg)
    tol, maxit = solver_settings(cfg)
    fld, report, _ = solve_problem(pb, tol=tol, maxit=maxit)

    out_spec = cfg.data.get("output", {})
    slices = []
    for sl in out_spec.get("slices", []):
        slices.append(postproc.slice_profile(fld, sl["from"], sl["to"], int(sl["n"])))

    written = []
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        if out_spec.get("field", False):
            for fmt in out_spec.get("formats", ["csv-points"]):
                ext = {"csv-points": "csv", "vtk-legacy": "vtk"}[fmt]
                path = outdir / f"{cfg.name}_field.{ext}"
                path.write_text(postproc.export_field(fld, fmt), encoding="utf-8")
                written.append(path)
        for k, profile in enumerate(slices):
            path = outdir / f"{cfg.name}_slice_{k}.csv"
            path.write_text(postproc.slice_to_csv(profile), encoding="utf-8")
            written.append(path)

    return RunResult(fld, report, slices, written)
