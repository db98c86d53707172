"""Scenario configs, reference oracles, and study runners."""

from .meshgen import hydrocoin_mesh, unit_circle_mesh
from .oracles import OracleError, classical_dfm_assemble, rasterize_equi_dim
from .scenario import (
    RunResult,
    ScenarioConfig,
    ScenarioError,
    build_problem,
    load_scenario,
    run_scenario,
    solve_problem,
)
from .studies import (
    StudyTable,
    consistency_study,
    convergence_problem,
    convergence_study,
    observed_orders,
)

__all__ = [
    "OracleError",
    "RunResult",
    "ScenarioConfig",
    "ScenarioError",
    "StudyTable",
    "build_problem",
    "classical_dfm_assemble",
    "consistency_study",
    "convergence_problem",
    "convergence_study",
    "hydrocoin_mesh",
    "load_scenario",
    "observed_orders",
    "rasterize_equi_dim",
    "run_scenario",
    "solve_problem",
    "unit_circle_mesh",
]
